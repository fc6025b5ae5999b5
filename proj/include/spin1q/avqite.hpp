#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "spin1q/pauli.hpp"
#include "spin1q/statevector.hpp"

namespace spin1q {

// Operator pools of odd-Y Pauli strings. Enumeration order is part of the contract
// (score ties are broken by the lowest pool index): single-Y strings first, then the
// two-body forms, then the three-body form, each block scanning site indices in
// ascending nested order with pairwise distinct indices.
enum class PoolKind { minimal, maximal };

inline const char* pool_name(PoolKind p) {
  return p == PoolKind::minimal ? "minimal" : "maximal";
}

inline PoolKind parse_pool(const std::string& name) {
  if (name == "minimal") return PoolKind::minimal;
  if (name == "maximal") return PoolKind::maximal;
  throw std::invalid_argument("unknown pool \"" + name + "\"");
}

// minimal: Y_i and Y_i Z_j           (n^2 strings)
// maximal: minimal plus Y_i X_j and Y_i X_j Z_k
//          (n + 2 n(n-1) + n(n-1)(n-2) strings)
inline std::vector<PauliString> build_pool(PoolKind kind, int n_qubits) {
  if (n_qubits < 1) throw std::invalid_argument("build_pool: empty register");
  std::vector<PauliString> pool;
  for (int i = 0; i < n_qubits; ++i) pool.push_back(PauliString::single(n_qubits, i, 'Y'));
  auto two_body = [&](char second) {
    for (int i = 0; i < n_qubits; ++i)
      for (int j = 0; j < n_qubits; ++j) {
        if (j == i) continue;
        PauliString p = PauliString::single(n_qubits, i, 'Y');
        p.set_op(j, second);
        pool.push_back(p);
      }
  };
  two_body('Z');
  if (kind == PoolKind::maximal) {
    two_body('X');
    for (int i = 0; i < n_qubits; ++i)
      for (int j = 0; j < n_qubits; ++j) {
        if (j == i) continue;
        for (int k = 0; k < n_qubits; ++k) {
          if (k == i || k == j) continue;
          PauliString p = PauliString::single(n_qubits, i, 'Y');
          p.set_op(j, 'X');
          p.set_op(k, 'Z');
          pool.push_back(p);
        }
      }
  }
  return pool;
}

struct AnsatzElement {
  PauliString generator;
  double theta = 0.0;
};

// Entangling cost of one generator compiled as a CX ladder: 2 (weight - 1) gates,
// zero for single-qubit strings.
inline long cnot_count(const PauliString& p) {
  const int w = p.weight();
  return w <= 1 ? 0 : 2L * (w - 1);
}

inline long cnot_count(const std::vector<AnsatzElement>& elements) {
  long total = 0;
  for (const auto& el : elements) total += cnot_count(el.generator);
  return total;
}

// |psi> = exp(-i th_n A_n) ... exp(-i th_1 A_1) |ref>, first element applied first.
inline StateVector ansatz_state(const std::vector<AnsatzElement>& elements,
                                const StateVector& ref) {
  StateVector psi = ref;
  for (const auto& el : elements) exp_apply_inplace(el.generator, el.theta, psi);
  return psi;
}

namespace detail {

inline void scale_minus_i(StateVector& psi) {
  for (std::size_t i = 0; i < psi.dim(); ++i) {
    const cplx a = psi[i];
    psi[i] = cplx(a.imag(), -a.real());
  }
}

// tiny negatives from rounding collapse to zero; anything more negative is passed
// through untouched so a real defect stays visible
inline double clamp_distance(double l2) {
  return (l2 < 0.0 && l2 > -1e-10) ? 0.0 : l2;
}

}  // namespace detail

// Tangent vectors |d_k> = d|psi>/d th_k. Built with one forward pass and a
// triangular suffix sweep, n(n+1)/2 rotations total.
inline std::vector<StateVector> derivative_states(const std::vector<AnsatzElement>& elements,
                                                  const StateVector& ref) {
  const std::size_t n = elements.size();
  std::vector<StateVector> ds;
  ds.reserve(n);
  StateVector fwd = ref;
  for (std::size_t j = 0; j < n; ++j) {
    exp_apply_inplace(elements[j].generator, elements[j].theta, fwd);
    for (std::size_t k = 0; k < j; ++k)
      exp_apply_inplace(elements[j].generator, elements[j].theta, ds[k]);
    StateVector d = apply_string(elements[j].generator, fwd);
    detail::scale_minus_i(d);
    ds.push_back(std::move(d));
  }
  return ds;
}

// Everything the equation of motion needs at the current parameters: the state, its
// image under H, tangent vectors, the metric g, gradient V, and energy moments.
//   g_ij = Re[<d_i|d_j> + <psi|d_i><psi|d_j>]
//   V_i  = -Re<d_i|H|psi>
// The metric keeps the connection products in complex form; <psi|d_k> is purely
// imaginary for normalized states, which the tests assert rather than assume.
struct Workspace {
  StateVector psi;
  StateVector hpsi;
  std::vector<StateVector> deriv;
  Eigen::VectorXcd conn;  // c_k = <psi|d_k>
  Eigen::MatrixXd g;
  Eigen::VectorXd v;
  double energy = 0.0;
  double variance = 0.0;

  Workspace() : psi(0), hpsi(0) {}
};

// Variant taking |psi> and H|psi> already built for the current angles, so a caller
// stepping the parameters can hand over the state it just evaluated.
inline Workspace assemble_from_state(const std::vector<AnsatzElement>& elements,
                                     const StateVector& ref, StateVector psi,
                                     StateVector hpsi) {
  Workspace ws;
  ws.psi = std::move(psi);
  ws.hpsi = std::move(hpsi);
  const cplx e = inner(ws.psi, ws.hpsi);
  ws.energy = e.real();
  ws.variance = std::max(0.0, ws.hpsi.norm_sq() - std::norm(e));
  ws.deriv = derivative_states(elements, ref);
  const int n = static_cast<int>(elements.size());
  ws.conn.resize(n);
  ws.g.resize(n, n);
  ws.v.resize(n);
  for (int i = 0; i < n; ++i)
    ws.conn(i) = inner(ws.psi, ws.deriv[static_cast<std::size_t>(i)]);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      const cplx overlap =
          inner(ws.deriv[static_cast<std::size_t>(i)], ws.deriv[static_cast<std::size_t>(j)]);
      ws.g(i, j) = ws.g(j, i) = (overlap + ws.conn(i) * ws.conn(j)).real();
    }
    ws.v(i) = -inner(ws.deriv[static_cast<std::size_t>(i)], ws.hpsi).real();
  }
  return ws;
}

inline Workspace assemble(const PauliSum& h, const std::vector<AnsatzElement>& elements,
                          const StateVector& ref) {
  StateVector psi = ansatz_state(elements, ref);
  StateVector hpsi = apply_sum(h, psi);
  return assemble_from_state(elements, ref, std::move(psi), std::move(hpsi));
}

// Tikhonov-regularized equation of motion (g + lambda I) thdot = V. Cholesky first;
// if the shifted matrix is still not positive definite, fall back to a least-squares
// solve of the same system.
inline Eigen::VectorXd solve_eom(const Eigen::MatrixXd& g, const Eigen::VectorXd& v,
                                 double lambda) {
  if (g.rows() != g.cols() || g.rows() != v.size())
    throw std::invalid_argument("solve_eom: dimension mismatch");
  if (!g.allFinite() || !v.allFinite() || !std::isfinite(lambda))
    throw std::invalid_argument("solve_eom: non-finite input");
  if (v.size() == 0) return Eigen::VectorXd();
  Eigen::MatrixXd m = g;
  m.diagonal().array() += lambda;
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() == Eigen::Success) return llt.solve(v);
  return m.completeOrthogonalDecomposition().solve(v);
}

// Squared McLachlan distance 2 thdot'g thdot - 4 V'thdot + 2 var(H).
inline double mclachlan_l2(const Eigen::MatrixXd& g, const Eigen::VectorXd& v,
                           const Eigen::VectorXd& thdot, double variance) {
  if (g.rows() != thdot.size() || v.size() != thdot.size())
    throw std::invalid_argument("mclachlan_l2: dimension mismatch");
  return detail::clamp_distance(2.0 * thdot.dot(g * thdot) - 4.0 * v.dot(thdot) +
                                2.0 * variance);
}

// Distance at the regularized optimum without forming thdot'g thdot: substituting
// (g + lambda I) thdot = V gives L2 = 2 var(H) - 2 V'thdot - 2 lambda |thdot|^2.
inline double mclachlan_l2_at_solution(const Eigen::VectorXd& v, const Eigen::VectorXd& thdot,
                                       double lambda, double variance) {
  return detail::clamp_distance(2.0 * variance - 2.0 * v.dot(thdot) -
                                2.0 * lambda * thdot.squaredNorm());
}

// Velocity actually integrated by the engine: the Tikhonov solution restricted to
// metric modes above a spectral floor. Directions with eigenvalue below the floor
// barely move the state yet receive enormous parameter velocities from the
// regularized inverse, and a fixed-step integrator is unconditionally unstable along
// them once the ansatz develops redundancy. Dropping them preserves the descent
// property exactly (the retained rate is -2 sum_k v_k^2/(mu_k + lambda) <= 0) and
// any flow they carried shows up in the recorded McLachlan distance, where it
// triggers ansatz growth instead of a blow-up.
inline Eigen::VectorXd filtered_velocity(const Eigen::MatrixXd& g, const Eigen::VectorXd& v,
                                         double lambda, double spectral_floor) {
  if (v.size() == 0) return Eigen::VectorXd();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
  if (es.info() != Eigen::Success) return solve_eom(g, v, lambda);
  Eigen::VectorXd th = Eigen::VectorXd::Zero(v.size());
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    const double mu = es.eigenvalues()(k);
    if (mu < spectral_floor) continue;
    const Eigen::VectorXd u = es.eigenvectors().col(k);
    th += u * (u.dot(v) / (mu + lambda));
  }
  return th;
}

// Would-be squared distance after appending `candidate` with theta = 0, computed by
// solving the bordered regularized system directly. Reference implementation; the
// engine reproduces it with a shared factorization across the pool.
inline double score_candidate(const Workspace& ws, const PauliString& candidate, double lambda) {
  const int n = static_cast<int>(ws.deriv.size());
  StateVector d = apply_string(candidate, ws.psi);
  detail::scale_minus_i(d);
  const cplx c_new = inner(ws.psi, d);
  Eigen::MatrixXd g2(n + 1, n + 1);
  g2.topLeftCorner(n, n) = ws.g;
  for (int i = 0; i < n; ++i) {
    const cplx overlap = inner(ws.deriv[static_cast<std::size_t>(i)], d);
    g2(i, n) = g2(n, i) = (overlap + ws.conn(i) * c_new).real();
  }
  g2(n, n) = d.norm_sq() + (c_new * c_new).real();
  Eigen::VectorXd v2(n + 1);
  v2.head(n) = ws.v;
  v2(n) = -inner(d, ws.hpsi).real();
  const Eigen::VectorXd x = solve_eom(g2, v2, lambda);
  return mclachlan_l2_at_solution(v2, x, lambda, ws.variance);
}

struct AvqiteConfig {
  double dtau = 0.01;
  double l2_threshold = 1e-2;
  double grad_cutoff = 1e-4;
  double lambda = 1e-6;
  int max_steps = 10000;
  int max_adds_per_step = 8;
  double min_score_improvement = 1e-8;

  // metric modes below this multiple of lambda are excluded from the integrated
  // velocity (see filtered_velocity)
  static constexpr double kSpectralFloorOverLambda = 100.0;
  double spectral_floor() const { return kSpectralFloorOverLambda * lambda; }

  void validate() const {
    if (!(dtau > 0) || !(l2_threshold > 0) || !(grad_cutoff > 0) || !(lambda > 0) ||
        max_steps < 1 || max_adds_per_step < 1 || !(min_score_improvement > 0))
      throw std::invalid_argument("AvqiteConfig: all fields must be positive");
  }
};

enum class HaltReason {
  gradient_converged,          // max |V_i| over the ansatz fell below grad_cutoff
  vanishing_initial_gradient,  // empty ansatz and no pool operator has a gradient
  stalled,                     // empty ansatz kept the distance below threshold; nothing to evolve
  max_steps,
  diverged,
};

inline const char* halt_reason_name(HaltReason r) {
  switch (r) {
    case HaltReason::gradient_converged: return "gradient_converged";
    case HaltReason::vanishing_initial_gradient: return "vanishing_initial_gradient";
    case HaltReason::stalled: return "stalled";
    case HaltReason::max_steps: return "max_steps";
    default: return "diverged";
  }
}

struct StepRecord {
  double tau = 0.0;
  double energy = 0.0;
  double l2 = 0.0;      // after any expansion at this step
  int n_theta = 0;      // after any expansion at this step
  long n_cx = 0;        // entangling cost of the ansatz at this step
  double proj = std::numeric_limits<double>::quiet_NaN();  // physical-subspace weight
  double max_grad = 0.0;  // before expansion; pool gradient when the ansatz is empty
};

struct RunResult {
  std::vector<AnsatzElement> ansatz;
  std::vector<StepRecord> trajectory;
  double energy = std::numeric_limits<double>::quiet_NaN();
  double fidelity = std::numeric_limits<double>::quiet_NaN();
  double proj = std::numeric_limits<double>::quiet_NaN();
  double initial_variance = std::numeric_limits<double>::quiet_NaN();
  long n_cx_final = 0;
  long n_cx_cumulative = 0;  // summed over trajectory records
  int steps = 0;             // Euler updates performed
  bool success = false;      // fidelity >= 0.999
  HaltReason halted = HaltReason::max_steps;
};

// Imaginary-time evolution with McLachlan-distance-triggered ansatz growth. The
// engine is deterministic: no randomness enters anywhere, and score ties during
// expansion go to the lowest pool index.
class AvqiteEngine {
 public:
  AvqiteEngine(PauliSum h, StateVector reference, std::vector<PauliString> pool,
               AvqiteConfig cfg = {})
      : h_(std::move(h)), ref_(std::move(reference)), pool_(std::move(pool)), cfg_(cfg) {
    cfg_.validate();
    if (h_.n_qubits() != ref_.n_qubits())
      throw std::invalid_argument("AvqiteEngine: Hamiltonian/reference qubit mismatch");
    for (const auto& p : pool_)
      if (p.n_qubits() != ref_.n_qubits())
        throw std::invalid_argument("AvqiteEngine: pool qubit mismatch");
    if (std::abs(ref_.norm() - 1.0) > tol::norm_check)
      throw std::invalid_argument("AvqiteEngine: reference is not normalized");
  }

  // Weight of the state inside the physical subspace, recorded per step when set.
  void set_projector_monitor(std::function<double(const StateVector&)> fn) {
    proj_eval_ = std::move(fn);
  }
  // Overlap with the exact ground space, evaluated once on the final state.
  void set_fidelity_metric(std::function<double(const StateVector&)> fn) {
    fid_eval_ = std::move(fn);
  }
  // Start from a previously grown ansatz instead of the bare reference.
  void seed_ansatz(std::vector<AnsatzElement> elements) { elements_ = std::move(elements); }

  RunResult run() {
    RunResult out;
    std::vector<AnsatzElement>& els = elements_;
    double tau = 0.0;
    // |psi> and H|psi> carried over from the accepted Euler trial, so the energy
    // guard below costs no extra state builds (zero-angle pool appends leave |psi>
    // unchanged, so expansion does not invalidate them)
    StateVector psi_cache(0), hpsi_cache(0);
    bool have_cache = false;

    for (int step = 0;; ++step) {
      Workspace ws = have_cache ? assemble_from_state(els, ref_, std::move(psi_cache),
                                                      std::move(hpsi_cache))
                                : assemble(h_, els, ref_);
      have_cache = false;
      if (step == 0) out.initial_variance = ws.variance;
      if (!std::isfinite(ws.energy)) {
        out.halted = HaltReason::diverged;
        push_record(out, ws, tau, els, 0.0, 0.0);
        break;
      }

      Eigen::VectorXd thdot;
      double max_grad = 0.0;
      double l2 = 0.0;

      if (els.empty()) {
        // with no parameters the stop test falls to the pool: if no candidate has a
        // usable gradient the reference is (numerically) an eigenstate
        max_grad = pool_gradient_max(ws);
        l2 = detail::clamp_distance(2.0 * ws.variance);
        if (max_grad < cfg_.grad_cutoff) {
          out.halted = HaltReason::vanishing_initial_gradient;
          push_record(out, ws, tau, els, max_grad, l2);
          break;
        }
        if (l2 > cfg_.l2_threshold) expand(ws, els, thdot, l2);
        if (els.empty()) {
          // below threshold, or no candidate improved the distance: the ansatz can
          // never leave the reference
          out.halted = HaltReason::stalled;
          push_record(out, ws, tau, els, max_grad, l2);
          break;
        }
      } else {
        max_grad = ws.v.cwiseAbs().maxCoeff();
        if (max_grad < cfg_.grad_cutoff) {
          out.halted = HaltReason::gradient_converged;
          thdot = filtered_velocity(ws.g, ws.v, cfg_.lambda, cfg_.spectral_floor());
          push_record(out, ws, tau, els, max_grad,
                      mclachlan_l2(ws.g, ws.v, thdot, ws.variance));
          break;
        }
        thdot = filtered_velocity(ws.g, ws.v, cfg_.lambda, cfg_.spectral_floor());
        l2 = mclachlan_l2(ws.g, ws.v, thdot, ws.variance);
        if (l2 > cfg_.l2_threshold) expand(ws, els, thdot, l2);
      }

      push_record(out, ws, tau, els, max_grad, l2);
      if (step >= cfg_.max_steps) {
        out.halted = HaltReason::max_steps;
        break;
      }
      // forward Euler along the filtered velocity; in the rare case the full step
      // would raise the energy (curvature overshoot along a barely-kept metric mode)
      // the step is halved until it cannot: the velocity is a descent direction, so
      // a safe scale always exists and the energy trace stays monotone
      constexpr double kRiseTol = 1e-7;
      double scale = 1.0;
      for (int tries = 0;; ++tries) {
        std::vector<AnsatzElement> trial = els;
        for (std::size_t k = 0; k < trial.size(); ++k)
          trial[k].theta += cfg_.dtau * scale * thdot(static_cast<Eigen::Index>(k));
        StateVector trial_psi = ansatz_state(trial, ref_);
        StateVector trial_hpsi = apply_sum(h_, trial_psi);
        const double e_trial = inner(trial_psi, trial_hpsi).real();
        if (e_trial <= ws.energy + kRiseTol || tries >= 30) {
          els = std::move(trial);
          psi_cache = std::move(trial_psi);
          hpsi_cache = std::move(trial_hpsi);
          have_cache = true;
          break;
        }
        scale *= 0.5;
      }
      tau += cfg_.dtau * scale;
    }

    finalize(out, els);
    return out;
  }

 private:
  void push_record(RunResult& out, const Workspace& ws, double tau,
                   const std::vector<AnsatzElement>& els, double max_grad, double l2) {
    StepRecord rec;
    rec.tau = tau;
    rec.energy = ws.energy;
    rec.l2 = l2;
    rec.n_theta = static_cast<int>(els.size());
    rec.n_cx = cnot_count(els);
    rec.proj = proj_eval_ ? proj_eval_(ws.psi) : std::numeric_limits<double>::quiet_NaN();
    rec.max_grad = max_grad;
    out.trajectory.push_back(rec);
  }

  double pool_gradient_max(const Workspace& ws) const {
    double mx = 0.0;
    for (const auto& cand : pool_) {
      StateVector d = apply_string(cand, ws.psi);
      detail::scale_minus_i(d);
      mx = std::max(mx, std::abs(inner(d, ws.hpsi).real()));
    }
    return mx;
  }

  // Grow the ansatz while the distance exceeds the threshold: score every pool
  // candidate through a bordered solve sharing one factorization, append the best,
  // and repeat up to max_adds_per_step times or until no candidate improves the
  // distance by min_score_improvement. thdot and l2 are left consistent with the
  // grown system.
  void expand(Workspace& ws, std::vector<AnsatzElement>& els, Eigen::VectorXd& thdot,
              double& l2) {
    for (int adds = 0; adds < cfg_.max_adds_per_step; ++adds) {
      if (l2 <= cfg_.l2_threshold) return;
      const int n = static_cast<int>(els.size());
      Eigen::MatrixXd m = ws.g;
      m.diagonal().array() += cfg_.lambda;
      Eigen::LLT<Eigen::MatrixXd> llt;
      bool have_llt = false;
      if (n > 0) {
        llt.compute(m);
        have_llt = llt.info() == Eigen::Success;
      }
      auto shifted_solve = [&](const Eigen::VectorXd& rhs) -> Eigen::VectorXd {
        if (have_llt) return llt.solve(rhs);
        return m.completeOrthogonalDecomposition().solve(rhs);
      };
      const Eigen::VectorXd x0 = n == 0 ? Eigen::VectorXd() : shifted_solve(ws.v);

      int best = -1;
      double best_score = std::numeric_limits<double>::infinity();
      StateVector best_d(ws.psi.n_qubits());
      cplx best_c = 0.0;
      double best_vc = 0.0;
      Eigen::VectorXd best_border;

      for (std::size_t c = 0; c < pool_.size(); ++c) {
        const PauliString& cand = pool_[c];
        // an element just appended with theta still at zero must not be appended
        // again; the repeat would duplicate a row of the bordered system exactly
        if (!els.empty() && els.back().theta == 0.0 && els.back().generator == cand) continue;

        StateVector d = apply_string(cand, ws.psi);
        detail::scale_minus_i(d);
        const cplx c_new = inner(ws.psi, d);
        const double vc = -inner(d, ws.hpsi).real();
        Eigen::VectorXd border(n);
        for (int i = 0; i < n; ++i)
          border(i) =
              (inner(ws.deriv[static_cast<std::size_t>(i)], d) + ws.conn(i) * c_new).real();
        const double corner = d.norm_sq() + (c_new * c_new).real() + cfg_.lambda;

        Eigen::VectorXd u;
        if (n > 0) u = shifted_solve(border);
        const double schur = corner - (n > 0 ? border.dot(u) : 0.0);
        if (schur <= cfg_.spectral_floor() + cfg_.lambda) {
          // candidate tangent (nearly) lies in the current span; the integrator
          // could not use the new direction anyway
          continue;
        }
        const double xc = (vc - (n > 0 ? border.dot(x0) : 0.0)) / schur;
        Eigen::VectorXd x(n + 1);
        if (n > 0) x.head(n) = x0 - xc * u;
        x(n) = xc;
        Eigen::VectorXd v2(n + 1);
        if (n > 0) v2.head(n) = ws.v;
        v2(n) = vc;
        const double score = mclachlan_l2_at_solution(v2, x, cfg_.lambda, ws.variance);

        if (score < best_score) {
          best_score = score;
          best = static_cast<int>(c);
          best_d = std::move(d);
          best_c = c_new;
          best_vc = vc;
          best_border = border;
        }
      }

      if (best < 0 || l2 - best_score < cfg_.min_score_improvement) return;

      // adopt the winner: the state is unchanged (theta = 0), so the workspace only
      // grows by the new tangent row
      els.push_back({pool_[static_cast<std::size_t>(best)], 0.0});
      const double corner_g = best_d.norm_sq() + (best_c * best_c).real();
      ws.deriv.push_back(std::move(best_d));
      Eigen::VectorXcd conn2(n + 1);
      conn2.head(n) = ws.conn;
      conn2(n) = best_c;
      ws.conn = conn2;
      Eigen::MatrixXd g2(n + 1, n + 1);
      g2.topLeftCorner(n, n) = ws.g;
      g2.block(0, n, n, 1) = best_border;
      g2.block(n, 0, 1, n) = best_border.transpose();
      g2(n, n) = corner_g;
      ws.g = g2;
      Eigen::VectorXd v2(n + 1);
      v2.head(n) = ws.v;
      v2(n) = best_vc;
      ws.v = v2;

      const double l2_before = l2;
      thdot = filtered_velocity(ws.g, ws.v, cfg_.lambda, cfg_.spectral_floor());
      l2 = mclachlan_l2(ws.g, ws.v, thdot, ws.variance);
      if (l2 > l2_before - cfg_.min_score_improvement) {
        // the closed-form gain did not survive the integrator's spectral filter;
        // keep the element out rather than carry a frozen parameter
        els.pop_back();
        ws.deriv.pop_back();
        ws.conn.conservativeResize(n);
        ws.g.conservativeResize(n, n);
        ws.v.conservativeResize(n);
        thdot = filtered_velocity(ws.g, ws.v, cfg_.lambda, cfg_.spectral_floor());
        l2 = mclachlan_l2(ws.g, ws.v, thdot, ws.variance);
        return;
      }
    }
  }

  void finalize(RunResult& out, const std::vector<AnsatzElement>& els) {
    out.ansatz = els;
    const StateVector psi = ansatz_state(els, ref_);
    if (!out.trajectory.empty()) out.energy = out.trajectory.back().energy;
    out.proj = proj_eval_ ? proj_eval_(psi) : std::numeric_limits<double>::quiet_NaN();
    out.fidelity = fid_eval_ ? fid_eval_(psi) : std::numeric_limits<double>::quiet_NaN();
    out.n_cx_final = cnot_count(els);
    out.n_cx_cumulative = 0;
    for (const auto& rec : out.trajectory) out.n_cx_cumulative += rec.n_cx;
    out.steps = std::max(0, static_cast<int>(out.trajectory.size()) - 1);
    out.success = out.fidelity >= 0.999;
  }

  PauliSum h_;
  StateVector ref_;
  std::vector<PauliString> pool_;
  AvqiteConfig cfg_;
  std::vector<AnsatzElement> elements_;
  std::function<double(const StateVector&)> proj_eval_;
  std::function<double(const StateVector&)> fid_eval_;
};

}  // namespace spin1q
