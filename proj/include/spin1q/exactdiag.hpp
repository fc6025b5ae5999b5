#pragma once

#include <functional>
#include <map>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "spin1q/encoding.hpp"
#include "spin1q/model.hpp"
#include "spin1q/statevector.hpp"

namespace spin1q {

struct EDOptions {
  int k = 1;                          // number of lowest eigenpairs to resolve
  std::size_t dense_threshold = 1000; // full diagonalization below this dimension
  double residual_tol = 1e-8;         // required |H v - E v| for every reported pair
  double degeneracy_tol = 1e-10;      // relative window for degenerate partners
  int max_krylov = 250;
  int max_restarts = 80;
  std::uint64_t seed = 0x5eed;
};

struct EDResult {
  std::vector<double> energies;          // ascending
  std::vector<Eigen::VectorXd> vectors;  // matching order, unit norm
  std::vector<double> residuals;

  // indices of states degenerate with the ground state
  std::vector<std::size_t> ground_members(double deg_tol) const {
    std::vector<std::size_t> out;
    if (energies.empty()) return out;
    const double window = deg_tol * std::max(1.0, std::abs(energies[0]));
    for (std::size_t i = 0; i < energies.size(); ++i)
      if (energies[i] - energies[0] <= window) out.push_back(i);
    return out;
  }
};

namespace detail {

// Restarted Lanczos with full reorthogonalization for the lowest eigenpair of a real
// symmetric operator. `project` is applied after every operator application to keep
// the iteration inside an invariant subspace; `deflate` vectors are removed so
// previously converged states cannot reappear.
template <typename ApplyFn, typename ProjectFn>
inline std::pair<double, Eigen::VectorXd> lanczos_lowest(std::size_t dim, ApplyFn&& apply_op,
                                                         const std::vector<Eigen::VectorXd>& deflate,
                                                         ProjectFn&& project,
                                                         const EDOptions& opt) {
  using Vec = Eigen::VectorXd;
  const Eigen::Index d = static_cast<Eigen::Index>(dim);
  std::mt19937_64 gen(opt.seed);
  std::normal_distribution<double> dist(0.0, 1.0);

  auto cleanse = [&](Vec& v) {
    project(v);
    for (const Vec& u : deflate) v -= u.dot(v) * u;
  };
  auto fresh_start = [&]() {
    for (int attempt = 0; attempt < 16; ++attempt) {
      Vec v(d);
      for (Eigen::Index i = 0; i < d; ++i) v(i) = dist(gen);
      cleanse(v);
      const double n = v.norm();
      if (n > 1e-8) return Vec((v / n).eval());
    }
    throw std::runtime_error("lanczos: could not seed a vector in the requested subspace");
  };

  Vec v = fresh_start();
  for (int restart = 0; restart <= opt.max_restarts; ++restart) {
    std::vector<Vec> basis = {v};
    std::vector<double> alphas, betas;
    Eigen::VectorXd ritz_coeffs;
    bool exhausted = false;
    while (static_cast<int>(basis.size()) <= opt.max_krylov) {
      Vec w = apply_op(basis.back());
      project(w);
      const double alpha = basis.back().dot(w);
      alphas.push_back(alpha);
      // full reorthogonalization, twice for stability
      for (int pass = 0; pass < 2; ++pass) {
        for (const Vec& b : basis) w -= b.dot(w) * b;
        for (const Vec& u : deflate) w -= u.dot(w) * u;
      }
      const double beta = w.norm();

      // lowest Ritz pair of the current tridiagonal
      const int m = static_cast<int>(alphas.size());
      Eigen::MatrixXd tri = Eigen::MatrixXd::Zero(m, m);
      for (int i = 0; i < m; ++i) tri(i, i) = alphas[static_cast<std::size_t>(i)];
      for (int i = 0; i + 1 < m; ++i)
        tri(i, i + 1) = tri(i + 1, i) = betas[static_cast<std::size_t>(i)];
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(tri);
      ritz_coeffs = es.eigenvectors().col(0);
      const double resid_est = beta * std::abs(ritz_coeffs(m - 1));

      if (beta < 1e-12) {
        exhausted = true;  // Krylov space is invariant; the Ritz pair is exact
        break;
      }
      if (resid_est < 0.1 * opt.residual_tol && m >= 2) break;
      betas.push_back(beta);
      basis.push_back(w / beta);
    }
    const int m = static_cast<int>(alphas.size());
    Vec y = Vec::Zero(d);
    for (int i = 0; i < m; ++i) y += ritz_coeffs(i) * basis[static_cast<std::size_t>(i)];
    cleanse(y);
    const double yn = y.norm();
    if (yn < 1e-10) {
      v = fresh_start();  // the Ritz vector collapsed out of the subspace; reseed
      continue;
    }
    y /= yn;
    const Vec hy = apply_op(y);
    const double e = y.dot(hy);
    const double resid = (hy - e * y).norm();
    if (resid <= opt.residual_tol || exhausted) return {e, y};
    v = y;
  }
  throw std::runtime_error("lanczos: no convergence within the restart budget");
}

inline void no_projection(Eigen::VectorXd&) {}

}  // namespace detail

// Lowest k eigenpairs of the spin-basis Hamiltonian: dense full diagonalization for
// small chains, deflated Lanczos above the threshold. Every reported pair satisfies
// |H v - E v| <= residual_tol.
inline EDResult ground_state(const Spin1Chain& chain, EDOptions opt = {}) {
  const std::size_t dim = chain.dim();
  if (opt.k < 1 || static_cast<std::size_t>(opt.k) > dim)
    throw std::invalid_argument("ground_state: k out of range");
  EDResult out;
  if (dim <= opt.dense_threshold) {
    Eigen::MatrixXd h = dense_spin1_hamiltonian(chain.spec());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    for (int i = 0; i < opt.k; ++i) {
      Eigen::VectorXd v = es.eigenvectors().col(i);
      const double e = es.eigenvalues()(i);
      out.energies.push_back(e);
      out.vectors.push_back(v);
      out.residuals.push_back((chain.apply(v) - e * v).norm());
    }
  } else {
    auto apply_op = [&](const Eigen::VectorXd& v) { return chain.apply(v); };
    for (int i = 0; i < opt.k; ++i) {
      EDOptions o = opt;
      o.seed = opt.seed + static_cast<std::uint64_t>(i);
      auto [e, v] = detail::lanczos_lowest(dim, apply_op, out.vectors, detail::no_projection, o);
      out.energies.push_back(e);
      out.vectors.push_back(v);
      out.residuals.push_back((chain.apply(v) - e * v).norm());
    }
    // deflation returns pairs in discovery order; enforce ascending energies
    std::vector<std::size_t> order(out.energies.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return out.energies[a] < out.energies[b]; });
    EDResult sorted;
    for (std::size_t i : order) {
      sorted.energies.push_back(out.energies[i]);
      sorted.vectors.push_back(out.vectors[i]);
      sorted.residuals.push_back(out.residuals[i]);
    }
    out = sorted;
  }
  for (double r : out.residuals)
    if (!(r <= opt.residual_tol))
      throw std::runtime_error("ground_state: eigenpair residual " + std::to_string(r) +
                               " above tolerance");
  return out;
}

inline EDResult ground_state(const ModelSpec& spec, EDOptions opt = {}) {
  return ground_state(Spin1Chain(spec), opt);
}

// Squared overlap of a qubit-register state with the embedded exact ground space;
// degenerate partners within the tolerance window all contribute.
inline double fidelity(const StateVector& psi, const EDResult& ed, Encoding e, int L,
                       double deg_tol = 1e-10) {
  if (ed.energies.empty()) throw std::invalid_argument("fidelity: empty spectrum");
  double f = 0.0;
  for (std::size_t i : ed.ground_members(deg_tol)) {
    const StateVector gs = embed_spin_state(ed.vectors[i], L, e);
    f += std::norm(inner(gs, psi));
  }
  return f;
}

// Magnetization moments <m^2>, <m^4> with m = (sum_j Sz_j)/L, which is diagonal in
// the level basis. Degenerate ground members are averaged with equal weight.
inline void magnetization_moments(const std::vector<const Eigen::VectorXd*>& members, int L,
                                  double& m2, double& m4) {
  if (members.empty()) throw std::invalid_argument("magnetization_moments: no states");
  const std::size_t dim = static_cast<std::size_t>(members[0]->size());
  m2 = 0.0;
  m4 = 0.0;
  for (const Eigen::VectorXd* v : members) {
    double a2 = 0.0, a4 = 0.0;
    for (std::size_t idx = 0; idx < dim; ++idx) {
      std::size_t rest = idx;
      int msum = 0;
      for (int s = 0; s < L; ++s) {
        msum += 1 - static_cast<int>(rest % 3);
        rest /= 3;
      }
      const double m = static_cast<double>(msum) / L;
      const double w = (*v)(static_cast<Eigen::Index>(idx)) * (*v)(static_cast<Eigen::Index>(idx));
      a2 += w * m * m;
      a4 += w * m * m * m * m;
    }
    m2 += a2;
    m4 += a4;
  }
  m2 /= static_cast<double>(members.size());
  m4 /= static_cast<double>(members.size());
}

// Binder cumulant U = 1 - <m^4> / (3 <m^2>^2) of the ground state. A vanishing
// <m^2> leaves U undefined and is reported as an error.
inline double binder_cumulant(const ModelSpec& spec, EDOptions opt = {}) {
  opt.k = std::max(opt.k, 2);  // resolve a possible ground doublet
  const EDResult ed = ground_state(spec, opt);
  std::vector<const Eigen::VectorXd*> members;
  for (std::size_t i : ed.ground_members(opt.degeneracy_tol)) members.push_back(&ed.vectors[i]);
  double m2 = 0.0, m4 = 0.0;
  magnetization_moments(members, spec.L, m2, m4);
  if (m2 < 1e-14)
    throw std::runtime_error("binder_cumulant: <m^2> vanishes, cumulant undefined");
  return 1.0 - m4 / (3.0 * m2 * m2);
}

// Spatial inversion j -> L-1-j. On a ring this is the reflection fixing the
// wrap-around bond, so it commutes with twisted couplings as well.
inline Eigen::VectorXd apply_inversion(const Eigen::VectorXd& v, int L) {
  std::size_t dim = 1;
  std::vector<std::size_t> pw(static_cast<std::size_t>(L));
  for (int s = 0; s < L; ++s) {
    pw[static_cast<std::size_t>(s)] = dim;
    dim *= 3;
  }
  if (static_cast<std::size_t>(v.size()) != dim)
    throw std::invalid_argument("apply_inversion: dimension mismatch");
  Eigen::VectorXd out(v.size());
  for (std::size_t idx = 0; idx < dim; ++idx) {
    std::size_t rest = idx, tgt = 0;
    for (int s = 0; s < L; ++s) {
      tgt += (rest % 3) * pw[static_cast<std::size_t>(L - 1 - s)];
      rest /= 3;
    }
    out(static_cast<Eigen::Index>(tgt)) = v(static_cast<Eigen::Index>(idx));
  }
  return out;
}

// Spin reversal Sz -> -Sz, i.e. level digit d -> 2-d on every site.
inline Eigen::VectorXd apply_spin_reversal(const Eigen::VectorXd& v, int L) {
  std::size_t dim = 1;
  for (int s = 0; s < L; ++s) dim *= 3;
  if (static_cast<std::size_t>(v.size()) != dim)
    throw std::invalid_argument("apply_spin_reversal: dimension mismatch");
  Eigen::VectorXd out(v.size());
  for (std::size_t idx = 0; idx < dim; ++idx) {
    std::size_t rest = idx, tgt = 0, pw = 1;
    for (int s = 0; s < L; ++s) {
      tgt += (2 - rest % 3) * pw;
      rest /= 3;
      pw *= 3;
    }
    out(static_cast<Eigen::Index>(tgt)) = v(static_cast<Eigen::Index>(idx));
  }
  return out;
}

enum class SectorOp { inversion, reversal, combined };

inline const char* sector_op_name(SectorOp op) {
  switch (op) {
    case SectorOp::inversion: return "inversion";
    case SectorOp::reversal: return "reversal";
    default: return "combined";
  }
}

inline SectorOp parse_sector_op(const std::string& name) {
  if (name == "inversion") return SectorOp::inversion;
  if (name == "reversal") return SectorOp::reversal;
  if (name == "combined") return SectorOp::combined;
  throw std::invalid_argument("unknown sector operator \"" + name + "\"");
}

inline Eigen::VectorXd apply_symmetry(SectorOp op, const Eigen::VectorXd& v, int L) {
  switch (op) {
    case SectorOp::inversion: return apply_inversion(v, L);
    case SectorOp::reversal: return apply_spin_reversal(v, L);
    default: return apply_spin_reversal(apply_inversion(v, L), L);
  }
}

// Lowest eigenpair inside the sign = +1 or -1 eigenspace of a symmetry operator that
// commutes with the chain.
inline std::pair<double, Eigen::VectorXd> sector_lowest(const Spin1Chain& chain, SectorOp op,
                                                        int sign, EDOptions opt = {}) {
  if (sign != 1 && sign != -1) throw std::invalid_argument("sector_lowest: sign must be +-1");
  const int L = chain.spec().L;
  auto apply_op = [&](const Eigen::VectorXd& v) { return chain.apply(v); };
  auto project = [&](Eigen::VectorXd& v) {
    v = 0.5 * (v + static_cast<double>(sign) * apply_symmetry(op, v, L));
  };
  return detail::lanczos_lowest(chain.dim(), apply_op, {}, project, opt);
}

// Root of f on [lo, hi]: coarse scan for a sign change, then bisection to xtol.
inline double find_crossing(const std::function<double(double)>& f, double lo, double hi,
                            double xtol = 1e-4, int n_scan = 8) {
  if (!(lo < hi)) throw std::invalid_argument("find_crossing: empty interval");
  double a = lo, fa = f(a);
  double b = hi;
  bool bracketed = false;
  for (int i = 1; i <= n_scan; ++i) {
    const double x = lo + (hi - lo) * i / n_scan;
    const double fx = f(x);
    if (fa == 0.0 || fa * fx < 0.0) {
      b = x;
      bracketed = true;
      break;
    }
    a = x;
    fa = fx;
  }
  if (!bracketed)
    throw std::runtime_error("find_crossing: no sign change inside the interval");
  while (b - a > xtol) {
    const double mid = 0.5 * (a + b);
    const double fm = f(mid);
    if (fa * fm <= 0.0) {
      b = mid;
    } else {
      a = mid;
      fa = fm;
    }
  }
  return 0.5 * (a + b);
}

struct BinderCrossing {
  double crossing = 0.0;                // mean over adjacent size pairs
  std::vector<double> pair_crossings;   // one per adjacent pair of sizes
  std::vector<int> sizes;
};

// Crossing field of the Binder cumulants U_L(hx) for adjacent chain sizes. Distinct
// sizes are required; the cumulant difference of equal sizes vanishes identically.
inline BinderCrossing binder_crossing(const ModelSpec& base, const std::vector<int>& sizes,
                                      double hx_lo, double hx_hi, double xtol = 1e-4,
                                      EDOptions opt = {}) {
  if (sizes.size() < 2) throw std::invalid_argument("binder_crossing: need at least two sizes");
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i)
    if (sizes[i] == sizes[i + 1])
      throw std::invalid_argument("binder_crossing: adjacent sizes must differ");
  std::map<std::pair<int, long long>, double> cache;
  auto u_of = [&](int L, double hx) {
    const auto key = std::make_pair(L, static_cast<long long>(std::llround(hx * 1e12)));
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    ModelSpec spec = base;
    spec.L = L;
    spec.hx = hx;
    const double u = binder_cumulant(spec, opt);
    cache.emplace(key, u);
    return u;
  };
  BinderCrossing out;
  out.sizes = sizes;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    const int la = sizes[i], lb = sizes[i + 1];
    const double c = find_crossing([&](double h) { return u_of(la, h) - u_of(lb, h); }, hx_lo,
                                   hx_hi, xtol);
    out.pair_crossings.push_back(c);
  }
  double sum = 0.0;
  for (double c : out.pair_crossings) sum += c;
  out.crossing = sum / static_cast<double>(out.pair_crossings.size());
  return out;
}

struct SectorCrossing {
  double crossing = 0.0;
  SectorOp op = SectorOp::combined;
  // lowest sector energies at the interval ends, for orientation checks
  double e_plus_lo = 0.0, e_minus_lo = 0.0, e_plus_hi = 0.0, e_minus_hi = 0.0;
};

// Level crossing of the lowest states in the two symmetry sectors of a twisted ring
// as the single-ion anisotropy D varies.
inline SectorCrossing sector_crossing(const ModelSpec& base, SectorOp op, double d_lo,
                                      double d_hi, double xtol = 1e-4, EDOptions opt = {}) {
  auto gap = [&](double dval) {
    ModelSpec spec = base;
    spec.D = dval;
    Spin1Chain chain(spec);
    const double ep = sector_lowest(chain, op, +1, opt).first;
    const double em = sector_lowest(chain, op, -1, opt).first;
    return em - ep;
  };
  SectorCrossing out;
  out.op = op;
  {
    ModelSpec s = base;
    s.D = d_lo;
    Spin1Chain chain(s);
    out.e_plus_lo = sector_lowest(chain, op, +1, opt).first;
    out.e_minus_lo = sector_lowest(chain, op, -1, opt).first;
    s.D = d_hi;
    Spin1Chain chain2(s);
    out.e_plus_hi = sector_lowest(chain2, op, +1, opt).first;
    out.e_minus_hi = sector_lowest(chain2, op, -1, opt).first;
  }
  out.crossing = find_crossing(gap, d_lo, d_hi, xtol);
  return out;
}

}  // namespace spin1q
