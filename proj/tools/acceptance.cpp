// Acceptance gate: one pass/fail line per criterion. Criteria 1-10 gate the exit
// code; the long-running scaling criterion prints SKIP unless --extended is given.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include <spin1q/harness.hpp>

using namespace spin1q;

namespace {

int g_failures = 0;

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

void report(int num, const char* name, bool pass, const std::string& detail, double secs) {
  std::printf("[%s] criterion %2d: %-34s | %s (%.1fs)\n", pass ? "PASS" : "FAIL", num, name,
              detail.c_str(), secs);
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(const char* f, ...) {
  char buf[256];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof(buf), f, args);
  va_end(args);
  return buf;
}

// 1: the Gray image of Sx on one site
void criterion_gray_sx() {
  Timer t;
  const PauliSum sx = encode_site_operator(spin1_matrices()[0], Encoding::gray);
  const double c = std::sqrt(2.0) / 4.0;
  const PauliSum want =
      PauliSum::from_terms(2, {{cplx(c, 0.0), PauliString::from_label("IX")},
                               {cplx(c, 0.0), PauliString::from_label("XI")},
                               {cplx(c, 0.0), PauliString::from_label("ZX")},
                               {cplx(-c, 0.0), PauliString::from_label("XZ")}});
  const bool pass = approx_equal(sx, want, 1e-14);
  report(1, "gray Sx operator image", pass, fmt("%zu terms against (sqrt2/4)(IX+XI+ZX-XZ)",
                                                sx.size()),
         t.seconds());
}

// 2: encoded spectra restricted to the spin-1 subspace
void criterion_spectra() {
  Timer t;
  double worst = 0.0;
  for (int L : {2, 3})
    for (const ModelSpec& spec : {bc_model(L), xxz_model(L)})
      for (Encoding e : kAllEncodings) {
        const PauliSum hq = build_qubit_hamiltonian(spec, e);
        const auto dim = static_cast<Eigen::Index>(spec.spin_dim());
        std::vector<StateVector> emb;
        for (Eigen::Index k = 0; k < dim; ++k) {
          Eigen::VectorXd unit = Eigen::VectorXd::Zero(dim);
          unit(k) = 1.0;
          emb.push_back(embed_spin_state(unit, L, e));
        }
        Eigen::MatrixXcd m(dim, dim);
        for (Eigen::Index j = 0; j < dim; ++j) {
          const StateVector hv = apply_sum(hq, emb[static_cast<std::size_t>(j)]);
          for (Eigen::Index i = 0; i < dim; ++i)
            m(i, j) = inner(emb[static_cast<std::size_t>(i)], hv);
        }
        const Eigen::MatrixXcd herm = 0.5 * (m + m.adjoint());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> sq(herm);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ss(dense_spin1_hamiltonian(spec));
        worst = std::max(worst,
                         (sq.eigenvalues() - ss.eigenvalues()).cwiseAbs().maxCoeff());
      }
  report(2, "restricted spectra, L in {2,3}", worst < 1e-10,
         fmt("worst eigenvalue deviation %.2e", worst), t.seconds());
}

// 3: half the encoded Casimir equals the site projector, and it is idempotent
void criterion_projector() {
  Timer t;
  bool pass = true;
  for (Encoding e : kAllEncodings) {
    PauliSum sq = sum_multiply(spin_component(0, 0, e, 1), spin_component(0, 0, e, 1));
    for (int axis : {1, 2}) {
      const PauliSum s = spin_component(axis, 0, e, 1);
      sq = sum_add(sq, sum_multiply(s, s));
    }
    const PauliSum half = sum_scale(0.5, sq);
    const PauliSum proj = site_projector(0, e, 1);
    if (!approx_equal(half, proj, 1e-12)) pass = false;
    if (!approx_equal(sum_multiply(proj, proj), proj, 1e-12)) pass = false;
  }
  report(3, "projector identity + idempotence", pass, "all four encodings", t.seconds());
}

// 4: convergence statistics over the small transverse-field chains
void criterion_bc_convergence() {
  Timer t;
  int with_grad = 0, good = 0;
  double min_proj = 1.0;
  for (int L : {2, 3}) {
    SweepGrid grid;
    grid.model = bc_model(L);
    grid.pools = {PoolKind::maximal};
    grid.bases = {'z'};
    const SweepResult res = sweep(grid);
    for (const RunRecord& r : res.runs) {
      if (vanishing_initial(r)) continue;
      ++with_grad;
      if (recomputed_success(r)) {
        ++good;
        min_proj = std::min(min_proj, r.result.proj);
      }
    }
  }
  const double rate = with_grad > 0 ? static_cast<double>(good) / with_grad : 0.0;
  const bool pass = rate >= 0.70 && min_proj >= 0.999;
  report(4, "BC L in {2,3} maximal-pool sweep", pass,
         fmt("%d/%d converged (%.0f%%), min proj %.6f", good, with_grad, 100.0 * rate, min_proj),
         t.seconds());
}

// 5: the minimal pool starves every z-basis reference of the planar chain
void criterion_xxz_minimal_failure() {
  Timer t;
  SweepGrid grid;
  grid.model = xxz_model(4);
  grid.pools = {PoolKind::minimal};
  grid.bases = {'z'};
  const SweepResult res = sweep(grid);
  int successes = 0;
  for (const RunRecord& r : res.runs)
    if (recomputed_success(r)) ++successes;
  report(5, "XXZ L=4 minimal-pool failure mode", successes == 0,
         fmt("%d successes out of %zu runs", successes, res.runs.size()), t.seconds());
}

// 6: Binder-cumulant crossing of the transverse-field transition
void criterion_binder() {
  Timer t;
  const BinderCrossing res =
      binder_crossing(bc_model(4, Boundary::periodic), {4, 6, 8}, 1.2, 1.6, 1e-4);
  const double dev = std::abs(res.crossing - 1.405);
  report(6, "Binder crossing at hx = 1.405", dev <= 0.02,
         fmt("crossing %.5f, deviation %.5f", res.crossing, dev), t.seconds());
}

// 7: symmetry-sector level crossing of the twisted planar ring
void criterion_sector() {
  Timer t;
  const SectorCrossing res = sector_crossing(xxz_model(8, Boundary::twisted),
                                             SectorOp::inversion, 0.3, 0.5, 1e-4);
  const double dev = std::abs(res.crossing - 0.385);
  report(7, "sector crossing at D = 0.385", dev <= 0.01,
         fmt("crossing %.5f, deviation %.5f", res.crossing, dev), t.seconds());
}

// 8: the entangling-count ladder
void criterion_cnot() {
  Timer t;
  bool pass = true;
  const long want[] = {0, 2, 4, 6};
  const char* labels[] = {"YIII", "YZII", "YXZI", "YXZX"};
  for (int w = 1; w <= 4; ++w)
    if (cnot_count(PauliString::from_label(labels[w - 1])) != want[w - 1]) pass = false;
  const std::vector<AnsatzElement> mixed = {{PauliString::from_label("YIII"), 0.3},
                                            {PauliString::from_label("YZII"), -0.7},
                                            {PauliString::from_label("IYZI"), 12.0}};
  if (cnot_count(mixed) != 4) pass = false;
  report(8, "entangling counts 2(Np-1)", pass, "weights 1-4 plus a mixed ansatz", t.seconds());
}

// 9: gradients and candidate scores against finite differences and re-assembly
void criterion_gradients() {
  Timer t;
  std::mt19937_64 gen(0xacce97);
  std::uniform_real_distribution<double> coeff(-1.0, 1.0);
  std::uniform_real_distribution<double> angle(-1.2, 1.2);
  double worst_grad = 0.0, worst_score = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const int nq = 2 + rep % 3;
    PauliSum h = [&]() {
      std::vector<std::pair<cplx, PauliString>> raw;
      for (int k = 0; k < 4; ++k) {
        std::string label;
        for (int q = 0; q < nq; ++q) label += "IXYZ"[gen() % 4];
        raw.emplace_back(cplx(coeff(gen), 0.0), PauliString::from_label(label));
      }
      PauliSum s = PauliSum::from_terms(nq, std::move(raw));
      if (s.size() == 0) s = PauliSum::single(1.0, PauliString::single(nq, 0, 'Z'));
      return s;
    }();
    const auto pool = build_pool(PoolKind::maximal, nq);
    std::vector<AnsatzElement> els;
    const int n_el = 1 + static_cast<int>(gen() % 4);
    for (int k = 0; k < n_el; ++k) els.push_back({pool[gen() % pool.size()], angle(gen)});
    StateVector ref = StateVector::basis_state(std::string(static_cast<std::size_t>(nq), '0'));

    const Workspace ws = assemble(h, els, ref);
    const double fd_h = 1e-4;
    for (std::size_t i = 0; i < els.size(); ++i) {
      auto shifted = [&](double d) {
        auto e2 = els;
        e2[i].theta += d;
        return expectation(h, ansatz_state(e2, ref));
      };
      const double fd = -(shifted(fd_h) - shifted(-fd_h)) / (4.0 * fd_h);
      worst_grad = std::max(worst_grad, std::abs(ws.v(static_cast<Eigen::Index>(i)) - fd));
    }
    for (int k = 0; k < 4; ++k) {
      const PauliString cand = pool[gen() % pool.size()];
      const double fast = score_candidate(ws, cand, 1e-6);
      auto e2 = els;
      e2.push_back({cand, 0.0});
      const Workspace ws2 = assemble(h, e2, ref);
      const Eigen::VectorXd x = solve_eom(ws2.g, ws2.v, 1e-6);
      const double slow = mclachlan_l2(ws2.g, ws2.v, x, ws2.variance);
      worst_score = std::max(worst_score, std::abs(fast - slow));
    }
  }
  const bool pass = worst_grad < 1e-6 && worst_score < 1e-10;
  report(9, "gradient + score cross-checks", pass,
         fmt("worst gradient dev %.2e, worst score dev %.2e", worst_grad, worst_score),
         t.seconds());
}

// 10: an exact eigenstate reference leaves nothing to do
void criterion_stationarity() {
  Timer t;
  bool pass = true;
  const ModelSpec spec = bc_model(2);
  const EDResult ed = ground_state(spec, EDOptions{});
  for (Encoding e : {Encoding::standard, Encoding::unary}) {
    const PauliSum h = build_qubit_hamiltonian(spec, e);
    const StateVector ref = embed_spin_state(ed.vectors[0], spec.L, e);
    AvqiteEngine eng(h, ref, build_pool(PoolKind::maximal, h.n_qubits()), AvqiteConfig{});
    const RunResult res = eng.run();
    if (res.halted != HaltReason::vanishing_initial_gradient) pass = false;
    if (res.steps != 0 || !res.ansatz.empty() || res.n_cx_final != 0) pass = false;
  }
  report(10, "eigenstate reference stationarity", pass, "halts at step 0 with empty ansatz",
         t.seconds());
}

// 11 (non-gating, --extended): power-law scaling of the final entangling cost
void criterion_scaling(bool extended) {
  if (!extended) {
    std::printf("[SKIP] criterion 11: cost-scaling exponents        | pass --extended to run "
                "(long)\n");
    return;
  }
  Timer t;
  auto cell_fit = [](const std::vector<ScalingCellSeries>& series, Encoding e) {
    for (const ScalingCellSeries& s : series)
      if (s.key.encoding == e) return fit_scaling(s.points);
    throw std::runtime_error("scaling cell missing");
  };

  ScalingSettings bc_cfg;
  bc_cfg.sizes = {2, 3, 4, 5, 6};
  bc_cfg.pools = {PoolKind::maximal};
  bc_cfg.bases = {'z'};
  const auto bc_series = scaling_series(bc_model(2), bc_cfg);
  const ScalingFit bc_std = cell_fit(bc_series, Encoding::standard);
  const ScalingFit bc_gray = cell_fit(bc_series, Encoding::gray);
  const ScalingFit bc_mult = cell_fit(bc_series, Encoding::multiplet);

  ScalingSettings xxz_cfg;
  xxz_cfg.sizes = {2, 3, 4, 5};
  xxz_cfg.pools = {PoolKind::maximal};
  xxz_cfg.bases = {'x'};
  const auto xxz_series = scaling_series(xxz_model(2), xxz_cfg);
  const ScalingFit xxz_mult = cell_fit(xxz_series, Encoding::multiplet);

  const bool bc_band = bc_mult.exponent >= 2.3 && bc_mult.exponent <= 3.7;
  const bool xxz_band = xxz_mult.exponent >= 3.2 && xxz_mult.exponent <= 4.8;
  const bool order = bc_mult.prefactor_cubic <= bc_gray.prefactor_cubic &&
                     bc_gray.prefactor_cubic <= bc_std.prefactor_cubic;
  std::printf("[%s] criterion 11: cost-scaling exponents        | BC multiplet %.2f "
              "(band 2.3-3.7), XXZ multiplet %.2f (band 3.2-4.8), cubic prefactors "
              "m/g/s %.2f/%.2f/%.2f, ordering %s (%.1fs) [non-gating]\n",
              bc_band && xxz_band && order ? "PASS" : "FAIL", bc_mult.exponent,
              xxz_mult.exponent, bc_mult.prefactor_cubic, bc_gray.prefactor_cubic,
              bc_std.prefactor_cubic, order ? "ok" : "violated", t.seconds());
}

}  // namespace

int main(int argc, char** argv) {
  bool extended = false;
  for (int i = 1; i < argc; ++i)
    if (std::strcmp(argv[i], "--extended") == 0) extended = true;

  criterion_gray_sx();
  criterion_spectra();
  criterion_projector();
  criterion_bc_convergence();
  criterion_xxz_minimal_failure();
  criterion_binder();
  criterion_sector();
  criterion_cnot();
  criterion_gradients();
  criterion_stationarity();
  criterion_scaling(extended);

  if (g_failures > 0) {
    std::printf("%d gating criterion(s) failed\n", g_failures);
    return 1;
  }
  std::printf("all gating criteria passed\n");
  return 0;
}
