#pragma once

// Experiment orchestration: reference sweeps over the 3^L spin strings, success and
// leakage statistics, entangling-gate accounting, reference ranking, power-law fits,
// and file reports (CSV / JSON / plain text).

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "avqite.hpp"
#include "encoding.hpp"
#include "exactdiag.hpp"
#include "model.hpp"

namespace spin1q {

// ---------------------------------------------------------------------------
// reference enumeration

// All spin strings in {0,1,2}^L, lexicographic ("00", "01", "02", "10", ...).
inline std::vector<std::string> all_spin_strings(int L) {
  if (L < 1) throw std::invalid_argument("all_spin_strings: L must be at least 1");
  std::size_t total = 1;
  for (int i = 0; i < L; ++i) total *= 3;
  std::vector<std::string> out;
  out.reserve(total);
  std::string s(static_cast<std::size_t>(L), '0');
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t v = idx;
    for (int k = L - 1; k >= 0; --k) {
      s[static_cast<std::size_t>(k)] = static_cast<char>('0' + v % 3);
      v /= 3;
    }
    out.push_back(s);
  }
  return out;
}

// Carry a short reference pattern to a longer chain by cyclic repetition.
inline std::string extend_periodically(const std::string& spins, int L) {
  if (spins.empty()) throw std::invalid_argument("extend_periodically: empty pattern");
  if (L < 1) throw std::invalid_argument("extend_periodically: L must be at least 1");
  std::string out(static_cast<std::size_t>(L), '0');
  for (int k = 0; k < L; ++k) out[static_cast<std::size_t>(k)] = spins[k % spins.size()];
  return out;
}

// ---------------------------------------------------------------------------
// run configuration

struct ReferenceSpec {
  std::string spins;  // one digit 0/1/2 per site, site 0 first
  char basis = 'z';   // 'z' or 'x' product basis
};

struct RunConfig {
  ModelSpec model;
  Encoding encoding = Encoding::standard;
  PoolKind pool = PoolKind::maximal;
  ReferenceSpec reference;
  AvqiteConfig engine;
  bool keep_trajectory = true;  // false keeps only the first and last step records
};

namespace detail {

inline std::string fmt_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline HaltReason parse_halt_reason(const std::string& name) {
  for (HaltReason r : {HaltReason::gradient_converged, HaltReason::vanishing_initial_gradient,
                       HaltReason::stalled, HaltReason::max_steps, HaltReason::diverged})
    if (name == halt_reason_name(r)) return r;
  throw std::invalid_argument("unknown halt reason \"" + name + "\"");
}

}  // namespace detail

// Canonical one-line echo of every hyperparameter; its hash is the deterministic
// tie-breaker in rankings.
inline std::string config_signature(const RunConfig& c) {
  using detail::fmt_g17;
  std::ostringstream os;
  os << "L=" << c.model.L << ";J=" << fmt_g17(c.model.J) << ";delta=" << fmt_g17(c.model.delta)
     << ";D=" << fmt_g17(c.model.D) << ";hx=" << fmt_g17(c.model.hx)
     << ";boundary=" << boundary_name(c.model.boundary) << ";encoding=" << encoding_name(c.encoding)
     << ";pool=" << pool_name(c.pool) << ";spins=" << c.reference.spins
     << ";basis=" << c.reference.basis << ";dtau=" << fmt_g17(c.engine.dtau)
     << ";l2_threshold=" << fmt_g17(c.engine.l2_threshold)
     << ";grad_cutoff=" << fmt_g17(c.engine.grad_cutoff) << ";lambda=" << fmt_g17(c.engine.lambda)
     << ";max_steps=" << c.engine.max_steps << ";max_adds=" << c.engine.max_adds_per_step
     << ";min_improve=" << fmt_g17(c.engine.min_score_improvement);
  return os.str();
}

inline std::uint64_t config_hash(const RunConfig& c) {
  return detail::fnv1a(config_signature(c));
}

struct RunRecord {
  RunConfig config;
  RunResult result;
  double initial_grad = 0.0;  // max |V| at step 0 (pool gradient for an empty ansatz)
  std::uint64_t hash = 0;
};

// Success is always recomputed from the stored fidelity, never read from a cached flag.
inline bool recomputed_success(const RunRecord& r) { return r.result.fidelity >= 0.999; }

inline bool vanishing_initial(const RunRecord& r) {
  return r.result.halted == HaltReason::vanishing_initial_gradient;
}

// One full adaptive evolution: builds the qubit Hamiltonian, reference state, pool,
// projector monitor, and exact-diagonalization fidelity metric, then runs the engine.
// `ed_cache` skips the per-run diagonalization when the caller already solved the model.
inline RunRecord execute_run(const RunConfig& cfg, const EDResult* ed_cache = nullptr) {
  if (static_cast<int>(cfg.reference.spins.size()) != cfg.model.L)
    throw std::invalid_argument("execute_run: reference length does not match the chain");
  RunRecord rec;
  rec.config = cfg;
  rec.hash = config_hash(cfg);

  const PauliSum h = build_qubit_hamiltonian(cfg.model, cfg.encoding);
  const StateVector ref = reference_state(cfg.reference.spins, cfg.reference.basis, cfg.encoding);
  const auto pool = build_pool(cfg.pool, h.n_qubits());

  EDResult local;
  const EDResult* ed = ed_cache;
  if (ed == nullptr) {
    local = ground_state(cfg.model, EDOptions{});
    ed = &local;
  }
  const auto projs = all_site_projectors(cfg.encoding, cfg.model.L);

  AvqiteEngine eng(h, ref, pool, cfg.engine);
  eng.set_projector_monitor(
      [&projs](const StateVector& psi) { return projector_expectation(psi, projs); });
  const Encoding e = cfg.encoding;
  const int L = cfg.model.L;
  eng.set_fidelity_metric([ed, e, L](const StateVector& psi) { return fidelity(psi, *ed, e, L); });

  rec.result = eng.run();
  rec.initial_grad =
      rec.result.trajectory.empty() ? 0.0 : rec.result.trajectory.front().max_grad;
  if (!cfg.keep_trajectory && rec.result.trajectory.size() > 2) {
    const StepRecord first = rec.result.trajectory.front();
    const StepRecord last = rec.result.trajectory.back();
    rec.result.trajectory = {first, last};
  }
  return rec;
}

// ---------------------------------------------------------------------------
// sweeps

struct SweepGrid {
  ModelSpec model;
  std::vector<Encoding> encodings{Encoding::standard, Encoding::gray, Encoding::unary,
                                  Encoding::multiplet};
  std::vector<PoolKind> pools{PoolKind::minimal, PoolKind::maximal};
  std::vector<char> bases{'z', 'x'};
  AvqiteConfig engine;
  bool keep_trajectories = false;
  int workers = 0;  // 0 picks the hardware concurrency
};

struct CellKey {
  Encoding encoding = Encoding::standard;
  PoolKind pool = PoolKind::minimal;
  char basis = 'z';

  auto tie() const { return std::make_tuple(static_cast<int>(encoding), static_cast<int>(pool), basis); }
  friend bool operator<(const CellKey& a, const CellKey& b) { return a.tie() < b.tie(); }
  friend bool operator==(const CellKey& a, const CellKey& b) { return a.tie() == b.tie(); }

  std::string label() const {
    std::string s = encoding_name(encoding);
    s += '/';
    s += pool_name(pool);
    s += '/';
    s += basis;
    return s;
  }
};

// Linear-interpolation quantile between order statistics: for sorted x of size n,
// q(p) sits at rank p*(n-1) with fractional ranks interpolated linearly.
inline double linear_quantile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("linear_quantile: empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("linear_quantile: p outside [0,1]");
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double h = p * static_cast<double>(n - 1);
  const auto i = static_cast<std::size_t>(h);
  if (i + 1 >= n) return sorted[n - 1];
  const double f = h - static_cast<double>(i);
  return sorted[i] + f * (sorted[i + 1] - sorted[i]);
}

struct BoxStats {
  int count = 0;
  double q1 = 0.0, median = 0.0, q3 = 0.0;
  double whisker_lo = 0.0, whisker_hi = 0.0;  // furthest data inside 1.5 IQR fences
  std::vector<double> outliers;               // data beyond the whiskers

  bool operator==(const BoxStats&) const = default;

  static BoxStats from(std::vector<double> xs) {
    BoxStats b;
    b.count = static_cast<int>(xs.size());
    if (xs.empty()) return b;
    std::sort(xs.begin(), xs.end());
    b.q1 = linear_quantile(xs, 0.25);
    b.median = linear_quantile(xs, 0.5);
    b.q3 = linear_quantile(xs, 0.75);
    const double iqr = b.q3 - b.q1;
    const double lo_fence = b.q1 - 1.5 * iqr;
    const double hi_fence = b.q3 + 1.5 * iqr;
    b.whisker_lo = xs.back();
    b.whisker_hi = xs.front();
    for (double x : xs) {
      if (x >= lo_fence && x < b.whisker_lo) b.whisker_lo = x;
      if (x <= hi_fence && x > b.whisker_hi) b.whisker_hi = x;
    }
    for (double x : xs)
      if (x < b.whisker_lo || x > b.whisker_hi) b.outliers.push_back(x);
    return b;
  }
};

// Histogram of the final physical-subspace leakage 1 - <P> on fixed decade bins.
struct LeakageHistogram {
  std::vector<double> edges;   // ascending bin boundaries
  std::vector<int> counts;     // counts per [edges[i], edges[i+1]) bin
  int below = 0;               // leakage under edges.front(), including exact zeros
  int above = 0;               // leakage at or above edges.back()
  double threshold = 1e-3;     // success marker: <P> = 0.999

  bool operator==(const LeakageHistogram&) const = default;

  static LeakageHistogram from(const std::vector<double>& leakages) {
    LeakageHistogram h;
    for (int k = -16; k <= 0; ++k) h.edges.push_back(std::pow(10.0, k));
    h.counts.assign(h.edges.size() - 1, 0);
    for (double x : leakages) {
      if (!(x >= h.edges.front())) {
        ++h.below;
        continue;
      }
      if (x >= h.edges.back()) {
        ++h.above;
        continue;
      }
      auto it = std::upper_bound(h.edges.begin(), h.edges.end(), x);
      const auto bin = static_cast<std::size_t>(std::distance(h.edges.begin(), it)) - 1;
      ++h.counts[bin];
    }
    return h;
  }
};

struct ExclusionEntry {
  std::uint64_t hash = 0;
  std::string cell;    // "encoding/pool/basis"
  std::string spins;
  std::string reason;  // "vanishing_initial_gradient" or "fidelity_below_threshold"
  double fidelity = -1.0;  // -1 stands in for a non-finite value

  bool operator==(const ExclusionEntry&) const = default;
};

struct CellSummary {
  CellKey key;
  int total = 0;
  int included = 0;                     // successful runs entering the box statistics
  int excluded_low_fidelity = 0;
  int excluded_vanishing_gradient = 0;
  double success_rate = 0.0;            // included / (total - vanishing)
  BoxStats cnot_final;
  BoxStats cnot_total;
  BoxStats steps;
  LeakageHistogram leakage;             // over included runs

  bool operator==(const CellSummary&) const = default;
};

struct SweepSummary {
  ModelSpec model;
  int total = 0;
  int included = 0;
  int excluded_low_fidelity = 0;
  int excluded_vanishing_gradient = 0;
  double success_rate = 0.0;
  std::vector<CellSummary> cells;        // sorted by cell key
  std::vector<ExclusionEntry> exclusions;
  LeakageHistogram leakage;              // over all included runs

  bool operator==(const SweepSummary&) const = default;
};

inline CellKey cell_of(const RunRecord& r) {
  return CellKey{r.config.encoding, r.config.pool, r.config.reference.basis};
}

inline SweepSummary summarize(const std::vector<RunRecord>& runs, const ModelSpec& model) {
  SweepSummary s;
  s.model = model;
  struct Acc {
    std::vector<double> cx_final, cx_total, steps, leak;
    int total = 0, low_f = 0, vanish = 0;
  };
  std::map<CellKey, Acc> acc;
  std::vector<double> all_leak;
  for (const RunRecord& r : runs) {
    Acc& a = acc[cell_of(r)];
    ++a.total;
    ++s.total;
    if (vanishing_initial(r)) {
      ++a.vanish;
      ++s.excluded_vanishing_gradient;
      const double f = r.result.fidelity;
      s.exclusions.push_back({r.hash, cell_of(r).label(), r.config.reference.spins,
                              "vanishing_initial_gradient", std::isfinite(f) ? f : -1.0});
      continue;
    }
    if (!recomputed_success(r)) {
      ++a.low_f;
      ++s.excluded_low_fidelity;
      const double f = r.result.fidelity;
      s.exclusions.push_back({r.hash, cell_of(r).label(), r.config.reference.spins,
                              "fidelity_below_threshold", std::isfinite(f) ? f : -1.0});
      continue;
    }
    ++s.included;
    a.cx_final.push_back(static_cast<double>(r.result.n_cx_final));
    a.cx_total.push_back(static_cast<double>(r.result.n_cx_cumulative));
    a.steps.push_back(static_cast<double>(r.result.steps));
    const double leak = std::isfinite(r.result.proj) ? std::max(0.0, 1.0 - r.result.proj) : 1.0;
    a.leak.push_back(leak);
    all_leak.push_back(leak);
  }
  for (auto& [key, a] : acc) {
    CellSummary c;
    c.key = key;
    c.total = a.total;
    c.included = static_cast<int>(a.cx_final.size());
    c.excluded_low_fidelity = a.low_f;
    c.excluded_vanishing_gradient = a.vanish;
    const int denom = a.total - a.vanish;
    c.success_rate = denom > 0 ? static_cast<double>(c.included) / denom : 0.0;
    c.cnot_final = BoxStats::from(a.cx_final);
    c.cnot_total = BoxStats::from(a.cx_total);
    c.steps = BoxStats::from(a.steps);
    c.leakage = LeakageHistogram::from(a.leak);
    s.cells.push_back(std::move(c));
  }
  const int denom = s.total - s.excluded_vanishing_gradient;
  s.success_rate = denom > 0 ? static_cast<double>(s.included) / denom : 0.0;
  s.leakage = LeakageHistogram::from(all_leak);
  return s;
}

struct SweepResult {
  std::vector<RunRecord> runs;  // deterministic grid order, independent of worker count
  SweepSummary summary;
};

// Every spin string in {0,1,2}^L for every (encoding, pool, basis) cell. Independent
// runs are dispatched to a small worker set and gathered back in grid order; a run
// that throws is recorded as diverged rather than aborting the sweep.
inline SweepResult sweep(const SweepGrid& grid) {
  if (grid.encodings.empty() || grid.pools.empty() || grid.bases.empty())
    throw std::invalid_argument("sweep: empty grid axis");
  for (char b : grid.bases)
    if (b != 'z' && b != 'x') throw std::invalid_argument("sweep: basis must be 'z' or 'x'");
  grid.engine.validate();

  const auto refs = all_spin_strings(grid.model.L);
  const EDResult ed = ground_state(grid.model, EDOptions{});

  std::vector<RunConfig> jobs;
  for (Encoding e : grid.encodings)
    for (PoolKind p : grid.pools)
      for (char b : grid.bases)
        for (const std::string& r : refs) {
          RunConfig c;
          c.model = grid.model;
          c.encoding = e;
          c.pool = p;
          c.reference = {r, b};
          c.engine = grid.engine;
          c.keep_trajectory = grid.keep_trajectories;
          jobs.push_back(std::move(c));
        }

  std::vector<RunRecord> out(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      try {
        out[i] = execute_run(jobs[i], &ed);
      } catch (const std::exception&) {
        RunRecord rec;
        rec.config = jobs[i];
        rec.hash = config_hash(jobs[i]);
        rec.result.halted = HaltReason::diverged;
        rec.result.fidelity = 0.0;
        rec.result.success = false;
        out[i] = rec;
      }
    }
  };
  int nw = grid.workers > 0 ? grid.workers : static_cast<int>(std::thread::hardware_concurrency());
  nw = std::max(1, std::min<int>(nw, static_cast<int>(jobs.size())));
  if (nw == 1) {
    worker();
  } else {
    std::vector<std::thread> ts;
    ts.reserve(static_cast<std::size_t>(nw));
    for (int i = 0; i < nw; ++i) ts.emplace_back(worker);
    for (auto& t : ts) t.join();
  }

  SweepResult res;
  res.summary = summarize(out, grid.model);
  res.runs = std::move(out);
  return res;
}

// ---------------------------------------------------------------------------
// ranking

// Ordering keys, most to least important: final entangling count, cumulative
// entangling count, steps to reach the gradient threshold (runs that never reached it
// sort last on this key), pool (maximal first), then the config hash so the order is
// total. Only successful runs are ranked; returns indices into `runs`.
inline std::vector<std::size_t> rank_references(const std::vector<RunRecord>& runs) {
  if (runs.empty()) throw std::invalid_argument("rank_references: empty result set");
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < runs.size(); ++i)
    if (recomputed_success(runs[i])) idx.push_back(i);
  auto key = [&](std::size_t i) {
    const RunRecord& r = runs[i];
    const long steps_to_threshold = r.result.halted == HaltReason::gradient_converged
                                        ? static_cast<long>(r.result.steps)
                                        : std::numeric_limits<long>::max();
    const int pool_rank = r.config.pool == PoolKind::maximal ? 0 : 1;
    return std::make_tuple(r.result.n_cx_final, r.result.n_cx_cumulative, steps_to_threshold,
                           pool_rank, r.hash);
  };
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
  return idx;
}

// ---------------------------------------------------------------------------
// scaling fits

struct ScalingPoint {
  int L = 0;
  double n_cx = 0.0;

  bool operator==(const ScalingPoint&) const = default;
};

struct ScalingFit {
  double exponent = 0.0;   // free power-law fit n_cx = a * L^p
  double prefactor = 0.0;
  double residual = 0.0;   // rms residual of log n_cx
  double prefactor_cubic = 0.0;    // best a at fixed p = 3
  double prefactor_quartic = 0.0;  // best a at fixed p = 4

  bool operator==(const ScalingFit&) const = default;
};

inline ScalingFit fit_scaling(const std::vector<ScalingPoint>& pts) {
  if (pts.size() < 3) throw std::invalid_argument("fit_scaling: need at least three sizes");
  std::vector<double> x, y;
  for (const ScalingPoint& p : pts) {
    if (p.L < 1) throw std::invalid_argument("fit_scaling: sizes must be positive");
    if (!(p.n_cx > 0)) throw std::invalid_argument("fit_scaling: counts must be positive");
    x.push_back(std::log(static_cast<double>(p.L)));
    y.push_back(std::log(p.n_cx));
  }
  const auto n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double denom = n * sxx - sx * sx;
  if (std::abs(denom) < 1e-12)
    throw std::invalid_argument("fit_scaling: sizes must not all coincide");
  ScalingFit f;
  f.exponent = (n * sxy - sx * sy) / denom;
  const double intercept = (sy - f.exponent * sx) / n;
  f.prefactor = std::exp(intercept);
  double ss = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (intercept + f.exponent * x[i]);
    ss += r * r;
  }
  f.residual = std::sqrt(ss / n);
  auto fixed_prefactor = [&](double p) {
    double m = 0;
    for (std::size_t i = 0; i < x.size(); ++i) m += y[i] - p * x[i];
    return std::exp(m / n);
  };
  f.prefactor_cubic = fixed_prefactor(3.0);
  f.prefactor_quartic = fixed_prefactor(4.0);
  return f;
}

// ---------------------------------------------------------------------------
// scaling protocol: rank at the smallest size, carry the best references up

struct ScalingSettings {
  std::vector<int> sizes;  // ascending; the first size hosts the full ranking sweep
  int top_k = 16;
  // unary is left out by default: it is strictly the most expensive encoding
  std::vector<Encoding> encodings{Encoding::standard, Encoding::gray, Encoding::multiplet};
  std::vector<PoolKind> pools{PoolKind::minimal, PoolKind::maximal};
  std::vector<char> bases{'z', 'x'};
  AvqiteConfig engine;
  int workers = 0;
};

struct ScalingCellSeries {
  CellKey key;
  std::vector<std::string> carried;  // top-k reference patterns at the smallest size
  std::vector<ScalingPoint> points;  // mean final count over surviving carried runs
  std::vector<int> survivors;        // successful carried runs per size
};

// Mirrors the cost-scaling protocol: sweep and rank every reference at the smallest
// size, keep the best `top_k` per (encoding, pool, basis) cell, extend those patterns
// periodically to each larger size, and average the final entangling count over the
// runs that stay successful.
inline std::vector<ScalingCellSeries> scaling_series(const ModelSpec& base,
                                                     const ScalingSettings& cfg) {
  if (cfg.sizes.size() < 2) throw std::invalid_argument("scaling_series: need at least two sizes");
  for (std::size_t i = 0; i + 1 < cfg.sizes.size(); ++i)
    if (cfg.sizes[i] >= cfg.sizes[i + 1])
      throw std::invalid_argument("scaling_series: sizes must be strictly increasing");
  if (cfg.top_k < 1) throw std::invalid_argument("scaling_series: top_k must be positive");

  SweepGrid grid;
  grid.model = base;
  grid.model.L = cfg.sizes.front();
  grid.encodings = cfg.encodings;
  grid.pools = cfg.pools;
  grid.bases = cfg.bases;
  grid.engine = cfg.engine;
  grid.workers = cfg.workers;
  const SweepResult first = sweep(grid);

  std::map<CellKey, ScalingCellSeries> series;
  for (Encoding e : cfg.encodings)
    for (PoolKind p : cfg.pools)
      for (char b : cfg.bases) {
        const CellKey key{e, p, b};
        std::vector<RunRecord> cell_runs;
        for (const RunRecord& r : first.runs)
          if (cell_of(r) == key) cell_runs.push_back(r);
        ScalingCellSeries ser;
        ser.key = key;
        if (!cell_runs.empty()) {
          std::vector<std::size_t> order = rank_references(cell_runs);
          const auto take = std::min<std::size_t>(order.size(), static_cast<std::size_t>(cfg.top_k));
          double sum = 0;
          int n_ok = 0;
          for (std::size_t i = 0; i < take; ++i) {
            const RunRecord& r = cell_runs[order[i]];
            ser.carried.push_back(r.config.reference.spins);
            sum += static_cast<double>(r.result.n_cx_final);
            ++n_ok;
          }
          if (n_ok > 0) {
            ser.points.push_back({cfg.sizes.front(), sum / n_ok});
            ser.survivors.push_back(n_ok);
          }
        }
        series.emplace(key, std::move(ser));
      }

  for (std::size_t si = 1; si < cfg.sizes.size(); ++si) {
    const int L = cfg.sizes[si];
    ModelSpec model = base;
    model.L = L;
    const EDResult ed = ground_state(model, EDOptions{});
    std::vector<RunConfig> jobs;
    std::vector<CellKey> job_cell;
    for (auto& [key, ser] : series)
      for (const std::string& pattern : ser.carried) {
        RunConfig c;
        c.model = model;
        c.encoding = key.encoding;
        c.pool = key.pool;
        c.reference = {extend_periodically(pattern, L), key.basis};
        c.engine = cfg.engine;
        c.keep_trajectory = false;
        jobs.push_back(std::move(c));
        job_cell.push_back(key);
      }
    std::vector<RunRecord> out(jobs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= jobs.size()) return;
        try {
          out[i] = execute_run(jobs[i], &ed);
        } catch (const std::exception&) {
          RunRecord rec;
          rec.config = jobs[i];
          rec.hash = config_hash(jobs[i]);
          rec.result.halted = HaltReason::diverged;
          rec.result.fidelity = 0.0;
          out[i] = rec;
        }
      }
    };
    int nw = cfg.workers > 0 ? cfg.workers : static_cast<int>(std::thread::hardware_concurrency());
    nw = std::max(1, std::min<int>(nw, static_cast<int>(jobs.size())));
    if (nw <= 1) {
      worker();
    } else {
      std::vector<std::thread> ts;
      for (int i = 0; i < nw; ++i) ts.emplace_back(worker);
      for (auto& t : ts) t.join();
    }
    std::map<CellKey, std::pair<double, int>> acc;
    for (std::size_t i = 0; i < out.size(); ++i)
      if (recomputed_success(out[i])) {
        auto& [sum, n] = acc[job_cell[i]];
        sum += static_cast<double>(out[i].result.n_cx_final);
        ++n;
      }
    for (auto& [key, ser] : series) {
      auto it = acc.find(key);
      if (it != acc.end() && it->second.second > 0) {
        ser.points.push_back({L, it->second.first / it->second.second});
        ser.survivors.push_back(it->second.second);
      }
    }
  }

  std::vector<ScalingCellSeries> out;
  for (auto& [key, ser] : series) out.push_back(std::move(ser));
  return out;
}

// ---------------------------------------------------------------------------
// JSON serialization (summaries round-trip exactly)

inline void to_json(nlohmann::json& j, const BoxStats& b) {
  j = {{"count", b.count},        {"q1", b.q1},
       {"median", b.median},      {"q3", b.q3},
       {"whisker_lo", b.whisker_lo}, {"whisker_hi", b.whisker_hi},
       {"outliers", b.outliers}};
}

inline void from_json(const nlohmann::json& j, BoxStats& b) {
  j.at("count").get_to(b.count);
  j.at("q1").get_to(b.q1);
  j.at("median").get_to(b.median);
  j.at("q3").get_to(b.q3);
  j.at("whisker_lo").get_to(b.whisker_lo);
  j.at("whisker_hi").get_to(b.whisker_hi);
  j.at("outliers").get_to(b.outliers);
}

inline void to_json(nlohmann::json& j, const LeakageHistogram& h) {
  j = {{"edges", h.edges}, {"counts", h.counts},       {"below", h.below},
       {"above", h.above}, {"threshold", h.threshold}};
}

inline void from_json(const nlohmann::json& j, LeakageHistogram& h) {
  j.at("edges").get_to(h.edges);
  j.at("counts").get_to(h.counts);
  j.at("below").get_to(h.below);
  j.at("above").get_to(h.above);
  j.at("threshold").get_to(h.threshold);
}

inline void to_json(nlohmann::json& j, const ExclusionEntry& e) {
  j = {{"hash", e.hash},     {"cell", e.cell},         {"spins", e.spins},
       {"reason", e.reason}, {"fidelity", e.fidelity}};
}

inline void from_json(const nlohmann::json& j, ExclusionEntry& e) {
  j.at("hash").get_to(e.hash);
  j.at("cell").get_to(e.cell);
  j.at("spins").get_to(e.spins);
  j.at("reason").get_to(e.reason);
  j.at("fidelity").get_to(e.fidelity);
}

inline void to_json(nlohmann::json& j, const CellKey& k) {
  j = {{"encoding", encoding_name(k.encoding)},
       {"pool", pool_name(k.pool)},
       {"basis", std::string(1, k.basis)}};
}

inline void from_json(const nlohmann::json& j, CellKey& k) {
  k.encoding = parse_encoding(j.at("encoding").get<std::string>());
  k.pool = parse_pool(j.at("pool").get<std::string>());
  const std::string b = j.at("basis").get<std::string>();
  if (b.size() != 1) throw std::invalid_argument("cell basis must be one character");
  k.basis = b[0];
}

inline void to_json(nlohmann::json& j, const CellSummary& c) {
  j = {{"key", c.key},
       {"total", c.total},
       {"included", c.included},
       {"excluded_low_fidelity", c.excluded_low_fidelity},
       {"excluded_vanishing_gradient", c.excluded_vanishing_gradient},
       {"success_rate", c.success_rate},
       {"cnot_final", c.cnot_final},
       {"cnot_total", c.cnot_total},
       {"steps", c.steps},
       {"leakage", c.leakage}};
}

inline void from_json(const nlohmann::json& j, CellSummary& c) {
  j.at("key").get_to(c.key);
  j.at("total").get_to(c.total);
  j.at("included").get_to(c.included);
  j.at("excluded_low_fidelity").get_to(c.excluded_low_fidelity);
  j.at("excluded_vanishing_gradient").get_to(c.excluded_vanishing_gradient);
  j.at("success_rate").get_to(c.success_rate);
  j.at("cnot_final").get_to(c.cnot_final);
  j.at("cnot_total").get_to(c.cnot_total);
  j.at("steps").get_to(c.steps);
  j.at("leakage").get_to(c.leakage);
}

inline void to_json(nlohmann::json& j, const ModelSpec& m) {
  j = {{"L", m.L},   {"J", m.J},   {"delta", m.delta},
       {"D", m.D},   {"hx", m.hx}, {"boundary", boundary_name(m.boundary)}};
}

// Missing fields keep their defaults so hand-written config files stay short.
inline void from_json(const nlohmann::json& j, ModelSpec& m) {
  m.L = j.value("L", m.L);
  m.J = j.value("J", m.J);
  m.delta = j.value("delta", m.delta);
  m.D = j.value("D", m.D);
  m.hx = j.value("hx", m.hx);
  if (j.contains("boundary")) m.boundary = parse_boundary(j.at("boundary").get<std::string>());
}

inline void to_json(nlohmann::json& j, const AvqiteConfig& c) {
  j = {{"dtau", c.dtau},
       {"l2_threshold", c.l2_threshold},
       {"grad_cutoff", c.grad_cutoff},
       {"lambda", c.lambda},
       {"max_steps", c.max_steps},
       {"max_adds_per_step", c.max_adds_per_step},
       {"min_score_improvement", c.min_score_improvement}};
}

inline void from_json(const nlohmann::json& j, AvqiteConfig& c) {
  c.dtau = j.value("dtau", c.dtau);
  c.l2_threshold = j.value("l2_threshold", c.l2_threshold);
  c.grad_cutoff = j.value("grad_cutoff", c.grad_cutoff);
  c.lambda = j.value("lambda", c.lambda);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.max_adds_per_step = j.value("max_adds_per_step", c.max_adds_per_step);
  c.min_score_improvement = j.value("min_score_improvement", c.min_score_improvement);
}

inline void to_json(nlohmann::json& j, const SweepSummary& s) {
  j = {{"model", s.model},
       {"total", s.total},
       {"included", s.included},
       {"excluded_low_fidelity", s.excluded_low_fidelity},
       {"excluded_vanishing_gradient", s.excluded_vanishing_gradient},
       {"success_rate", s.success_rate},
       {"cells", s.cells},
       {"exclusions", s.exclusions},
       {"leakage", s.leakage},
       {"conventions",
        {{"quantile", "linear interpolation between order statistics at rank p*(n-1)"},
         {"whiskers", "furthest data points inside 1.5*IQR fences"},
         {"success", "fidelity >= 0.999, recomputed from stored fidelity"},
         {"success_rate", "included / (total - vanishing-gradient exclusions)"},
         {"pool_rank_order", "maximal before minimal"}}}};
}

inline void from_json(const nlohmann::json& j, SweepSummary& s) {
  j.at("model").get_to(s.model);
  j.at("total").get_to(s.total);
  j.at("included").get_to(s.included);
  j.at("excluded_low_fidelity").get_to(s.excluded_low_fidelity);
  j.at("excluded_vanishing_gradient").get_to(s.excluded_vanishing_gradient);
  j.at("success_rate").get_to(s.success_rate);
  j.at("cells").get_to(s.cells);
  j.at("exclusions").get_to(s.exclusions);
  j.at("leakage").get_to(s.leakage);
}

inline void to_json(nlohmann::json& j, const ScalingFit& f) {
  j = {{"exponent", f.exponent},
       {"prefactor", f.prefactor},
       {"residual", f.residual},
       {"prefactor_cubic", f.prefactor_cubic},
       {"prefactor_quartic", f.prefactor_quartic}};
}

// ---------------------------------------------------------------------------
// reports

namespace detail {

inline const char* runs_csv_header() {
  return "hash,L,J,delta,D,hx,boundary,encoding,pool,basis,spins,dtau,l2_threshold,"
         "grad_cutoff,lambda,max_steps,max_adds_per_step,min_score_improvement,steps,halted,"
         "energy,fidelity,proj,success,initial_grad,initial_variance,n_cx_final,n_cx_cumulative";
}

inline const char* trajectories_csv_header() {
  return "hash,step,tau,energy,l2,n_theta,n_cx,proj,max_grad";
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace detail

inline void write_runs_csv(const std::string& path, const std::vector<RunRecord>& runs) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << detail::runs_csv_header() << '\n';
  for (const RunRecord& r : runs) {
    const RunConfig& c = r.config;
    const RunResult& res = r.result;
    f << r.hash << ',' << c.model.L << ',' << detail::fmt_g17(c.model.J) << ','
      << detail::fmt_g17(c.model.delta) << ',' << detail::fmt_g17(c.model.D) << ','
      << detail::fmt_g17(c.model.hx) << ',' << boundary_name(c.model.boundary) << ','
      << encoding_name(c.encoding) << ',' << pool_name(c.pool) << ',' << c.reference.basis << ','
      << c.reference.spins << ',' << detail::fmt_g17(c.engine.dtau) << ','
      << detail::fmt_g17(c.engine.l2_threshold) << ',' << detail::fmt_g17(c.engine.grad_cutoff)
      << ',' << detail::fmt_g17(c.engine.lambda) << ',' << c.engine.max_steps << ','
      << c.engine.max_adds_per_step << ',' << detail::fmt_g17(c.engine.min_score_improvement)
      << ',' << res.steps << ',' << halt_reason_name(res.halted) << ','
      << detail::fmt_g17(res.energy) << ',' << detail::fmt_g17(res.fidelity) << ','
      << detail::fmt_g17(res.proj) << ',' << (recomputed_success(r) ? 1 : 0) << ','
      << detail::fmt_g17(r.initial_grad) << ',' << detail::fmt_g17(res.initial_variance) << ','
      << res.n_cx_final << ',' << res.n_cx_cumulative << '\n';
  }
}

inline std::vector<RunRecord> read_runs_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error(path + ": missing header");
  if (line != detail::runs_csv_header())
    throw std::runtime_error(path + ": unexpected header");
  std::vector<RunRecord> out;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto v = detail::split_csv_line(line);
    if (v.size() != 28) throw std::runtime_error(path + ": malformed row");
    RunRecord r;
    r.hash = std::stoull(v[0]);
    r.config.model.L = std::stoi(v[1]);
    r.config.model.J = std::stod(v[2]);
    r.config.model.delta = std::stod(v[3]);
    r.config.model.D = std::stod(v[4]);
    r.config.model.hx = std::stod(v[5]);
    r.config.model.boundary = parse_boundary(v[6]);
    r.config.encoding = parse_encoding(v[7]);
    r.config.pool = parse_pool(v[8]);
    r.config.reference.basis = v[9].at(0);
    r.config.reference.spins = v[10];
    r.config.engine.dtau = std::stod(v[11]);
    r.config.engine.l2_threshold = std::stod(v[12]);
    r.config.engine.grad_cutoff = std::stod(v[13]);
    r.config.engine.lambda = std::stod(v[14]);
    r.config.engine.max_steps = std::stoi(v[15]);
    r.config.engine.max_adds_per_step = std::stoi(v[16]);
    r.config.engine.min_score_improvement = std::stod(v[17]);
    r.result.steps = std::stoi(v[18]);
    r.result.halted = detail::parse_halt_reason(v[19]);
    r.result.energy = std::stod(v[20]);
    r.result.fidelity = std::stod(v[21]);
    r.result.proj = std::stod(v[22]);
    r.result.success = std::stoi(v[23]) != 0;
    r.initial_grad = std::stod(v[24]);
    r.result.initial_variance = std::stod(v[25]);
    r.result.n_cx_final = std::stol(v[26]);
    r.result.n_cx_cumulative = std::stol(v[27]);
    out.push_back(std::move(r));
  }
  return out;
}

inline void write_trajectories_csv(const std::string& path, const std::vector<RunRecord>& runs) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << detail::trajectories_csv_header() << '\n';
  for (const RunRecord& r : runs)
    for (std::size_t k = 0; k < r.result.trajectory.size(); ++k) {
      const StepRecord& s = r.result.trajectory[k];
      f << r.hash << ',' << k << ',' << detail::fmt_g17(s.tau) << ','
        << detail::fmt_g17(s.energy) << ',' << detail::fmt_g17(s.l2) << ',' << s.n_theta << ','
        << s.n_cx << ',' << detail::fmt_g17(s.proj) << ',' << detail::fmt_g17(s.max_grad) << '\n';
    }
}

inline void write_summary_json(const std::string& path, const SweepSummary& summary) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << nlohmann::json(summary).dump(2) << '\n';
}

inline SweepSummary read_summary_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  f >> j;
  return j.get<SweepSummary>();
}

inline void write_summary_table(const std::string& path, const SweepSummary& s) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << "cell                      total  incl  lowF  vanish  success%  cx_med  cx_q1   cx_q3\n";
  char buf[160];
  for (const CellSummary& c : s.cells) {
    std::snprintf(buf, sizeof(buf), "%-25s %5d %5d %5d %7d %9.1f %7.1f %7.1f %7.1f\n",
                  c.key.label().c_str(), c.total, c.included, c.excluded_low_fidelity,
                  c.excluded_vanishing_gradient, 100.0 * c.success_rate, c.cnot_final.median,
                  c.cnot_final.q1, c.cnot_final.q3);
    f << buf;
  }
  std::snprintf(buf, sizeof(buf), "%-25s %5d %5d %5d %7d %9.1f\n", "overall", s.total, s.included,
                s.excluded_low_fidelity, s.excluded_vanishing_gradient, 100.0 * s.success_rate);
  f << buf;
}

struct ReportPaths {
  std::string runs_csv;
  std::string summary_json;
  std::string summary_txt;
  std::string trajectories_csv;  // empty skips the per-step file
};

inline void write_report(const ReportPaths& paths, const std::vector<RunRecord>& runs,
                         const SweepSummary& summary) {
  if (!paths.runs_csv.empty()) write_runs_csv(paths.runs_csv, runs);
  if (!paths.summary_json.empty()) write_summary_json(paths.summary_json, summary);
  if (!paths.summary_txt.empty()) write_summary_table(paths.summary_txt, summary);
  if (!paths.trajectories_csv.empty()) write_trajectories_csv(paths.trajectories_csv, runs);
}

}  // namespace spin1q
