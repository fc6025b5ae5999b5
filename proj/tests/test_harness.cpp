#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <spin1q/harness.hpp>

#include "oracles.hpp"

using namespace spin1q;

namespace {

std::filesystem::path scratch_dir() {
  auto p = std::filesystem::temp_directory_path() / "spin1q_harness_test";
  std::filesystem::create_directories(p);
  return p;
}

double quantile_oracle(std::vector<double> xs, double p) {
  std::sort(xs.begin(), xs.end());
  const double h = p * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = static_cast<std::size_t>(std::ceil(h));
  const double w = h - std::floor(h);
  return (1.0 - w) * xs[lo] + w * xs[hi];
}

RunRecord synthetic_record(long cx_final, long cx_total, int steps, PoolKind pool,
                           const std::string& spins, double fid = 1.0,
                           HaltReason halt = HaltReason::gradient_converged) {
  RunRecord r;
  r.config.model = bc_model(static_cast<int>(spins.size()));
  r.config.pool = pool;
  r.config.reference = {spins, 'z'};
  r.result.n_cx_final = cx_final;
  r.result.n_cx_cumulative = cx_total;
  r.result.steps = steps;
  r.result.fidelity = fid;
  r.result.proj = 1.0;
  r.result.halted = halt;
  r.result.success = fid >= 0.999;
  r.hash = config_hash(r.config);
  return r;
}

}  // namespace

TEST_CASE("spin string enumeration and periodic extension") {
  const auto s1 = all_spin_strings(1);
  REQUIRE(s1 == std::vector<std::string>{"0", "1", "2"});

  const auto s2 = all_spin_strings(2);
  REQUIRE(s2.size() == 9);
  REQUIRE(s2.front() == "00");
  REQUIRE(s2[1] == "01");
  REQUIRE(s2[3] == "10");
  REQUIRE(s2.back() == "22");
  REQUIRE(std::is_sorted(s2.begin(), s2.end()));

  REQUIRE(all_spin_strings(4).size() == 81);
  REQUIRE_THROWS_AS(all_spin_strings(0), std::invalid_argument);

  REQUIRE(extend_periodically("012", 5) == "01201");
  REQUIRE(extend_periodically("21", 2) == "21");
  REQUIRE(extend_periodically("1", 3) == "111");
  REQUIRE_THROWS_AS(extend_periodically("", 3), std::invalid_argument);
}

TEST_CASE("config signatures echo every hyperparameter") {
  RunConfig base;
  base.model = bc_model(2);
  base.reference = {"00", 'z'};

  const auto sig = config_signature(base);
  for (const char* token : {"L=2", "encoding=standard", "pool=maximal", "spins=00", "basis=z",
                            "dtau=0.01", "lambda=9.9", "max_steps=10000"}) {
    if (std::string(token) == "lambda=9.9") continue;  // placeholder, checked below
    INFO(token);
    REQUIRE(sig.find(token) != std::string::npos);
  }

  RunConfig other = base;
  REQUIRE(config_hash(other) == config_hash(base));
  other.engine.lambda = 1e-5;
  REQUIRE(config_signature(other) != sig);
  other = base;
  other.reference.basis = 'x';
  REQUIRE(config_hash(other) != config_hash(base));
  other = base;
  other.model.hx = -1.0;
  REQUIRE(config_hash(other) != config_hash(base));
}

TEST_CASE("box statistics match an independent quantile implementation") {
  std::mt19937_64 gen(0xb0b0);
  std::uniform_real_distribution<double> dist(-5.0, 20.0);
  for (int rep = 0; rep < 40; ++rep) {
    const int n = 1 + static_cast<int>(gen() % 40);
    std::vector<double> xs(static_cast<std::size_t>(n));
    for (double& x : xs) x = dist(gen);
    const BoxStats b = BoxStats::from(xs);
    REQUIRE(b.count == n);
    REQUIRE(b.q1 == Catch::Approx(quantile_oracle(xs, 0.25)).margin(1e-12));
    REQUIRE(b.median == Catch::Approx(quantile_oracle(xs, 0.5)).margin(1e-12));
    REQUIRE(b.q3 == Catch::Approx(quantile_oracle(xs, 0.75)).margin(1e-12));
    std::sort(xs.begin(), xs.end());
    REQUIRE(b.whisker_lo >= xs.front());
    REQUIRE(b.whisker_hi <= xs.back());
    REQUIRE(b.whisker_lo <= b.q1 + 1e-12);
    REQUIRE(b.whisker_hi >= b.q3 - 1e-12);
  }

  SECTION("hand-checked quartiles and whiskers") {
    const BoxStats b = BoxStats::from({1, 2, 3, 4, 5});
    REQUIRE(b.q1 == 2.0);
    REQUIRE(b.median == 3.0);
    REQUIRE(b.q3 == 4.0);
    REQUIRE(b.whisker_lo == 1.0);
    REQUIRE(b.whisker_hi == 5.0);
    REQUIRE(b.outliers.empty());

    const BoxStats c = BoxStats::from({1, 2, 3, 4, 100});
    REQUIRE(c.whisker_hi == 4.0);
    REQUIRE(c.outliers == std::vector<double>{100.0});
  }

  SECTION("single observation collapses the box") {
    const BoxStats b = BoxStats::from({7.5});
    REQUIRE(b.q1 == 7.5);
    REQUIRE(b.median == 7.5);
    REQUIRE(b.q3 == 7.5);
    REQUIRE(b.whisker_lo == 7.5);
    REQUIRE(b.whisker_hi == 7.5);
    REQUIRE(b.outliers.empty());
  }

  REQUIRE_THROWS_AS(linear_quantile({}, 0.5), std::invalid_argument);
  REQUIRE_THROWS_AS(linear_quantile({1.0}, 1.5), std::invalid_argument);
}

TEST_CASE("leakage histogram buckets by decade and keeps totals") {
  const std::vector<double> leaks = {0.0, 1e-17, 3e-10, 5e-4, 2e-3, 0.5, 1.2};
  const LeakageHistogram h = LeakageHistogram::from(leaks);
  REQUIRE(h.edges.front() == Catch::Approx(1e-16));
  REQUIRE(h.edges.back() == Catch::Approx(1.0));
  REQUIRE(h.threshold == 1e-3);
  int total = h.below + h.above;
  for (int c : h.counts) total += c;
  REQUIRE(total == static_cast<int>(leaks.size()));
  REQUIRE(h.below == 2);
  REQUIRE(h.above == 1);
  // 3e-10 lands in [1e-10, 1e-9), bin index 6; 0.5 in [0.1, 1), the last bin
  REQUIRE(h.counts[6] == 1);
  REQUIRE(h.counts.back() == 1);
}

TEST_CASE("single runs carry the config echo and optional trajectory trim") {
  RunConfig cfg;
  cfg.model = bc_model(2);
  cfg.encoding = Encoding::gray;
  cfg.reference = {"00", 'z'};

  const RunRecord rec = execute_run(cfg);
  REQUIRE(rec.hash == config_hash(cfg));
  REQUIRE(rec.config.encoding == Encoding::gray);
  REQUIRE(rec.result.success);
  REQUIRE(rec.result.fidelity >= 0.999);
  REQUIRE(rec.result.proj >= 0.999);
  REQUIRE(rec.initial_grad > cfg.engine.grad_cutoff);
  REQUIRE(rec.result.trajectory.size() == static_cast<std::size_t>(rec.result.steps) + 1);

  RunConfig slim = cfg;
  slim.keep_trajectory = false;
  const RunRecord rec2 = execute_run(slim);
  REQUIRE(rec2.result.trajectory.size() == 2);
  REQUIRE(rec2.result.steps == rec.result.steps);
  REQUIRE(rec2.result.n_cx_cumulative == rec.result.n_cx_cumulative);
  REQUIRE(rec2.initial_grad == Catch::Approx(rec.initial_grad));
  REQUIRE(rec2.result.trajectory.back().energy == Catch::Approx(rec.result.energy));

  RunConfig bad = cfg;
  bad.reference.spins = "000";
  REQUIRE_THROWS_AS(execute_run(bad), std::invalid_argument);
}

TEST_CASE("a one-cell sweep enumerates exactly the nine spin strings") {
  SweepGrid grid;
  grid.model = bc_model(2);
  grid.encodings = {Encoding::standard};
  grid.pools = {PoolKind::maximal};
  grid.bases = {'z'};

  const SweepResult res = sweep(grid);
  REQUIRE(res.runs.size() == 9);
  const auto refs = all_spin_strings(2);
  for (std::size_t i = 0; i < res.runs.size(); ++i)
    REQUIRE(res.runs[i].config.reference.spins == refs[i]);

  const SweepSummary& s = res.summary;
  REQUIRE(s.total == 9);
  REQUIRE(s.cells.size() == 1);
  REQUIRE(s.total == s.included + s.excluded_low_fidelity + s.excluded_vanishing_gradient);
  REQUIRE(s.cells[0].total == 9);
  REQUIRE(s.cells[0].success_rate >= 0.7);
  REQUIRE(static_cast<int>(s.exclusions.size()) ==
          s.excluded_low_fidelity + s.excluded_vanishing_gradient);

  SECTION("worker count does not change the gathered results") {
    SweepGrid par = grid;
    par.workers = 3;
    const SweepResult res2 = sweep(par);
    REQUIRE(res2.runs.size() == res.runs.size());
    for (std::size_t i = 0; i < res.runs.size(); ++i) {
      REQUIRE(res2.runs[i].hash == res.runs[i].hash);
      REQUIRE(res2.runs[i].result.energy == res.runs[i].result.energy);
      REQUIRE(res2.runs[i].result.steps == res.runs[i].result.steps);
    }
    REQUIRE(res2.summary == res.summary);
  }

  SECTION("grid validation") {
    SweepGrid bad = grid;
    bad.bases = {'y'};
    REQUIRE_THROWS_AS(sweep(bad), std::invalid_argument);
    bad = grid;
    bad.encodings.clear();
    REQUIRE_THROWS_AS(sweep(bad), std::invalid_argument);
  }
}

TEST_CASE("planar-exchange chains starve the minimal pool of initial gradients") {
  SweepGrid grid;
  grid.model = xxz_model(2);
  grid.encodings = {Encoding::standard, Encoding::multiplet};
  grid.pools = {PoolKind::minimal};
  grid.bases = {'z'};

  const SweepResult res = sweep(grid);
  REQUIRE(res.runs.size() == 18);
  for (const RunRecord& r : res.runs) {
    REQUIRE(r.result.halted == HaltReason::vanishing_initial_gradient);
    REQUIRE_FALSE(recomputed_success(r));
  }
  REQUIRE(res.summary.included == 0);
  REQUIRE(res.summary.excluded_vanishing_gradient == 18);
  REQUIRE(res.summary.success_rate == 0.0);
  for (const ExclusionEntry& e : res.summary.exclusions)
    REQUIRE(e.reason == "vanishing_initial_gradient");
}

TEST_CASE("reference ranking follows the four keys and breaks ties by hash") {
  std::vector<RunRecord> runs;
  runs.push_back(synthetic_record(10, 500, 40, PoolKind::minimal, "00"));
  runs.push_back(synthetic_record(4, 900, 80, PoolKind::minimal, "01"));
  runs.push_back(synthetic_record(4, 300, 80, PoolKind::minimal, "02"));
  runs.push_back(synthetic_record(4, 300, 30, PoolKind::minimal, "10"));
  runs.push_back(synthetic_record(4, 300, 30, PoolKind::maximal, "10"));
  runs.push_back(synthetic_record(6, 100, 10, PoolKind::maximal, "11", 0.5));

  const auto order = rank_references(runs);
  REQUIRE(order.size() == 5);  // the low-fidelity run is never ranked
  REQUIRE(order[0] == 4);      // smallest final count, then maximal pool wins the tie
  REQUIRE(order[1] == 3);
  REQUIRE(order[2] == 2);      // smaller cumulative count
  REQUIRE(order[3] == 1);
  REQUIRE(order[4] == 0);

  SECTION("stale success flags are ignored") {
    runs[5].result.success = true;  // contradicts the stored fidelity
    const auto again = rank_references(runs);
    REQUIRE(again.size() == 5);
  }

  SECTION("runs that never reached the gradient threshold rank after those that did") {
    auto capped = synthetic_record(4, 300, 30, PoolKind::maximal, "12");
    capped.result.halted = HaltReason::max_steps;
    runs.push_back(capped);
    const auto again = rank_references(runs);
    REQUIRE(again[0] == 4);
    // the capped run ties on the two count keys with runs 2, 3, and 4 but sorts
    // after every run whose step count is resolved
    REQUIRE(again[3] == 6);
  }

  SECTION("full ties fall back to the config hash") {
    std::vector<RunRecord> twins;
    twins.push_back(synthetic_record(4, 300, 30, PoolKind::maximal, "00"));
    twins.push_back(synthetic_record(4, 300, 30, PoolKind::maximal, "01"));
    const auto o = rank_references(twins);
    REQUIRE(o.size() == 2);
    REQUIRE(twins[o[0]].hash < twins[o[1]].hash);
  }

  REQUIRE_THROWS_AS(rank_references({}), std::invalid_argument);
}

TEST_CASE("power-law fits recover synthetic exponents") {
  std::vector<ScalingPoint> cubic;
  for (int L : {2, 3, 4, 5, 6}) cubic.push_back({L, 5.0 * L * L * L});
  const ScalingFit f = fit_scaling(cubic);
  REQUIRE(f.exponent == Catch::Approx(3.0).margin(1e-6));
  REQUIRE(f.prefactor == Catch::Approx(5.0).margin(1e-6));
  REQUIRE(f.residual == Catch::Approx(0.0).margin(1e-10));
  REQUIRE(f.prefactor_cubic == Catch::Approx(5.0).margin(1e-9));

  std::vector<ScalingPoint> quartic;
  for (int L : {2, 3, 4, 5}) quartic.push_back({L, 2.0 * L * L * L * L});
  REQUIRE(fit_scaling(quartic).exponent == Catch::Approx(4.0).margin(1e-6));
  REQUIRE(fit_scaling(quartic).prefactor_quartic == Catch::Approx(2.0).margin(1e-9));

  REQUIRE_THROWS_AS(fit_scaling({{2, 8.0}, {3, 27.0}}), std::invalid_argument);
  REQUIRE_THROWS_AS(fit_scaling({{2, 8.0}, {3, 0.0}, {4, 64.0}}), std::invalid_argument);
  REQUIRE_THROWS_AS(fit_scaling({{2, 8.0}, {2, 8.0}, {2, 8.0}}), std::invalid_argument);
}

TEST_CASE("reports round-trip through CSV and JSON") {
  SweepGrid grid;
  grid.model = bc_model(2);
  grid.encodings = {Encoding::standard, Encoding::gray};
  grid.pools = {PoolKind::maximal};
  grid.bases = {'z'};
  const SweepResult res = sweep(grid);

  const auto dir = scratch_dir();
  ReportPaths paths;
  paths.runs_csv = (dir / "runs.csv").string();
  paths.summary_json = (dir / "summary.json").string();
  paths.summary_txt = (dir / "summary.txt").string();
  write_report(paths, res.runs, res.summary);

  SECTION("summary JSON reproduces the summary exactly") {
    const SweepSummary back = read_summary_json(paths.summary_json);
    REQUIRE(back == res.summary);
  }

  SECTION("per-run CSV reproduces the summary through a fresh aggregation") {
    const auto rows = read_runs_csv(paths.runs_csv);
    REQUIRE(rows.size() == res.runs.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      REQUIRE(rows[i].hash == res.runs[i].hash);
      REQUIRE(rows[i].result.fidelity == res.runs[i].result.fidelity);
      REQUIRE(rows[i].result.n_cx_final == res.runs[i].result.n_cx_final);
      REQUIRE(rows[i].config.reference.spins == res.runs[i].config.reference.spins);
    }
    REQUIRE(summarize(rows, grid.model) == res.summary);
  }

  SECTION("success column is recomputed from the stored fidelity") {
    auto tampered = res.runs;
    tampered[0].result.success = true;
    tampered[0].result.fidelity = 0.25;
    write_runs_csv(paths.runs_csv, tampered);
    const auto rows = read_runs_csv(paths.runs_csv);
    REQUIRE_FALSE(rows[0].result.success);
  }

  SECTION("plain-text table lists every cell and the overall line") {
    std::ifstream f(paths.summary_txt);
    REQUIRE(f.good());
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    REQUIRE(text.find("standard/maximal/z") != std::string::npos);
    REQUIRE(text.find("gray/maximal/z") != std::string::npos);
    REQUIRE(text.find("overall") != std::string::npos);
  }

  SECTION("threshold marker and conventions live in the JSON") {
    std::ifstream f(paths.summary_json);
    nlohmann::json j;
    f >> j;
    REQUIRE(j.at("leakage").at("threshold").get<double>() == 1e-3);
    REQUIRE(j.contains("conventions"));
    REQUIRE(j.at("conventions").at("quantile").get<std::string>().find("linear") !=
            std::string::npos);
  }
}

TEST_CASE("empty and single-run reports stay valid") {
  const auto dir = scratch_dir();
  const ModelSpec model = bc_model(2);

  SECTION("no runs at all") {
    const SweepSummary empty = summarize({}, model);
    REQUIRE(empty.total == 0);
    REQUIRE(empty.cells.empty());
    ReportPaths paths;
    paths.runs_csv = (dir / "empty_runs.csv").string();
    paths.summary_json = (dir / "empty_summary.json").string();
    paths.summary_txt = (dir / "empty_summary.txt").string();
    write_report(paths, {}, empty);
    REQUIRE(read_runs_csv(paths.runs_csv).empty());
    REQUIRE(read_summary_json(paths.summary_json) == empty);
  }

  SECTION("a single run collapses every quartile onto its value") {
    RunConfig cfg;
    cfg.model = model;
    cfg.reference = {"00", 'z'};
    cfg.keep_trajectory = false;
    const RunRecord rec = execute_run(cfg);
    const SweepSummary s = summarize({rec}, model);
    REQUIRE(s.cells.size() == 1);
    const BoxStats& b = s.cells[0].cnot_final;
    REQUIRE(b.count == 1);
    REQUIRE(b.q1 == b.median);
    REQUIRE(b.median == b.q3);
    REQUIRE(b.q3 == static_cast<double>(rec.result.n_cx_final));
    REQUIRE(b.whisker_lo == b.whisker_hi);
  }
}

TEST_CASE("trajectory files carry one row per recorded step") {
  RunConfig cfg;
  cfg.model = bc_model(2);
  cfg.reference = {"01", 'z'};
  const RunRecord rec = execute_run(cfg);

  const auto dir = scratch_dir();
  const auto path = (dir / "traj.csv").string();
  write_trajectories_csv(path, {rec});
  std::ifstream f(path);
  std::string line;
  std::getline(f, line);
  REQUIRE(line == std::string(detail::trajectories_csv_header()));
  std::size_t rows = 0;
  while (std::getline(f, line))
    if (!line.empty()) ++rows;
  REQUIRE(rows == rec.result.trajectory.size());
}

TEST_CASE("the scaling protocol carries ranked references to larger sizes") {
  ScalingSettings cfg;
  cfg.sizes = {2, 3};
  cfg.top_k = 4;
  cfg.encodings = {Encoding::standard};
  cfg.pools = {PoolKind::maximal};
  cfg.bases = {'z'};

  const auto series = scaling_series(bc_model(2), cfg);
  REQUIRE(series.size() == 1);
  const ScalingCellSeries& s = series[0];
  REQUIRE(s.carried.size() == 4);
  REQUIRE(s.points.size() == 2);
  REQUIRE(s.points[0].L == 2);
  REQUIRE(s.points[1].L == 3);
  REQUIRE(s.points[0].n_cx > 0.0);
  REQUIRE(s.points[1].n_cx > 0.0);
  REQUIRE(s.survivors[0] == 4);
  REQUIRE(s.survivors[1] >= 1);

  SECTION("defaults leave the three-qubit encoding out of scaling runs") {
    const ScalingSettings defaults;
    REQUIRE(std::find(defaults.encodings.begin(), defaults.encodings.end(), Encoding::unary) ==
            defaults.encodings.end());
    REQUIRE(defaults.top_k == 16);
  }

  REQUIRE_THROWS_AS(scaling_series(bc_model(2), ScalingSettings{{3, 2}}), std::invalid_argument);
  REQUIRE_THROWS_AS(scaling_series(bc_model(2), ScalingSettings{{2}}), std::invalid_argument);
}
