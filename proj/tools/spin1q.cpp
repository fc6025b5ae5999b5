// Command-line front end: single runs, reference sweeps, exact diagonalization,
// transition locators, report regeneration, and power-law fits.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <spin1q/harness.hpp>

using namespace spin1q;
using nlohmann::json;

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(s);
  while (std::getline(is, field, ',')) out.push_back(field);
  return out;
}

struct ModelArgs {
  std::string name = "bc";
  int L = 2;
  std::string boundary = "open";
  std::optional<double> J, delta, D, hx;

  void attach(CLI::App* cmd) {
    cmd->add_option("--model", name, "model preset: bc or xxz")->check(CLI::IsMember({"bc", "xxz"}));
    cmd->add_option("--L", L, "number of sites");
    cmd->add_option("--boundary", boundary, "open, periodic, or twisted")
        ->check(CLI::IsMember({"open", "periodic", "twisted"}));
    cmd->add_option("--J", J, "planar exchange override");
    cmd->add_option("--delta", delta, "axial exchange override");
    cmd->add_option("--D", D, "single-ion anisotropy override");
    cmd->add_option("--hx", hx, "transverse field override");
  }

  ModelSpec build() const {
    ModelSpec m = name == "bc" ? bc_model(L, parse_boundary(boundary))
                               : xxz_model(L, parse_boundary(boundary));
    if (J) m.J = *J;
    if (delta) m.delta = *delta;
    if (D) m.D = *D;
    if (hx) m.hx = *hx;
    m.validate();
    return m;
  }
};

struct EngineArgs {
  std::optional<double> dtau, l2_threshold, grad_cutoff, lambda, min_improve;
  std::optional<int> max_steps, max_adds;

  void attach(CLI::App* cmd) {
    cmd->add_option("--dtau", dtau, "imaginary-time step");
    cmd->add_option("--l2-threshold", l2_threshold, "distance bound that triggers ansatz growth");
    cmd->add_option("--grad-cutoff", grad_cutoff, "energy-gradient halt threshold");
    cmd->add_option("--lambda", lambda, "metric regularization strength");
    cmd->add_option("--max-steps", max_steps, "step budget");
    cmd->add_option("--max-adds", max_adds, "ansatz growth budget per step");
    cmd->add_option("--min-improve", min_improve, "smallest useful distance gain per added element");
  }

  AvqiteConfig build() const {
    AvqiteConfig c;
    if (dtau) c.dtau = *dtau;
    if (l2_threshold) c.l2_threshold = *l2_threshold;
    if (grad_cutoff) c.grad_cutoff = *grad_cutoff;
    if (lambda) c.lambda = *lambda;
    if (max_steps) c.max_steps = *max_steps;
    if (max_adds) c.max_adds_per_step = *max_adds;
    if (min_improve) c.min_score_improvement = *min_improve;
    c.validate();
    return c;
  }
};

json load_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  json j;
  f >> j;
  return j;
}

SweepGrid grid_from_json(const json& j) {
  SweepGrid g;
  if (j.contains("model")) g.model = j.at("model").get<ModelSpec>();
  if (j.contains("encodings")) {
    g.encodings.clear();
    for (const auto& s : j.at("encodings")) g.encodings.push_back(parse_encoding(s.get<std::string>()));
  }
  if (j.contains("pools")) {
    g.pools.clear();
    for (const auto& s : j.at("pools")) g.pools.push_back(parse_pool(s.get<std::string>()));
  }
  if (j.contains("bases")) {
    g.bases.clear();
    for (const auto& s : j.at("bases")) {
      const std::string b = s.get<std::string>();
      if (b.size() != 1) throw std::runtime_error("bases entries must be single characters");
      g.bases.push_back(b[0]);
    }
  }
  if (j.contains("engine")) g.engine = j.at("engine").get<AvqiteConfig>();
  g.keep_trajectories = j.value("keep_trajectories", g.keep_trajectories);
  g.workers = j.value("workers", g.workers);
  g.model.validate();
  g.engine.validate();
  return g;
}

void print_summary_table(std::ostream& os, const SweepSummary& s) {
  os << "cell                      total  incl  lowF  vanish  success%  cx_med\n";
  char buf[160];
  for (const CellSummary& c : s.cells) {
    std::snprintf(buf, sizeof(buf), "%-25s %5d %5d %5d %7d %9.1f %7.1f\n", c.key.label().c_str(),
                  c.total, c.included, c.excluded_low_fidelity, c.excluded_vanishing_gradient,
                  100.0 * c.success_rate, c.cnot_final.median);
    os << buf;
  }
  std::snprintf(buf, sizeof(buf), "%-25s %5d %5d %5d %7d %9.1f\n", "overall", s.total, s.included,
                s.excluded_low_fidelity, s.excluded_vanishing_gradient, 100.0 * s.success_rate);
  os << buf;
}

std::vector<ScalingPoint> read_points_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::vector<ScalingPoint> pts;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (!std::isdigit(static_cast<unsigned char>(line[0]))) continue;  // header or comment
    const auto v = detail::split_csv_line(line);
    if (v.size() < 2) throw std::runtime_error(path + ": rows need L,n_cx");
    pts.push_back({std::stoi(v[0]), std::stod(v[1])});
  }
  return pts;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spin-1 chain toolkit: adaptive variational imaginary-time evolution, exact "
               "diagonalization, reference sweeps, and cost-scaling fits"};
  app.require_subcommand(1);

  // ---- run ----
  auto* run_cmd = app.add_subcommand("run", "single adaptive evolution from one reference state");
  ModelArgs run_model;
  EngineArgs run_engine;
  std::string run_encoding = "standard", run_pool = "maximal", run_spins, run_basis = "z";
  std::string run_out;
  bool run_traj = false;
  run_model.attach(run_cmd);
  run_engine.attach(run_cmd);
  run_cmd->add_option("--encoding", run_encoding, "standard, gray, unary, or multiplet");
  run_cmd->add_option("--pool", run_pool, "minimal or maximal");
  run_cmd->add_option("--spins", run_spins, "reference pattern, one digit 0/1/2 per site")
      ->required();
  run_cmd->add_option("--basis", run_basis, "z or x product reference")
      ->check(CLI::IsMember({"z", "x"}));
  run_cmd->add_option("--out-dir", run_out, "directory for run.csv (and trajectory.csv)");
  run_cmd->add_flag("--trajectory", run_traj, "also write the per-step trajectory");
  run_cmd->callback([&]() {
    RunConfig cfg;
    cfg.model = run_model.build();
    cfg.encoding = parse_encoding(run_encoding);
    cfg.pool = parse_pool(run_pool);
    cfg.reference = {run_spins, run_basis[0]};
    cfg.engine = run_engine.build();
    const RunRecord rec = execute_run(cfg);
    json out = {{"signature", config_signature(cfg)},
                {"hash", rec.hash},
                {"halted", halt_reason_name(rec.result.halted)},
                {"steps", rec.result.steps},
                {"energy", rec.result.energy},
                {"fidelity", rec.result.fidelity},
                {"proj", rec.result.proj},
                {"success", recomputed_success(rec)},
                {"n_theta", rec.result.ansatz.size()},
                {"n_cx_final", rec.result.n_cx_final},
                {"n_cx_cumulative", rec.result.n_cx_cumulative},
                {"initial_grad", rec.initial_grad},
                {"initial_variance", rec.result.initial_variance}};
    std::cout << out.dump(2) << "\n";
    if (!run_out.empty()) {
      std::filesystem::create_directories(run_out);
      const auto dir = std::filesystem::path(run_out);
      write_runs_csv((dir / "run.csv").string(), {rec});
      if (run_traj) write_trajectories_csv((dir / "trajectory.csv").string(), {rec});
    }
  });

  // ---- sweep ----
  auto* sweep_cmd = app.add_subcommand("sweep", "run every reference in {0,1,2}^L per grid cell");
  ModelArgs sweep_model;
  EngineArgs sweep_engine;
  std::string sweep_config, sweep_out = "sweep_out";
  std::string sweep_encodings = "standard,gray,unary,multiplet", sweep_pools = "minimal,maximal",
              sweep_bases = "z,x";
  int sweep_jobs = 0;
  bool sweep_traj = false;
  sweep_model.attach(sweep_cmd);
  sweep_engine.attach(sweep_cmd);
  sweep_cmd->add_option("--config", sweep_config, "JSON grid description (overrides the flags)");
  sweep_cmd->add_option("--encodings", sweep_encodings, "comma-separated encoding list");
  sweep_cmd->add_option("--pools", sweep_pools, "comma-separated pool list");
  sweep_cmd->add_option("--bases", sweep_bases, "comma-separated basis list");
  sweep_cmd->add_option("--jobs", sweep_jobs, "worker threads (0 = hardware)");
  sweep_cmd->add_flag("--trajectories", sweep_traj, "keep and write per-step trajectories");
  sweep_cmd->add_option("--out-dir", sweep_out, "output directory");
  sweep_cmd->callback([&]() {
    SweepGrid grid;
    if (!sweep_config.empty()) {
      grid = grid_from_json(load_json(sweep_config));
    } else {
      grid.model = sweep_model.build();
      grid.encodings.clear();
      for (const auto& s : split_list(sweep_encodings)) grid.encodings.push_back(parse_encoding(s));
      grid.pools.clear();
      for (const auto& s : split_list(sweep_pools)) grid.pools.push_back(parse_pool(s));
      grid.bases.clear();
      for (const auto& s : split_list(sweep_bases)) {
        if (s.size() != 1) throw std::runtime_error("bases entries must be single characters");
        grid.bases.push_back(s[0]);
      }
      grid.engine = sweep_engine.build();
      grid.keep_trajectories = sweep_traj;
      grid.workers = sweep_jobs;
    }
    const SweepResult res = sweep(grid);
    std::filesystem::create_directories(sweep_out);
    const auto dir = std::filesystem::path(sweep_out);
    ReportPaths paths;
    paths.runs_csv = (dir / "runs.csv").string();
    paths.summary_json = (dir / "summary.json").string();
    paths.summary_txt = (dir / "summary.txt").string();
    if (grid.keep_trajectories) paths.trajectories_csv = (dir / "trajectories.csv").string();
    write_report(paths, res.runs, res.summary);
    print_summary_table(std::cout, res.summary);
    std::cout << "wrote " << paths.runs_csv << ", " << paths.summary_json << ", "
              << paths.summary_txt << "\n";
  });

  // ---- ed ----
  auto* ed_cmd = app.add_subcommand("ed", "exact lowest eigenpairs of the spin-1 chain");
  ModelArgs ed_model;
  int ed_k = 1;
  ed_model.attach(ed_cmd);
  ed_cmd->add_option("-k,--k", ed_k, "number of lowest eigenpairs");
  ed_cmd->callback([&]() {
    EDOptions opt;
    opt.k = ed_k;
    const EDResult res = ground_state(ed_model.build(), opt);
    json out = {{"model", ed_model.build()},
                {"energies", res.energies},
                {"residuals", res.residuals}};
    std::cout << out.dump(2) << "\n";
  });

  // ---- binder ----
  auto* binder_cmd = app.add_subcommand(
      "binder", "Binder-cumulant crossing of the transverse-field transition");
  ModelArgs binder_model;
  binder_model.boundary = "periodic";  // crossings sharpen on a ring
  std::string binder_sizes = "4,6,8";
  double binder_lo = 1.2, binder_hi = 1.6, binder_xtol = 1e-4;
  binder_model.attach(binder_cmd);
  binder_cmd->add_option("--sizes", binder_sizes, "comma-separated chain sizes");
  binder_cmd->add_option("--lo", binder_lo, "field scan lower bound");
  binder_cmd->add_option("--hi", binder_hi, "field scan upper bound");
  binder_cmd->add_option("--xtol", binder_xtol, "bisection tolerance");
  binder_cmd->callback([&]() {
    std::vector<int> sizes;
    for (const auto& s : split_list(binder_sizes)) sizes.push_back(std::stoi(s));
    const BinderCrossing res =
        binder_crossing(binder_model.build(), sizes, binder_lo, binder_hi, binder_xtol);
    json out = {{"crossing", res.crossing},
                {"pair_crossings", res.pair_crossings},
                {"sizes", res.sizes}};
    std::cout << out.dump(2) << "\n";
  });

  // ---- sector-cross ----
  auto* sector_cmd = app.add_subcommand(
      "sector-cross", "symmetry-sector level crossing of a twisted ring against D");
  ModelArgs sector_model;
  sector_model.name = "xxz";
  sector_model.L = 8;
  sector_model.boundary = "twisted";
  std::string sector_op = "inversion";
  double sector_lo = 0.3, sector_hi = 0.5, sector_xtol = 1e-4;
  sector_model.attach(sector_cmd);
  sector_cmd->add_option("--op", sector_op, "inversion, reversal, or combined")
      ->check(CLI::IsMember({"inversion", "reversal", "combined"}));
  sector_cmd->add_option("--lo", sector_lo, "anisotropy scan lower bound");
  sector_cmd->add_option("--hi", sector_hi, "anisotropy scan upper bound");
  sector_cmd->add_option("--xtol", sector_xtol, "bisection tolerance");
  sector_cmd->callback([&]() {
    const SectorCrossing res = sector_crossing(sector_model.build(), parse_sector_op(sector_op),
                                               sector_lo, sector_hi, sector_xtol);
    json out = {{"crossing", res.crossing},
                {"op", sector_op_name(res.op)},
                {"e_plus_lo", res.e_plus_lo},
                {"e_minus_lo", res.e_minus_lo},
                {"e_plus_hi", res.e_plus_hi},
                {"e_minus_hi", res.e_minus_hi}};
    std::cout << out.dump(2) << "\n";
  });

  // ---- report ----
  auto* report_cmd =
      app.add_subcommand("report", "rebuild summary files from a per-run CSV");
  std::string report_runs, report_out = "report_out";
  report_cmd->add_option("--runs", report_runs, "per-run CSV produced by run or sweep")->required();
  report_cmd->add_option("--out-dir", report_out, "output directory");
  report_cmd->callback([&]() {
    const auto rows = read_runs_csv(report_runs);
    const ModelSpec model = rows.empty() ? ModelSpec{} : rows.front().config.model;
    const SweepSummary summary = summarize(rows, model);
    std::filesystem::create_directories(report_out);
    const auto dir = std::filesystem::path(report_out);
    ReportPaths paths;
    paths.summary_json = (dir / "summary.json").string();
    paths.summary_txt = (dir / "summary.txt").string();
    write_report(paths, rows, summary);
    print_summary_table(std::cout, summary);
    std::cout << "wrote " << paths.summary_json << ", " << paths.summary_txt << "\n";
  });

  // ---- fit ----
  auto* fit_cmd = app.add_subcommand("fit", "power-law fit of entangling cost against size");
  std::string fit_points;
  fit_cmd->add_option("--points", fit_points, "CSV with L,n_cx rows")->required();
  fit_cmd->callback([&]() {
    const ScalingFit f = fit_scaling(read_points_csv(fit_points));
    std::cout << json(f).dump(2) << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
