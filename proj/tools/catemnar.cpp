#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "catemnar/baselines.hpp"
#include "catemnar/config_io.hpp"
#include "catemnar/counterexamples.hpp"
#include "catemnar/csv_io.hpp"
#include "catemnar/inference.hpp"
#include "catemnar/np2sls.hpp"
#include "catemnar/param_em.hpp"
#include "catemnar/sensitivity.hpp"
#include "catemnar/study.hpp"
#include "catemnar/svg.hpp"

namespace fs = std::filesystem;
using namespace catemnar;

namespace {

struct Globals {
  std::uint64_t seed = 1;
  bool seed_given = false;
  std::string config;
  std::string out = ".";
  std::size_t threads = 1;
  bool threads_given = false;
};

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p);
  if (!f) throw ConfigError("cannot write '" + p.string() + "'");
  f << text;
}

fs::path out_dir(const Globals& g) {
  fs::path dir(g.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + g.out + "'");
  return dir;
}

RunConfig base_config(const Globals& g) {
  RunConfig rc = g.config.empty() ? RunConfig{} : load_run_config(g.config);
  if (g.seed_given || g.config.empty()) rc.seed = g.seed;
  if (g.threads_given || g.config.empty()) rc.threads = g.threads;
  return rc;
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

struct DataOpts {
  std::string data;
  std::string oracle;
  std::string x_kinds;
  std::string t_kind;
  std::string y_kind;
  std::string assumption;
  std::string id_covariates;
  std::vector<double> x;
  std::optional<double> t1, t0;
};

void add_data_options(CLI::App* sub, DataOpts& o) {
  sub->add_option("--data", o.data, "Observed-data CSV")->required()->check(CLI::ExistingFile);
  sub->add_option("--x-kinds", o.x_kinds, "Comma list of covariate kinds (binary|continuous)");
  sub->add_option("--t-kind", o.t_kind, "Treatment kind");
  sub->add_option("--y-kind", o.y_kind, "Outcome kind");
  sub->add_option("--assumption", o.assumption, "A1|A2|A3|MCAR|MAR|general");
  sub->add_option("--id-covariates", o.id_covariates, "1-based comma list of shadow covariates (A3)");
  sub->add_option("--x", o.x, "Covariate query value(s)");
  sub->add_option("--t1", o.t1, "Treatment level t1");
  sub->add_option("--t0", o.t0, "Treatment level t0");
}

void apply_data_options(RunConfig& rc, const DataOpts& o) {
  if (!o.x_kinds.empty()) {
    rc.schema.x_kinds.clear();
    for (const auto& k : split(o.x_kinds)) rc.schema.x_kinds.push_back(parse_variable_kind(k));
    rc.schema_given = true;
  }
  if (!o.t_kind.empty()) rc.schema.t_kind = parse_variable_kind(o.t_kind), rc.schema_given = true;
  if (!o.y_kind.empty()) rc.schema.y_kind = parse_variable_kind(o.y_kind), rc.schema_given = true;
  if (!o.assumption.empty()) rc.assumption.variant = parse_assumption(o.assumption);
  if (!o.id_covariates.empty()) {
    rc.assumption.identifying_covariates.clear();
    for (const auto& c : split(o.id_covariates)) {
      const int v = std::stoi(c);
      if (v < 1) throw ConfigError("--id-covariates are 1-based");
      rc.assumption.identifying_covariates.push_back(static_cast<std::size_t>(v - 1));
    }
  }
  if (!o.x.empty()) rc.x = o.x;
  if (o.t1) rc.t1 = *o.t1;
  if (o.t0) rc.t0 = *o.t0;
}

Dataset load_data(const RunConfig& rc, const std::string& path) {
  DatasetSchema schema = rc.schema;
  if (!rc.schema_given) {
    // header decides p; kinds default to binary
    std::ifstream f(path);
    std::string header;
    std::getline(f, header);
    const std::size_t cols = split(header).size();
    if (cols < 5 || (cols - 4) % 2 != 0) throw ConfigError("cannot infer covariate count from '" + path + "'");
    schema.x_kinds.assign((cols - 4) / 2, VariableKind::Binary);
  }
  return read_csv_file(path, schema);
}

std::vector<double> default_query(const RunConfig& rc, const Dataset& d) {
  if (!rc.x.empty()) {
    if (rc.x.size() != d.p()) throw ConfigError("query x must have one value per covariate");
    return rc.x;
  }
  std::vector<double> x;
  for (std::size_t k = 0; k < d.p(); ++k) x.push_back(d.x_kinds[k] == VariableKind::Binary ? 1.0 : 0.0);
  return x;
}

void print_estimate(const CateEstimate& e) {
  std::cout << e.estimator << " tau=" << e.tau;
  if (e.interval)
    std::cout << " [" << e.interval->lower << ", " << e.interval->upper << "]"
              << (e.interval->unreliable ? " (unreliable)" : "");
  std::cout << "\n";
  for (const auto& n : e.notes) std::cout << "note: " << n << "\n";
}

int run_simulate(const Globals& g, const std::string& scenario, std::size_t n) {
  RunConfig rc = base_config(g);
  ScenarioConfig s;
  if (!scenario.empty())
    s = scenario_from_id(scenario);
  else if (rc.scenarios.size() == 1)
    s = rc.scenarios.front();
  else
    throw ConfigError("simulate needs --scenario or exactly one scenario in the config");
  const auto sim = simulate(s, n, rc.seed);
  const auto dir = out_dir(g);
  write_csv_file((dir / "observed.csv").string(), sim.observed);
  write_csv_file((dir / "oracle.csv").string(), sim.latent);
  Json meta{{"scenario", scenario_to_json(s)},
            {"n", n},
            {"seed", rc.seed},
            {"true_cate", true_cate(s, study_query(s), 1.0, 0.0)},
            {"query", study_query(s)}};
  write_text(dir / "scenario.json", meta.dump(2) + "\n");
  Json run{{"schema",
            {{"x_kinds", {to_string(s.x_kind)}}, {"t_kind", to_string(s.t_kind)}, {"y_kind", to_string(s.y_kind)}}},
           {"assumption", to_string(s.assumption.variant)},
           {"query", {{"x", study_query(s)}, {"t1", 1.0}, {"t0", 0.0}}}};
  if (!s.assumption.identifying_covariates.empty()) run["identifying_covariates"] = {1};
  write_text(dir / "config.json", run.dump(2) + "\n");
  std::cout << "wrote " << n << " units of " << s.id << " to " << dir.string() << "\n";
  return 0;
}

int run_estimate(const Globals& g, const DataOpts& o, const std::string& method, std::optional<std::size_t> B,
                 std::optional<double> level) {
  RunConfig rc = base_config(g);
  apply_data_options(rc, o);
  if (B) rc.bootstrap = *B;
  if (level) rc.level = *level;
  const Dataset d = load_data(rc, o.data);
  const auto x = default_query(rc, d);
  const auto kind = parse_estimator(method);
  if (kind == EstimatorKind::Oracle && o.oracle.empty()) throw ConfigError("oracle needs --oracle <latent csv>");
  const Dataset latent = kind == EstimatorKind::Oracle ? load_data(rc, o.oracle) : Dataset{};
  const OutcomeModel om = outcome_model_from(rc, d);
  CateEstimator est;
  switch (kind) {
    case EstimatorKind::Oracle:
      est = [&](const Dataset&, std::uint64_t) { return oracle_fit(latent, om, x, rc.t1, rc.t0); };
      if (rc.bootstrap > 0) throw ConfigError("bootstrap is not available for the oracle");
      break;
    case EstimatorKind::Cca:
      est = [&](const Dataset& s, std::uint64_t) { return cca_fit(s, om, x, rc.t1, rc.t0); };
      break;
    case EstimatorKind::MissInd:
      est = [&](const Dataset& s, std::uint64_t) { return miss_indicator_fit(s, om, x, rc.t1, rc.t0); };
      break;
    case EstimatorKind::Np:
      est = [&](const Dataset& s, std::uint64_t) {
        return estimate_cate_np(s, rc.assumption, rc.sieve, rc.reg, x, rc.t1, rc.t0);
      };
      break;
    case EstimatorKind::Para: {
      const MissingnessModel mm = response_model_from(rc, d, om.family);
      est = [&, mm](const Dataset& s, std::uint64_t seed) {
        EmConfig em = rc.em;
        em.seed = seed;
        return estimate_cate_param(s, om, mm, em, x, rc.t1, rc.t0);
      };
      break;
    }
  }
  CateEstimate e;
  if (rc.bootstrap > 0) {
    BootstrapConfig bc;
    bc.B = rc.bootstrap;
    bc.level = rc.level;
    bc.seed = rc.seed;
    bc.threads = rc.threads;
    e = bootstrap_ci(d, est, bc);
  } else {
    e = est(d, rc.seed);
  }
  const auto dir = out_dir(g);
  write_text(dir / "estimate.json", estimate_to_json(e).dump(2) + "\n");
  print_estimate(e);
  return 0;
}

int run_sensitivity(const Globals& g, const DataOpts& o, std::optional<std::size_t> B, bool cold, bool svg) {
  RunConfig rc = base_config(g);
  apply_data_options(rc, o);
  if (B) rc.bootstrap = *B;
  if (cold) rc.warm_start = false;
  const Dataset d = load_data(rc, o.data);
  SensitivitySpec spec;
  spec.assumption = rc.assumption;
  spec.delta_grid = rc.delta_grid;
  spec.x = default_query(rc, d);
  spec.t1 = rc.t1;
  spec.t0 = rc.t0;
  spec.warm_start = rc.warm_start;
  spec.threads = rc.threads;
  EmConfig em = rc.em;
  em.seed = rc.seed;
  std::optional<BootstrapConfig> bc;
  if (rc.bootstrap > 0) {
    bc = BootstrapConfig{};
    bc->B = rc.bootstrap;
    bc->level = rc.level;
    bc->seed = rc.seed;
    bc->threads = rc.threads;
  }
  const auto curve = sensitivity_curve(d, outcome_model_from(rc, d), spec, em, bc);
  const auto dir = out_dir(g);
  write_text(dir / "sensitivity.csv", curve.to_csv());
  std::size_t failed = 0;
  std::vector<LinePoint> pts;
  for (const auto& p : curve.points) {
    if (!p.tau) {
      ++failed;
      continue;
    }
    LinePoint lp{p.delta, *p.tau, false, 0.0, 0.0};
    if (p.interval) lp = {p.delta, *p.tau, true, p.interval->lower, p.interval->upper};
    pts.push_back(lp);
  }
  if (svg)
    write_text(dir / "sensitivity.svg",
               render_line_chart(pts, 0.0, "Sensitivity of the CATE to the offset", "delta", "tau"));
  std::cout << "sensitivity: " << curve.points.size() << " grid points, " << failed << " failed\n";
  if (curve.points[curve.baseline_index].tau)
    std::cout << "baseline tau=" << *curve.points[curve.baseline_index].tau << "\n";
  return failed == curve.points.size() ? 1 : 0;
}

int run_bench(const Globals& g, const std::string& scenarios, const std::string& grid, bool null_effect,
              std::optional<std::size_t> replicates, std::optional<std::size_t> n, const std::string& estimators) {
  RunConfig rc = base_config(g);
  StudyConfig sc;
  sc.scenarios = rc.scenarios;
  for (const auto& id : split(scenarios)) sc.scenarios.push_back(scenario_from_id(id));
  for (const auto& a : split(grid))
    for (auto& s : scenario_grid(parse_assumption(a), null_effect)) sc.scenarios.push_back(s);
  if (sc.scenarios.empty()) throw ConfigError("bench needs --scenarios, --grid or config scenarios");
  sc.estimators = rc.estimators;
  if (!estimators.empty()) {
    sc.estimators.clear();
    for (const auto& e : split(estimators)) sc.estimators.push_back(parse_estimator(e));
  }
  sc.replicates = replicates.value_or(rc.replicates);
  sc.n = n.value_or(rc.n);
  sc.seed = rc.seed;
  sc.threads = rc.threads;
  sc.sieve = rc.sieve;
  sc.reg = rc.reg;
  sc.em = rc.em;
  const auto report = run_study(sc, [](const ReplicateRecord& r) {
    std::cerr << r.scenario << " " << to_string(r.estimator) << " rep " << r.replicate << " " << r.status << "\n";
  });
  const auto dir = out_dir(g);
  write_text(dir / "replicates.csv", report.records_csv());
  write_text(dir / "summary.csv", report.summary_csv());
  write_text(dir / "boxplot.svg", render_study_boxplot(report, "Percent bias by scenario and estimator"));
  std::cout << report.summary_csv();
  return 0;
}

int run_verify(const Globals& g) {
  if (!g.config.empty()) load_run_config(g.config);
  const auto r1 = verify_counterexample_1();
  const auto r2 = verify_counterexample_2();
  std::cout << r1.table() << "\n" << r2.table();
  return r1.passed() && r2.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CATE estimation with covariates, treatment and outcome missing not at random"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Master seed")->each([&](const std::string&) { g.seed_given = true; });
  app.add_option("--config", g.config, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--threads", g.threads, "Worker threads (0 = all cores)")->each([&](const std::string&) {
    g.threads_given = true;
  });

  std::string scenario;
  std::size_t sim_n = 1000;
  auto* sim = app.add_subcommand("simulate", "Draw a dataset from a simulation scenario");
  sim->add_option("--scenario", scenario, "Scenario id, e.g. bcb-A2 or bbb-A2-null");
  sim->add_option("--n", sim_n, "Sample size");

  DataOpts est_opts;
  std::string method = "para";
  std::optional<std::size_t> est_B;
  std::optional<double> est_level;
  auto* est = app.add_subcommand("estimate", "Estimate the CATE from a CSV");
  add_data_options(est, est_opts);
  est->add_option("--method", method, "oracle|cca|miss-ind|np|para");
  est->add_option("--oracle", est_opts.oracle, "Fully observed CSV for the oracle")->check(CLI::ExistingFile);
  est->add_option("--bootstrap", est_B, "Bootstrap resamples (0 = none)");
  est->add_option("--level", est_level, "Interval level");

  DataOpts sens_opts;
  std::optional<std::size_t> sens_B;
  bool cold = false, no_svg = false;
  auto* sens = app.add_subcommand("sensitivity", "Offset sweep for the parametric estimator");
  add_data_options(sens, sens_opts);
  sens->add_option("--bootstrap", sens_B, "Bootstrap resamples per grid point");
  sens->add_flag("--cold", cold, "Cold-start every grid point");
  sens->add_flag("--no-svg", no_svg, "Skip the SVG plot");

  std::string bench_scen, bench_grid, bench_est;
  bool bench_null = false;
  std::optional<std::size_t> bench_R, bench_n;
  auto* bench = app.add_subcommand("bench", "Monte Carlo study over scenarios");
  bench->add_option("--scenarios", bench_scen, "Comma list of scenario ids");
  bench->add_option("--grid", bench_grid, "Comma list of assumptions; adds all 8 kind combinations");
  bench->add_flag("--null", bench_null, "Null-effect variant for --grid");
  bench->add_option("--replicates", bench_R, "Replicates per scenario");
  bench->add_option("--n", bench_n, "Sample size");
  bench->add_option("--estimators", bench_est, "Comma list of estimators");

  auto* verify = app.add_subcommand("verify", "Check the two non-identifiability constructions");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed()) return run_simulate(g, scenario, sim_n);
    if (est->parsed()) return run_estimate(g, est_opts, method, est_B, est_level);
    if (sens->parsed()) return run_sensitivity(g, sens_opts, sens_B, cold, !no_svg);
    if (bench->parsed()) return run_bench(g, bench_scen, bench_grid, bench_null, bench_R, bench_n, bench_est);
    if (verify->parsed()) return run_verify(g);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "estimation failed: " << e.what() << "\n";
    return 1;
  } catch (const std::logic_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
