#include "catemnar/study.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <sstream>

#include "catemnar/baselines.hpp"
#include "catemnar/parallel.hpp"
#include "catemnar/rng.hpp"
#include "catemnar/stats.hpp"

namespace catemnar {

std::string to_string(EstimatorKind e) {
  switch (e) {
    case EstimatorKind::Oracle: return "oracle";
    case EstimatorKind::Cca: return "cca";
    case EstimatorKind::MissInd: return "miss-ind";
    case EstimatorKind::Np: return "np";
    case EstimatorKind::Para: return "para";
  }
  return "?";
}

EstimatorKind parse_estimator(const std::string& s) {
  for (auto e : {EstimatorKind::Oracle, EstimatorKind::Cca, EstimatorKind::MissInd, EstimatorKind::Np,
                 EstimatorKind::Para})
    if (to_string(e) == s) return e;
  throw ConfigError("unknown estimator '" + s + "' (oracle, cca, miss-ind, np, para)");
}

void StudyConfig::validate() const {
  if (scenarios.empty()) throw ConfigError("study has no scenarios");
  if (estimators.empty()) throw ConfigError("study has no estimators");
  if (replicates < 1) throw ConfigError("study needs at least one replicate");
  if (n < 10) throw ConfigError("study sample size must be at least 10");
  for (const auto& s : scenarios) validate_scenario(s);
  sieve.validate();
  em.validate();
}

std::vector<double> study_query(const ScenarioConfig& cfg) {
  return {cfg.x_kind == VariableKind::Binary ? 1.0 : 0.0};
}

namespace {

CateEstimate run_estimator(EstimatorKind e, const SimulatedData& sim, const ScenarioConfig& sc,
                           const StudyConfig& cfg, const NpTuning* tuning, std::uint64_t em_seed) {
  const auto x = study_query(sc);
  const MissingnessAssumption a{sc.assumption.variant, {}};
  const OutcomeModel om = default_outcome_model(sim.observed);
  switch (e) {
    case EstimatorKind::Oracle: return oracle_fit(sim, om, x, 1.0, 0.0);
    case EstimatorKind::Cca: return cca_fit(sim.observed, om, x, 1.0, 0.0);
    case EstimatorKind::MissInd: return miss_indicator_fit(sim.observed, om, x, 1.0, 0.0);
    case EstimatorKind::Np: return estimate_cate_np(sim.observed, a, cfg.sieve, cfg.reg, x, 1.0, 0.0, tuning);
    case EstimatorKind::Para: {
      EmConfig em = cfg.em;
      em.seed = em_seed;
      return estimate_cate_param(sim.observed, om, default_missingness_model(a, sim.observed.p(), om.family),
                                 em, x, 1.0, 0.0);
    }
  }
  throw ConfigError("unknown estimator");
}

std::string fmt(const std::optional<double>& v) {
  if (!v) return "";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, *v);
  return std::string(buf, r.ptr);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string o = "\"";
  for (char c : s) o += c == '"' ? std::string("\"\"") : std::string(1, c);
  return o + "\"";
}

}  // namespace

StudyReport run_study(const StudyConfig& cfg, const ReplicateLogger& log) {
  cfg.validate();
  StudyReport rep;
  const std::size_t E = cfg.estimators.size();
  for (std::size_t s = 0; s < cfg.scenarios.size(); ++s) {
    const ScenarioConfig sc = calibrate_scenario(cfg.scenarios[s], derive_seed(cfg.seed, s));
    const double truth = true_cate(sc, study_query(sc), 1.0, 0.0);
    const bool use_np =
        std::find(cfg.estimators.begin(), cfg.estimators.end(), EstimatorKind::Np) != cfg.estimators.end();
    std::optional<NpTuning> tuning;
    std::string tuning_error;
    if (use_np) {
      try {
        const auto first = simulate(sc, cfg.n, derive_seed(cfg.seed, s, 0));
        tuning = tune_np(first.observed, {sc.assumption.variant, {}}, cfg.sieve);
      } catch (const Error& e) {
        tuning_error = e.what();
      }
    }

    std::vector<ReplicateRecord> recs(cfg.replicates * E);
    parallel_for(cfg.replicates, cfg.threads, [&](std::size_t r) {
      const auto sim = simulate(sc, cfg.n, derive_seed(cfg.seed, s, r));
      for (std::size_t k = 0; k < E; ++k) {
        ReplicateRecord& rec = recs[r * E + k];
        rec.scenario = sc.id;
        rec.estimator = cfg.estimators[k];
        rec.replicate = r;
        rec.true_tau = truth;
        try {
          if (rec.estimator == EstimatorKind::Np && !tuning) throw EstimationError(tuning_error);
          const auto est = run_estimator(rec.estimator, sim, sc, cfg, tuning ? &*tuning : nullptr,
                                         derive_seed(cfg.seed, s, r + 0x9e37));
          rec.tau_hat = est.tau;
          rec.error = est.tau - truth;
          if (truth != 0.0) rec.percent_bias = 100.0 * (est.tau - truth) / truth;
        } catch (const Error& e) {
          rec.status = std::string("failed: ") + e.what();
        }
      }
    });
    for (auto& r : recs) {
      if (log) log(r);
      rep.records.push_back(std::move(r));
    }
  }
  rep.summaries = summarize(rep.records);
  return rep;
}

std::vector<CellSummary> summarize(const std::vector<ReplicateRecord>& records) {
  std::vector<CellSummary> out;
  std::map<std::pair<std::string, EstimatorKind>, std::size_t> index;
  std::vector<std::vector<double>> vals;
  for (const auto& r : records) {
    const auto key = std::make_pair(r.scenario, r.estimator);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, out.size()).first;
      CellSummary c;
      c.scenario = r.scenario;
      c.estimator = r.estimator;
      c.metric = r.true_tau != 0.0 ? "percent_bias" : "error";
      out.push_back(c);
      vals.emplace_back();
    }
    CellSummary& c = out[it->second];
    const auto& v = c.metric == "percent_bias" ? r.percent_bias : r.error;
    if (r.status == "ok" && v) {
      ++c.ok;
      vals[it->second].push_back(*v);
    } else {
      ++c.failed;
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto& v = vals[i];
    if (v.empty()) continue;
    out[i].mean = mean(v);
    std::sort(v.begin(), v.end());
    out[i].median = quantile_sorted(v, 0.5);
    out[i].q1 = quantile_sorted(v, 0.25);
    out[i].q3 = quantile_sorted(v, 0.75);
  }
  return out;
}

std::string StudyReport::records_csv() const {
  std::ostringstream os;
  os << "scenario,estimator,replicate,tau_hat,true_tau,percent_bias,error,status\n";
  for (const auto& r : records)
    os << r.scenario << "," << to_string(r.estimator) << "," << r.replicate << "," << fmt(r.tau_hat) << ","
       << fmt(r.true_tau) << "," << fmt(r.percent_bias) << "," << fmt(r.error) << "," << csv_field(r.status)
       << "\n";
  return os.str();
}

std::string StudyReport::summary_csv() const {
  std::ostringstream os;
  os << "scenario,estimator,metric,ok,failed,mean,median,q1,q3,iqr\n";
  for (const auto& c : summaries)
    os << c.scenario << "," << to_string(c.estimator) << "," << c.metric << "," << c.ok << "," << c.failed << ","
       << fmt(c.mean) << "," << fmt(c.median) << "," << fmt(c.q1) << "," << fmt(c.q3) << "," << fmt(c.q3 - c.q1)
       << "\n";
  return os.str();
}

const CellSummary* StudyReport::find(const std::string& scenario, EstimatorKind e) const {
  for (const auto& c : summaries)
    if (c.scenario == scenario && c.estimator == e) return &c;
  return nullptr;
}

std::string render_study_boxplot(const StudyReport& report, const std::string& title) {
  std::vector<BoxGroup> groups;
  std::map<std::pair<std::string, EstimatorKind>, std::size_t> index;
  std::string metric = "percent bias";
  for (const auto& r : report.records) {
    const auto key = std::make_pair(r.scenario, r.estimator);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, groups.size()).first;
      groups.push_back({r.scenario + " " + to_string(r.estimator), {}});
    }
    const auto& v = r.true_tau != 0.0 ? r.percent_bias : r.error;
    if (r.true_tau == 0.0) metric = "estimation error";
    if (r.status == "ok" && v) groups[it->second].values.push_back(*v);
  }
  return render_boxplot(groups, title, metric);
}

}  // namespace catemnar
