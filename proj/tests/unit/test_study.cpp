#include "doctest.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "catemnar/config_io.hpp"
#include "catemnar/study.hpp"

using namespace catemnar;

namespace {

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.push_back("");
    rows.push_back(f);
  }
  return rows;
}

std::string shortest(double v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, r.ptr};
}

double q7(const std::vector<double>& s, double p) {
  const double h = (s.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(h);
  const auto hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (h - lo) * (s[hi] - s[lo]);
}

StudyConfig small_study() {
  StudyConfig c;
  c.scenarios = {scenario_from_id("bbb-A2"), scenario_from_id("bcc-A3"), scenario_from_id("bbb-A2-null")};
  c.estimators = {EstimatorKind::Oracle, EstimatorKind::Cca, EstimatorKind::Np, EstimatorKind::Para};
  c.replicates = 6;
  c.n = 400;
  c.seed = 42;
  return c;
}

}  // namespace

TEST_CASE("study smoke run with the oracle") {
  StudyConfig c;
  c.scenarios = {scenario_from_id("bbb-A1")};
  c.estimators = {EstimatorKind::Oracle};
  c.replicates = 10;
  std::size_t logged = 0;
  const auto r = run_study(c, [&](const ReplicateRecord&) { ++logged; });
  CHECK(r.records.size() == 10);
  CHECK(logged == 10);
  const auto* s = r.find("bbb-A1", EstimatorKind::Oracle);
  REQUIRE(s);
  CHECK(s->ok == 10);
  CHECK(std::isfinite(s->mean));
  CHECK(s->metric == "percent_bias");
}

TEST_CASE("study output is a pure function of config and seed") {
  auto c = small_study();
  const auto a = run_study(c);
  c.threads = 3;
  const auto b = run_study(c);
  CHECK(a.records_csv() == b.records_csv());
  CHECK(a.summary_csv() == b.summary_csv());
  CHECK(render_study_boxplot(a, "x") == render_study_boxplot(b, "x"));
  c.seed = 43;
  CHECK(run_study(c).records_csv() != a.records_csv());
}

TEST_CASE("summary is recomputable from the replicate csv") {
  const auto rep = run_study(small_study());
  const auto recs = parse_csv(rep.records_csv());
  const auto sums = parse_csv(rep.summary_csv());
  REQUIRE(recs.size() > 1);
  REQUIRE(sums.size() == 1 + 3 * 4);
  for (std::size_t i = 1; i < sums.size(); ++i) {
    const auto& s = sums[i];
    const bool pb = s[2] == "percent_bias";
    std::vector<double> v;
    std::size_t failed = 0;
    for (std::size_t j = 1; j < recs.size(); ++j) {
      const auto& r = recs[j];
      if (r[0] != s[0] || r[1] != s[1]) continue;
      const std::string& cell = pb ? r[5] : r[6];
      if (r[7] == "ok" && !cell.empty())
        v.push_back(std::stod(cell));
      else
        ++failed;
    }
    CHECK(s[3] == std::to_string(v.size()));
    CHECK(s[4] == std::to_string(failed));
    double sum = 0;
    for (double x : v) sum += x;
    std::sort(v.begin(), v.end());
    CHECK(s[5] == shortest(sum / v.size()));
    CHECK(s[6] == shortest(q7(v, 0.5)));
    CHECK(s[7] == shortest(q7(v, 0.25)));
    CHECK(s[8] == shortest(q7(v, 0.75)));
  }
  const auto* null_cell = rep.find("bbb-A2-null", EstimatorKind::Para);
  REQUIRE(null_cell);
  CHECK(null_cell->metric == "error");
}

TEST_CASE("study query follows the covariate kind") {
  CHECK(study_query(scenario_from_id("bcb-A2")) == std::vector<double>{1.0});
  CHECK(study_query(scenario_from_id("cbb-A2")) == std::vector<double>{0.0});
}

TEST_CASE("scenario ids and json round trip") {
  const auto s = scenario_from_id("cbc-A3-null");
  CHECK(s.x_kind == VariableKind::Continuous);
  CHECK(s.t_kind == VariableKind::Binary);
  CHECK(s.y_kind == VariableKind::Continuous);
  CHECK(s.null_effect);
  CHECK(s.assumption.variant == AssumptionVariant::A3);
  const auto back = scenario_from_json(scenario_to_json(s));
  CHECK(scenario_to_json(back) == scenario_to_json(s));
  CHECK_THROWS_AS(scenario_from_id("bxb-A2"), ConfigError);
  CHECK_THROWS_AS(scenario_from_id("bbb-A9"), ConfigError);
  CHECK_THROWS_AS(scenario_from_json(Json{{"id", "bbb-A2"}, {"colour", 1}}), ConfigError);
  const auto o = scenario_from_json(Json{{"id", "bbb-A2"}, {"y_params", {{"beta_t", 0.0}}}});
  CHECK(o.y_params.beta_t == 0.0);
}

TEST_CASE("run config parsing") {
  const Json j = {{"scenarios", {"bbb-A2", {{"id", "ccc-A1"}}}},
                  {"assumption", "A3"},
                  {"identifying_covariates", {1}},
                  {"query", {{"x", {0.5}}, {"t1", 2.0}}},
                  {"sieve", {{"J", 3}, {"basis", "saturated-binary"}}},
                  {"regularization", {{"B", 4.0}, {"pi_min", 0.1}}},
                  {"em", {{"M", 20}, {"tol", 1e-9}}},
                  {"bootstrap", {{"B", 30}, {"level", 0.9}}},
                  {"sensitivity", {{"grid", {-1.0, 0.0, 1.0}}, {"warm_start", false}}},
                  {"estimators", {"cca", "para"}},
                  {"replicates", 7},
                  {"seed", 9}};
  const auto rc = run_config_from_json(j);
  CHECK(rc.scenarios.size() == 2);
  CHECK(rc.assumption.variant == AssumptionVariant::A3);
  CHECK(rc.assumption.identifying_covariates == std::vector<std::size_t>{0});
  CHECK(rc.x == std::vector<double>{0.5});
  CHECK(rc.t1 == 2.0);
  CHECK(rc.sieve.J == 3);
  CHECK(rc.sieve.basis_kind == BasisKind::SaturatedBinary);
  CHECK(rc.reg.bound_B == 4.0);
  CHECK(rc.em.M == 20);
  CHECK(rc.bootstrap == 30);
  CHECK(rc.level == 0.9);
  CHECK(rc.delta_grid.size() == 3);
  CHECK_FALSE(rc.warm_start);
  CHECK(rc.estimators == std::vector<EstimatorKind>{EstimatorKind::Cca, EstimatorKind::Para});
  CHECK(rc.replicates == 7);
  CHECK(rc.seed == 9);

  CHECK_THROWS_AS(run_config_from_json(Json{{"replicats", 3}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(Json{{"em", {{"M", 1}}}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(Json{{"identifying_covariates", {0}}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(Json{{"n", "many"}}), ConfigError);
  CHECK_THROWS_AS(load_run_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("estimate json carries interval and diagnostics") {
  CateEstimate e;
  e.tau = 0.25;
  e.estimator = "para-A2";
  e.x_query = {1.0};
  e.diagnostics["em_iterations"] = 12;
  e.interval = Interval{0.1, 0.4, 0.95, false, 1, 200};
  const auto j = estimate_to_json(e);
  CHECK(j["tau"] == 0.25);
  CHECK(j["interval"]["lower"] == 0.1);
  CHECK(j["interval"]["failed_resamples"] == 1);
  CHECK(j["diagnostics"]["em_iterations"] == 12.0);
}
