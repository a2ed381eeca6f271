#include "doctest.h"

#include <cmath>
#include <map>
#include <random>

#include "catemnar/dgp.hpp"
#include "catemnar/stats.hpp"

using namespace catemnar;
namespace {
constexpr auto B = VariableKind::Binary;
constexpr auto C = VariableKind::Continuous;

double missing_rate_x(const Dataset& d) {
  double m = 0;
  for (const auto& u : d.units) m += u.rx[0] == 0;
  return m / static_cast<double>(d.n());
}
double missing_rate_t(const Dataset& d) {
  double m = 0;
  for (const auto& u : d.units) m += u.rt == 0;
  return m / static_cast<double>(d.n());
}
double missing_rate_y(const Dataset& d) {
  double m = 0;
  for (const auto& u : d.units) m += u.ry == 0;
  return m / static_cast<double>(d.n());
}
}  // namespace

TEST_CASE("calibrate_intercept with a degenerate predictor") {
  LogitSampler zero = [](Rng&) { return 0.0; };
  CHECK(std::abs(calibrate_intercept(zero, 0.8, 1) - std::log(4.0)) < 0.01);
  CHECK(std::abs(calibrate_intercept(zero, 0.5, 1)) < 5e-3);
}

TEST_CASE("calibrate_intercept reports an unreachable target") {
  LogitSampler huge = [](Rng&) { return 100.0; };
  CHECK_THROWS_AS(calibrate_intercept(huge, 0.2, 1), CalibrationError);
}

TEST_CASE("calibrated covariate-response intercept hits the target rate") {
  auto cfg = calibrate_scenario(default_scenario(B, B, B, AssumptionVariant::A2), 11);
  REQUIRE(cfg.rx_params.gamma0);
  // Independent Monte Carlo oracle with a different generator.
  std::mt19937 gen(2024);
  std::bernoulli_distribution bx(0.5);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double acc = 0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) {
    const double x = bx(gen);
    const double pt = 1.0 / (1.0 + std::exp(-(-0.3 + 0.9 * x)));
    const double t = unif(gen) < pt ? 1.0 : 0.0;
    acc += 1.0 / (1.0 + std::exp(-(*cfg.rx_params.gamma0 + 0.6 * x - 0.4 * t)));
  }
  CHECK(std::abs(acc / n - 0.8) <= 0.01);
}

TEST_CASE("simulate hits roughly twenty percent missingness per variable") {
  auto sim = simulate(default_scenario(B, B, B, AssumptionVariant::A2), 100000, 5);
  CHECK(std::abs(missing_rate_x(sim.observed) - 0.2) <= 0.02);
  CHECK(std::abs(missing_rate_t(sim.observed) - 0.2) <= 0.02);
  CHECK(std::abs(missing_rate_y(sim.observed) - 0.2) <= 0.02);
  CHECK(validate_dataset(sim.observed).empty());
}

TEST_CASE("every kind combination and assumption simulates a valid dataset") {
  for (auto a : {AssumptionVariant::A1, AssumptionVariant::A2, AssumptionVariant::A3}) {
    for (const auto& cfg : scenario_grid(a)) {
      auto sim = simulate(cfg, 20000, 3);
      CHECK(validate_dataset(sim.observed).empty());
      CHECK(std::abs(missing_rate_y(sim.observed) - 0.2) <= 0.03);
    }
  }
}

TEST_CASE("zero coefficients and saturated intercepts give no missingness") {
  auto cfg = default_scenario(C, C, C, AssumptionVariant::A1);
  cfg.rx_params = {20.0, 0.0, 0.0};
  cfg.rt_params = {20.0, 0.0, 0.0, 0.0};
  cfg.ry_params.phi0 = 20.0;
  cfg.ry_params.u_x = cfg.ry_params.u_t = cfg.ry_params.u_y = 0.0;
  auto sim = simulate(cfg, 1000, 9);
  CHECK(complete_cases(sim.observed).n() == 1000);
}

TEST_CASE("simulate is deterministic and masks the latent data") {
  auto cfg = calibrate_scenario(default_scenario(C, B, C, AssumptionVariant::A3), 1);
  auto a = simulate(cfg, 500, 42);
  auto b = simulate(cfg, 500, 42);
  REQUIRE(a.observed.n() == b.observed.n());
  for (std::size_t i = 0; i < a.observed.n(); ++i) {
    const auto &u = a.observed.units[i], &v = b.observed.units[i], &l = a.latent.units[i];
    CHECK(u.x == v.x);
    CHECK(u.t == v.t);
    CHECK(u.y == v.y);
    CHECK(u.rx == v.rx);
    CHECK(u.ry == v.ry);
    CHECK(l.ry == 1);
    if (u.rx[0]) CHECK(*u.x[0] == *l.x[0]);
    if (u.rt) CHECK(*u.t == *l.t);
    if (u.ry) CHECK(*u.y == *l.y);
  }
}

TEST_CASE("outcome missingness does not depend on T within strata under A2") {
  auto cfg = calibrate_scenario(default_scenario(B, B, B, AssumptionVariant::A2), 7);
  int rejections = 0;
  int tests = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    auto sim = simulate(cfg, 100000, 100 + s);
    // stratum (x, y, rx, rt) -> table[t][ry]
    std::map<std::array<int, 4>, std::vector<std::vector<double>>> strata;
    for (std::size_t i = 0; i < sim.latent.n(); ++i) {
      const auto& l = sim.latent.units[i];
      const auto& o = sim.observed.units[i];
      auto& tab = strata[{int(*l.x[0]), int(*l.y), int(o.rx[0]), int(o.rt)}];
      tab.resize(2, std::vector<double>(2, 0.0));
      tab[int(*l.t)][o.ry] += 1;
    }
    for (auto& [k, tab] : strata) {
      ++tests;
      rejections += chi_square_independence_pvalue(tab) < 0.01;
    }
  }
  // 320 tests at level 0.01: expect about 3 rejections.
  CHECK(rejections <= 12);
}

TEST_CASE("outcome missingness does depend on T under A1") {
  auto cfg = calibrate_scenario(default_scenario(B, B, B, AssumptionVariant::A1), 7);
  auto sim = simulate(cfg, 100000, 1);
  std::vector<std::vector<double>> tab(2, std::vector<double>(2, 0.0));
  for (std::size_t i = 0; i < sim.latent.n(); ++i)
    if (*sim.latent.units[i].x[0] == 0)
      tab[int(*sim.latent.units[i].t)][sim.observed.units[i].ry] += 1;
  CHECK(chi_square_independence_pvalue(tab) < 1e-6);
}

TEST_CASE("true_cate values") {
  auto cc = default_scenario(B, B, C, AssumptionVariant::A1);
  CHECK(true_cate(cc, {0.0}, 1, 0) == doctest::Approx(1.0));
  auto bb = default_scenario(B, B, B, AssumptionVariant::A1);
  const double oracle = 1 / (1 + std::exp(-2.1)) - 1 / (1 + std::exp(-0.5));
  CHECK(true_cate(bb, {1.0}, 1, 0) == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(true_cate(bb, {1.0}, 1, 0) == doctest::Approx(0.2684).epsilon(1e-3));
  auto null = default_scenario(C, C, B, AssumptionVariant::A2, true);
  CHECK(true_cate(null, {0.7}, 1, 0) == 0.0);
}

TEST_CASE("scenario validation") {
  auto cfg = default_scenario(B, B, B, AssumptionVariant::A2);
  CHECK_NOTHROW(validate_scenario(cfg));
  cfg.ry_params.u_t = 0.3;  // A2 forbids T as a parent of R^Y
  CHECK_THROWS_AS(validate_scenario(cfg), ConfigError);
  auto nul = default_scenario(B, B, B, AssumptionVariant::A2, true);
  CHECK(nul.y_params.beta_t == 0.0);
  nul.y_params.beta_tx = 0.1;
  CHECK_THROWS_AS(validate_scenario(nul), ConfigError);
  CHECK(scenario_id(B, C, B, AssumptionVariant::A2, false) == "bcb-A2");
  CHECK(scenario_grid(AssumptionVariant::A3).size() == 8);
}
