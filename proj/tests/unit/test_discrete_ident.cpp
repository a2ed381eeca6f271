#include "doctest.h"
#include "helpers.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "catemnar/dgp.hpp"
#include "catemnar/discrete_ident.hpp"
#include "catemnar/stats.hpp"

using namespace catemnar;
using testutil::unit;

namespace {
constexpr auto B = VariableKind::Binary;

ObservedConditionals<double> make_oc(std::vector<std::vector<double>> th, std::vector<double> b) {
  ObservedConditionals<double> oc;
  oc.theta = DenseMatrix<double>(th.size(), th[0].size());
  for (std::size_t i = 0; i < th.size(); ++i)
    for (std::size_t j = 0; j < th[0].size(); ++j) oc.theta(i, j) = th[i][j];
  oc.b = std::move(b);
  for (std::size_t i = 0; i < th.size(); ++i) {
    oc.instrument_levels.push_back({double(i)});
    oc.row_counts.push_back(100);
  }
  for (std::size_t j = 0; j < th[0].size(); ++j) oc.outcome_levels.push_back(double(j));
  return oc;
}
}  // namespace

TEST_CASE("observed conditionals from a hand-built dataset") {
  // x = 0 throughout; x = 1 rows must be ignored.
  auto d = testutil::binary_dataset({
      unit(0, 0, 0), unit(0, 0, 1), unit(0, 0, std::nullopt), unit(0, 0, 0),
      unit(0, 1, 1), unit(0, 1, 1), unit(0, 1, std::nullopt), unit(0, 1, std::nullopt),
      unit(1, 1, 0), unit(std::nullopt, 1, 0), unit(0, std::nullopt, 1)});
  auto oc = estimate_observed_conditionals(d, InstrumentRole::Treatment, {{0.0}, {}, {}});
  REQUIRE(oc.theta.rows == 2);
  REQUIRE(oc.theta.cols == 2);
  // t=0: 4 units: y=0 twice, y=1 once, missing once.
  CHECK(oc.theta(0, 0) == doctest::Approx(0.5));
  CHECK(oc.theta(0, 1) == doctest::Approx(0.25));
  CHECK(oc.b[0] == doctest::Approx(0.25));
  // t=1: 4 units: y=1 twice, missing twice.
  CHECK(oc.theta(1, 0) == doctest::Approx(0.0));
  CHECK(oc.theta(1, 1) == doctest::Approx(0.5));
  CHECK(oc.b[1] == doctest::Approx(0.5));
  CHECK(oc.row_counts == std::vector<std::size_t>{4, 4});
  CHECK(check_observed_conditionals(oc));
}

TEST_CASE("observed conditionals without outcome missingness have b = 0") {
  auto d = testutil::binary_dataset({unit(1, 0, 0), unit(1, 0, 1), unit(1, 1, 1), unit(1, 1, 0)});
  auto oc = estimate_observed_conditionals(d, InstrumentRole::Treatment, {{1.0}, {}, {}});
  CHECK(oc.b == std::vector<double>{0.0, 0.0});
}

TEST_CASE("observed conditionals need two instrument levels") {
  auto d = testutil::binary_dataset({unit(1, 0, 0), unit(1, 0, 1), unit(0, 1, 1)});
  CHECK_THROWS_AS(estimate_observed_conditionals(d, InstrumentRole::Treatment, {{1.0}, {}, {}}),
                  InsufficientDataError);
}

TEST_CASE("covariate role conditions on t and uses x as instrument") {
  auto d = testutil::binary_dataset({unit(0, 1, 1), unit(0, 1, std::nullopt), unit(1, 1, 1),
                                     unit(1, 1, 0), unit(1, 0, 0)});
  auto oc = estimate_observed_conditionals(d, InstrumentRole::Covariate, {{0.0}, 1.0, {}});
  REQUIRE(oc.theta.rows == 2);
  CHECK(oc.b[0] == doctest::Approx(0.5));
  CHECK(oc.theta(1, 0) == doctest::Approx(0.5));
  CHECK(oc.theta(1, 1) == doctest::Approx(0.5));
}

TEST_CASE("completeness rank check") {
  DenseMatrix<double> m(2, 2);
  m(0, 0) = 0.3; m(0, 1) = 0.2; m(1, 0) = 0.1; m(1, 1) = 0.4;
  CHECK(0.3 * 0.4 - 0.2 * 0.1 == doctest::Approx(0.10));
  CHECK(completeness_rank_check(m, 1e-10).complete);

  DenseMatrix<double> dup(2, 2);
  dup(0, 0) = dup(1, 0) = 0.3; dup(0, 1) = dup(1, 1) = 0.2;
  auto rc = completeness_rank_check(dup, 1e-10);
  CHECK_FALSE(rc.complete);
  CHECK(rc.rank == 1);

  DenseMatrix<double> wide(2, 3);
  wide(0, 0) = 1; wide(1, 1) = 1; wide(0, 2) = 0.5;
  CHECK_FALSE(completeness_rank_check(wide, 1e-10).complete);

  DenseMatrix<Rational> q(2, 2);
  q(0, 0) = Rational(3, 10); q(0, 1) = Rational(1, 5); q(1, 0) = Rational(3, 5); q(1, 1) = Rational(2, 5);
  CHECK(completeness_rank_check(q).rank == 1);
}

TEST_CASE("solve_response_odds recovers forward-constructed odds") {
  const double z0 = 0.25, z1 = 0.5;
  auto oc = make_oc({{0.3, 0.2}, {0.1, 0.4}}, {0.3 * z0 + 0.2 * z1, 0.1 * z0 + 0.4 * z1});
  auto odds = solve_response_odds(oc);
  CHECK(odds.zeta[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(odds.zeta[1] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(odds.pi[1] == doctest::Approx(1 / 1.5));
}

TEST_CASE("solve_response_odds edge cases") {
  auto zero = solve_response_odds(make_oc({{0.3, 0.2}, {0.1, 0.4}}, {0.0, 0.0}));
  CHECK(zero.zeta == std::vector<double>{0.0, 0.0});
  CHECK(zero.pi == std::vector<double>{1.0, 1.0});
  CHECK_THROWS_AS(solve_response_odds(make_oc({{0.3, 0.2}, {0.3, 0.2}}, {0.1, 0.1})),
                  RankDeficientError);
  // Forward construction with a negative odds component is infeasible.
  CHECK_THROWS_AS(solve_response_odds(make_oc({{0.3, 0.2}, {0.1, 0.4}},
                                              {0.3 * -0.5 + 0.2 * 1.0, 0.1 * -0.5 + 0.4 * 1.0})),
                  InfeasibleOddsError);
}

TEST_CASE("identify_outcome_distribution recovers the generating conditionals") {
  // P(Y=1 | t) = (0.3, 0.7), response probabilities pi(y) = (0.8, 0.6).
  const double py1[2] = {0.3, 0.7}, pi[2] = {0.8, 0.6};
  std::vector<std::vector<double>> th(2, std::vector<double>(2));
  std::vector<double> b(2);
  for (int t = 0; t < 2; ++t) {
    const double p[2] = {1 - py1[t], py1[t]};
    for (int k = 0; k < 2; ++k) th[t][k] = p[k] * pi[k];
    b[t] = p[0] * (1 - pi[0]) + p[1] * (1 - pi[1]);
  }
  auto oc = make_oc(th, b);
  auto odds = solve_response_odds(oc);
  auto dist = identify_outcome_distribution(oc, odds);
  CHECK(dist.probs(0, 1) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(dist.probs(1, 1) == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(dist.diagnostics.empty());

  ResponseOdds<double> none{{0.0, 0.0}, {1.0, 1.0}};
  auto cc = identify_outcome_distribution(oc, none);
  CHECK(cc.probs(0, 1) == doctest::Approx(th[0][1] / (th[0][0] + th[0][1])));
  CHECK_FALSE(cc.diagnostics.empty());
}

TEST_CASE("exact rational round trip on random discrete laws") {
  std::mt19937_64 gen(17);
  std::uniform_int_distribution<int> num(1, 19);
  for (int rep = 0; rep < 20; ++rep) {
    Rational py1[2] = {Rational(num(gen), 20), Rational(num(gen), 20)};
    while (py1[1] == py1[0]) py1[1] = Rational(num(gen), 20);
    Rational pi[2] = {Rational(num(gen), 20), Rational(num(gen), 20)};
    ObservedConditionals<Rational> oc;
    oc.theta = DenseMatrix<Rational>(2, 2);
    oc.b.assign(2, Rational(0));
    for (int t = 0; t < 2; ++t) {
      const Rational p[2] = {1 - py1[t], py1[t]};
      for (int k = 0; k < 2; ++k) {
        oc.theta(t, k) = p[k] * pi[k];
        oc.b[t] += p[k] * (1 - pi[k]);
      }
    }
    auto odds = solve_response_odds(oc);
    auto dist = identify_outcome_distribution(oc, odds);
    for (int t = 0; t < 2; ++t) CHECK(dist.probs(t, 1) == py1[t]);
    for (int k = 0; k < 2; ++k) CHECK(odds.pi[k] == pi[k]);
  }
}

TEST_CASE("sampled A2 conditionals converge to the truth") {
  auto cfg = calibrate_scenario(default_scenario(B, B, B, AssumptionVariant::A2), 3);
  auto sim = simulate(cfg, 1000000, 8);
  double worst = 0;
  for (double x : {0.0, 1.0}) {
    auto oc = estimate_observed_conditionals(sim.observed, InstrumentRole::Treatment, {{x}, {}, {}});
    auto dist = identify_outcome_distribution(oc, solve_response_odds(oc));
    for (int t = 0; t < 2; ++t)
      worst = std::max(worst, std::abs(dist.probs(t, 1) - true_outcome_mean(cfg, x, t)));
  }
  CHECK(worst < 0.01);
}

TEST_CASE("cate_discrete under A2 and A3") {
  for (auto a : {AssumptionVariant::A2, AssumptionVariant::A3}) {
    auto cfg = calibrate_scenario(default_scenario(B, B, B, a), 4);
    auto sim = simulate(cfg, 100000, 21);
    for (double x : {0.0, 1.0}) {
      auto est = cate_discrete(sim.observed, {a, {}}, {x}, 1, 0);
      CHECK(std::abs(est.tau - true_cate(cfg, {x}, 1, 0)) < 0.03);
      CHECK_FALSE(est.null_identified);
    }
  }
}

TEST_CASE("cate_discrete on fully observed data equals the plug-in difference") {
  std::vector<Unit> us;
  std::mt19937 gen(5);
  std::bernoulli_distribution coin(0.5), y1(0.7), y0(0.4);
  double s[2] = {0, 0}, c[2] = {0, 0};
  for (int i = 0; i < 400; ++i) {
    const int t = coin(gen);
    const int y = t ? y1(gen) : y0(gen);
    us.push_back(unit(1.0, t, y));
    s[t] += y;
    c[t] += 1;
  }
  auto d = testutil::binary_dataset(us);
  auto est = cate_discrete(d, {AssumptionVariant::A2, {}}, {1.0}, 1, 0);
  CHECK(est.tau == doctest::Approx(s[1] / c[1] - s[0] / c[0]).epsilon(1e-12));
  auto cc = cate_discrete(d, {AssumptionVariant::A1, {}}, {1.0}, 1, 0);
  CHECK(cc.tau == doctest::Approx(est.tau).epsilon(1e-12));

  std::reverse(d.units.begin(), d.units.end());
  CHECK(cate_discrete(d, {AssumptionVariant::A2, {}}, {1.0}, 1, 0).tau ==
        doctest::Approx(est.tau).epsilon(1e-12));
}

TEST_CASE("cate_discrete flags the null regime under A2") {
  auto cfg = calibrate_scenario(default_scenario(B, B, B, AssumptionVariant::A2, true), 4);
  auto sim = simulate(cfg, 100000, 33);
  for (double x : {0.0, 1.0}) {
    auto est = cate_discrete(sim.observed, {AssumptionVariant::A2, {}}, {x}, 1, 0);
    CHECK(est.null_identified);
    CHECK(std::abs(est.tau) < 0.03);
  }
}
