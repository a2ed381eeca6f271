#include "doctest.h"
#include "em_oracle.hpp"
#include "helpers.hpp"

#include <cmath>
#include <random>

#include "catemnar/dgp.hpp"
#include "catemnar/param_em.hpp"
#include "catemnar/stats.hpp"

using namespace catemnar;
using testutil::unit;

namespace {

OutcomeModel bernoulli_model(const Eigen::Vector4d& beta) {
  OutcomeModel m;
  m.family = OutcomeFamily::BernoulliLogit;
  m.design = outcome_design_main_and_interactions(1);
  m.beta = beta;
  return m;
}

MissingnessModel a2_model(const Eigen::Vector3d& lambda) {
  auto m = default_missingness_model({AssumptionVariant::A2, {}}, 1);
  m.lambda = lambda;
  return m;
}

}  // namespace

TEST_CASE("default response designs respect the assumptions") {
  auto a2 = default_missingness_model({AssumptionVariant::A2, {}}, 2);
  CHECK(a2.design.labels() == std::vector<std::string>{"intercept", "x1", "x2", "y"});
  auto a3 = default_missingness_model({AssumptionVariant::A3, {1}}, 2);
  CHECK(a3.design.labels() == std::vector<std::string>{"intercept", "t", "x1", "y"});
  auto a1 = default_missingness_model({AssumptionVariant::A1, {}}, 1, OutcomeFamily::TwoPart);
  CHECK(a1.design.labels() == std::vector<std::string>{"intercept", "x1", "t"});
  auto tp = default_missingness_model({AssumptionVariant::A2, {}}, 1, OutcomeFamily::TwoPart);
  CHECK(tp.design.labels().back() == "d");

  auto bad = a2;
  bad.design = Design::parse({"intercept", "t", "y"});
  CHECK_THROWS_AS(bad.validate(2), ConfigError);
  auto bad3 = a3;
  bad3.design = Design::parse({"intercept", "x2", "y"});
  CHECK_THROWS_AS(bad3.validate(2), ConfigError);
  CHECK_THROWS_AS(default_missingness_model({AssumptionVariant::General, {}}, 1), ConfigError);
}

TEST_CASE("offsets per sensitivity family") {
  auto m = default_missingness_model({AssumptionVariant::A3, {0, 1}}, 3);
  m.offset_term = OffsetTerm::IdentifyingCovariates;
  m.offset_delta = 0.5;
  CHECK(m.offset({1.0, 1.0, 1.0}, 0.0, 0.0) == doctest::Approx(1.0));
  m.offset_term = OffsetTerm::Treatment;
  CHECK(m.offset({0, 0, 0}, 2.0, 0.0) == doctest::Approx(1.0));
  m.offset_term = OffsetTerm::Outcome;
  CHECK(m.offset({0, 0, 0}, 0.0, 3.0) == doctest::Approx(1.5));
  m.offset_on_indicator = true;
  CHECK(m.offset({0, 0, 0}, 0.0, 3.0) == doctest::Approx(0.5));
}

TEST_CASE("initial outcome fit on complete cases") {
  std::vector<Unit> us;
  for (int t = 0; t < 2; ++t)
    for (double x : {-1.0, 0.0, 1.0, 2.0}) us.push_back(unit(x, t, 1 + 2 * t + 3 * x));
  us.push_back(unit(0.5, 1, std::nullopt));
  Dataset d;
  d.x_kinds = {VariableKind::Continuous};
  d.t_kind = VariableKind::Binary;
  d.y_kind = VariableKind::Continuous;
  d.units = us;
  OutcomeModel m;
  m.family = OutcomeFamily::GaussianLinear;
  m.design = Design::parse({"1", "t", "x1"});
  auto f = fit_initial_outcome(d, m);
  CHECK(f.beta(0) == doctest::Approx(1.0));
  CHECK(f.beta(1) == doctest::Approx(2.0));
  CHECK(f.beta(2) == doctest::Approx(3.0));
  CHECK(f.sigma < 1e-10);

  d.units.resize(3);
  CHECK_THROWS_AS(fit_initial_outcome(d, m), InsufficientDataError);
}

TEST_CASE("exact E-step posterior") {
  Unit u = unit(0, 0, std::nullopt);
  // lambda = 0: flat selection, posterior is the outcome model.
  auto om = bernoulli_model(Eigen::Vector4d(0.3, 0, 0, 0));
  auto post = e_step_exact_discrete(u, om, a2_model(Eigen::Vector3d::Zero()));
  CHECK(post[1] == doctest::Approx(expit(0.3)).epsilon(1e-12));

  // P(y=1) = 0.5, pi(y=1) = 0.9, pi(y=0) = 0.5: posterior(1) = 0.05 / 0.30.
  auto half = bernoulli_model(Eigen::Vector4d::Zero());
  auto mm = a2_model(Eigen::Vector3d(0.0, 0.0, logit(0.9)));
  post = e_step_exact_discrete(u, half, mm);
  CHECK(post[1] == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
  CHECK(post[0] + post[1] == doctest::Approx(1.0));

  auto degenerate = bernoulli_model(Eigen::Vector4d(40, 0, 0, 0));
  post = e_step_exact_discrete(u, degenerate, mm);
  CHECK(post[1] == doctest::Approx(1.0));
}

TEST_CASE("fractional weights") {
  auto w = normalize_log_weights({std::log(0.3), std::log(0.1)});
  CHECK(w[0] == doctest::Approx(0.75));
  CHECK(w[1] == doctest::Approx(0.25));
  CHECK(effective_sample_size({0.25, 0.25, 0.25, 0.25}) == doctest::Approx(4.0));
  CHECK_THROWS_AS(normalize_log_weights({-INFINITY, -INFINITY}), EstimationError);

  // Response constant in y and beta at the proposal: uniform weights, ESS = M.
  auto cfg = calibrate_scenario(default_scenario(VariableKind::Binary, VariableKind::Binary,
                                                  VariableKind::Continuous, AssumptionVariant::A2), 1);
  auto sim = simulate(cfg, 300, 2);
  auto om = fit_initial_outcome(sim.observed, default_outcome_model(sim.observed));
  auto mm = default_missingness_model({AssumptionVariant::A2, {}}, 1);
  mm.lambda = Eigen::Vector3d(1.0, 0.3, 0.0);
  EmConfig ec;
  ec.M = 20;
  auto imp = fractional_impute(sim.observed, om, om, mm, ec);
  REQUIRE_FALSE(imp.empty());
  for (const auto& iu : imp) {
    CHECK(iu.draws.size() == 20);
    for (double v : iu.weights) CHECK(v == doctest::Approx(1.0 / 20));
    CHECK(iu.ess == doctest::Approx(20.0));
  }
  // Outcome-dependent response tilts the weights; ESS drops below M.
  mm.lambda(2) = -1.5;
  update_fractional_weights(imp, sim.observed, om, om, mm);
  CHECK(imp[0].ess < 20.0);
  double s = 0;
  for (double v : imp[0].weights) s += v;
  CHECK(s == doctest::Approx(1.0));
}

TEST_CASE("EM without missing outcomes is one M-step at the complete-case MLE") {
  auto cfg = calibrate_scenario(default_scenario(VariableKind::Binary, VariableKind::Binary,
                                                  VariableKind::Binary, AssumptionVariant::A2), 1);
  auto sim = simulate(cfg, 500, 4);
  auto om = default_outcome_model(sim.latent);
  auto mm = default_missingness_model({AssumptionVariant::A2, {}}, 1);
  auto fit = fit_em(sim.latent, om, mm, EmConfig{});
  auto cc = fit_initial_outcome(sim.latent, om);
  CHECK(fit.trace.iterations == 1);
  for (int k = 0; k < 4; ++k) CHECK(fit.outcome.beta(k) == cc.beta(k));
  CHECK(fit.trace.lambda_clipped);
  CHECK_FALSE(fit.trace.diagnostics.empty());
}

TEST_CASE("EM matches brute-force likelihood maximization on a small instance") {
  int checked = 0;
  for (std::uint64_t seed = 1; checked < 2 && seed < 200; ++seed) {
    auto d = emoracle::draw_instance(seed);
    auto oracle = emoracle::grid_search(emoracle::count(d), 3.0, 0.1);
    if (!oracle.interior) continue;
    ++checked;
    EmConfig ec;
    ec.tol = 1e-13;
    ec.max_iter = 200000;
    auto fit = fit_em(d, bernoulli_model(Eigen::Vector4d::Zero()),
                      default_missingness_model({AssumptionVariant::A2, {}}, 1), ec);
    CHECK(fit.trace.converged);
    for (int k = 0; k < 4; ++k) CHECK(std::abs(fit.outcome.beta(k) - oracle.beta[k]) < 0.05);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(fit.missingness.lambda(k) - oracle.lambda[k]) < 0.05);
    for (std::size_t i = 1; i < fit.trace.loglik.size(); ++i)
      CHECK(fit.trace.loglik[i] >= fit.trace.loglik[i - 1] - 1e-10 * std::abs(fit.trace.loglik[i - 1]));
    CHECK(fit.trace.loglik.back() == doctest::Approx(oracle.loglik).epsilon(1e-6));
  }
  CHECK(checked == 2);
}

TEST_CASE("EM recovers generating coefficients at large n") {
  // Sampling sd of the interaction coefficient is about 0.045 at this n, so
  // a single draw is compared through the average of four replicates.
  auto cfg = calibrate_scenario(default_scenario(VariableKind::Binary, VariableKind::Binary,
                                                  VariableKind::Binary, AssumptionVariant::A2), 1);
  const double truth[4] = {-0.4, 1.1, 0.9, 0.5};
  const double lam_truth[2] = {-0.8, 2.2};
  double beta[4] = {0, 0, 0, 0}, lam[2] = {0, 0};
  const int reps = 4;
  for (int r = 0; r < reps; ++r) {
    auto sim = simulate(cfg, 100000, 12 + r);
    auto fit = fit_em(sim.observed, default_outcome_model(sim.observed),
                      default_missingness_model({AssumptionVariant::A2, {}}, 1), EmConfig{});
    CHECK(fit.trace.converged);
    for (int k = 0; k < 4; ++k) beta[k] += fit.outcome.beta(k) / reps;
    for (int k = 0; k < 2; ++k) lam[k] += fit.missingness.lambda(k + 1) / reps;
  }
  for (int k = 0; k < 4; ++k) CHECK(std::abs(beta[k] - truth[k]) < 0.05);
  for (int k = 0; k < 2; ++k) CHECK(std::abs(lam[k] - lam_truth[k]) < 0.1);
}

TEST_CASE("fitted response probability ignores the excluded variable") {
  auto cfg = calibrate_scenario(default_scenario(VariableKind::Binary, VariableKind::Continuous,
                                                  VariableKind::Binary, AssumptionVariant::A3), 1);
  auto sim = simulate(cfg, 2000, 5);
  auto mm = default_missingness_model({AssumptionVariant::A3, {}}, 1);
  auto fit = fit_em(sim.observed, default_outcome_model(sim.observed), mm, EmConfig{});
  CHECK(fit.missingness.prob({0.0}, 0.3, 1.0) == fit.missingness.prob({1.0}, 0.3, 1.0));
  auto cfg2 = calibrate_scenario(default_scenario(VariableKind::Binary, VariableKind::Continuous,
                                                   VariableKind::Binary, AssumptionVariant::A2), 1);
  auto sim2 = simulate(cfg2, 2000, 5);
  auto fit2 = fit_em(sim2.observed, default_outcome_model(sim2.observed),
                     default_missingness_model({AssumptionVariant::A2, {}}, 1), EmConfig{});
  CHECK(fit2.missingness.prob({1.0}, -1.0, 0.0) == fit2.missingness.prob({1.0}, 2.0, 0.0));
}

TEST_CASE("null effect under A2 is estimated near zero") {
  auto cfg = calibrate_scenario(default_scenario(VariableKind::Binary, VariableKind::Binary,
                                                  VariableKind::Binary, AssumptionVariant::A2, true), 1);
  auto sim = simulate(cfg, 100000, 6);
  auto est = estimate_cate_param(sim.observed, default_outcome_model(sim.observed),
                                 default_missingness_model({AssumptionVariant::A2, {}}, 1), EmConfig{},
                                 {1.0}, 1, 0);
  CHECK(std::abs(est.tau) < 0.03);
}

TEST_CASE("continuous outcome under A2 via fractional imputation") {
  auto cfg = calibrate_scenario(default_scenario(VariableKind::Continuous, VariableKind::Continuous,
                                                  VariableKind::Continuous, AssumptionVariant::A2), 1);
  auto sim = simulate(cfg, 20000, 3);
  EmFit fit;
  auto est = estimate_cate_param(sim.observed, default_outcome_model(sim.observed),
                                 default_missingness_model({AssumptionVariant::A2, {}}, 1), EmConfig{},
                                 {0.0}, 1, 0, nullptr, &fit);
  CHECK_FALSE(fit.trace.exact_e_step);
  CHECK(fit.trace.converged);
  CHECK(std::abs(est.tau - 1.0) < 0.06);
  CHECK(std::abs(fit.outcome.sigma - 1.0) < 0.05);
  // Monte Carlo log-likelihood with frozen draws never decreases.
  for (std::size_t i = 1; i < fit.trace.loglik.size(); ++i)
    CHECK(fit.trace.loglik[i] >= fit.trace.loglik[i - 1] - 1e-9 * std::abs(fit.trace.loglik[i - 1]));
  for (double g : fit.trace.q_gain) CHECK(g >= -1e-9);
}

TEST_CASE("completeness warning when the treatment does not move a Gaussian outcome") {
  auto cfg = calibrate_scenario(default_scenario(VariableKind::Binary, VariableKind::Binary,
                                                  VariableKind::Continuous, AssumptionVariant::A2, true), 1);
  auto sim = simulate(cfg, 3000, 8);
  auto est = estimate_cate_param(sim.observed, default_outcome_model(sim.observed),
                                 default_missingness_model({AssumptionVariant::A2, {}}, 1), EmConfig{},
                                 {1.0}, 1, 0);
  CHECK(est.diagnostics.count("completeness_warning") == 1);
  auto cfg2 = calibrate_scenario(default_scenario(VariableKind::Binary, VariableKind::Binary,
                                                   VariableKind::Continuous, AssumptionVariant::A2), 1);
  auto sim2 = simulate(cfg2, 3000, 8);
  auto est2 = estimate_cate_param(sim2.observed, default_outcome_model(sim2.observed),
                                  default_missingness_model({AssumptionVariant::A2, {}}, 1), EmConfig{},
                                  {1.0}, 1, 0);
  CHECK(est2.diagnostics.count("completeness_warning") == 0);
}

TEST_CASE("same seed gives bitwise identical fits") {
  auto cfg = calibrate_scenario(default_scenario(VariableKind::Binary, VariableKind::Binary,
                                                  VariableKind::Continuous, AssumptionVariant::A3), 1);
  auto sim = simulate(cfg, 800, 8);
  auto om = default_outcome_model(sim.observed);
  auto mm = default_missingness_model({AssumptionVariant::A3, {}}, 1);
  EmConfig ec;
  ec.seed = 77;
  auto a = estimate_cate_param(sim.observed, om, mm, ec, {1.0}, 1, 0);
  auto b = estimate_cate_param(sim.observed, om, mm, ec, {1.0}, 1, 0);
  CHECK(a.tau == b.tau);
}
