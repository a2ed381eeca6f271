#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "catemnar/core.hpp"
#include "catemnar/design.hpp"
#include "catemnar/glm.hpp"

using namespace catemnar;

namespace {

// Plain-loop Newton solver for weighted logistic regression, independent of
// Eigen, used as an oracle.
std::vector<double> oracle_logistic(const std::vector<std::vector<double>>& X, const std::vector<double>& y) {
  const std::size_t n = X.size(), k = X[0].size();
  std::vector<double> b(k, 0.0);
  for (int it = 0; it < 100; ++it) {
    std::vector<double> g(k, 0.0);
    std::vector<std::vector<double>> H(k, std::vector<double>(k + 1, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      double eta = 0;
      for (std::size_t j = 0; j < k; ++j) eta += X[i][j] * b[j];
      const double p = 1.0 / (1.0 + std::exp(-eta));
      for (std::size_t j = 0; j < k; ++j) {
        g[j] += X[i][j] * (y[i] - p);
        for (std::size_t l = 0; l < k; ++l) H[j][l] += X[i][j] * X[i][l] * p * (1 - p);
      }
    }
    for (std::size_t j = 0; j < k; ++j) H[j][k] = g[j];
    // Gauss-Jordan with partial pivoting.
    for (std::size_t c = 0; c < k; ++c) {
      std::size_t piv = c;
      for (std::size_t r = c + 1; r < k; ++r)
        if (std::abs(H[r][c]) > std::abs(H[piv][c])) piv = r;
      std::swap(H[c], H[piv]);
      for (std::size_t r = 0; r < k; ++r) {
        if (r == c) continue;
        const double f = H[r][c] / H[c][c];
        for (std::size_t l = c; l <= k; ++l) H[r][l] -= f * H[c][l];
      }
    }
    double step = 0;
    for (std::size_t j = 0; j < k; ++j) {
      const double s = H[j][k] / H[j][j];
      b[j] += s;
      step = std::max(step, std::abs(s));
    }
    if (step < 1e-14) break;
  }
  return b;
}

}  // namespace

TEST_CASE("design parsing and evaluation") {
  auto d = Design::parse({"intercept", "t", "x1", "t:x2", "d", "y:x1"});
  CHECK(d.dim() == 6);
  CHECK(d.labels()[3] == "t:x2");
  CHECK(d.covariates_needed() == 2);
  CHECK(d.uses(FactorKind::D));
  CHECK_FALSE(Design::parse({"1", "x1"}).uses(FactorKind::T));
  auto r = d.row({2.0, 3.0}, 0.5, -1.5);
  CHECK(r(0) == 1.0);
  CHECK(r(1) == 0.5);
  CHECK(r(2) == 2.0);
  CHECK(r(3) == 1.5);
  CHECK(r(4) == 0.0);
  CHECK(r(5) == -3.0);
  CHECK_THROWS_AS(Design::parse({"z"}), ConfigError);
  CHECK_THROWS_AS(Design::parse({"x0"}), ConfigError);
  CHECK_THROWS_AS(Design::parse({"t", "t"}), ConfigError);
  CHECK(outcome_design_main_and_interactions(1).labels() ==
        std::vector<std::string>{"intercept", "t", "x1", "t:x1"});
}

TEST_CASE("gaussian fit recovers a noiseless linear model") {
  Eigen::MatrixXd X(8, 3);
  Eigen::VectorXd y(8);
  int i = 0;
  for (int t = 0; t < 2; ++t)
    for (double x : {-1.0, 0.0, 0.5, 2.0}) {
      X.row(i) << 1.0, t, x;
      y(i) = 1 + 2 * t + 3 * x;
      ++i;
    }
  auto f = fit_gaussian(X, y, Eigen::VectorXd::Ones(8));
  CHECK(f.beta(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(f.beta(1) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(f.beta(2) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(f.dispersion < 1e-20);
}

TEST_CASE("logistic fit matches an independent Newton solver") {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud;
  std::vector<std::vector<double>> rows;
  std::vector<double> ys;
  const int n = 400;
  Eigen::MatrixXd X(n, 3);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    const double t = ud(gen) < 0.5 ? 1.0 : 0.0, x = nd(gen);
    const double p = 1 / (1 + std::exp(-(0.2 + 0.8 * t - 0.6 * x)));
    const double yi = ud(gen) < p ? 1.0 : 0.0;
    rows.push_back({1.0, t, x});
    ys.push_back(yi);
    X.row(i) << 1.0, t, x;
    y(i) = yi;
  }
  auto oracle = oracle_logistic(rows, ys);
  auto f = fit_logistic(X, y, Eigen::VectorXd::Ones(n));
  CHECK(f.converged);
  for (int j = 0; j < 3; ++j) CHECK(std::abs(f.beta(j) - oracle[j]) < 1e-6);

  // Duplicating every row is the same as weight 2.
  Eigen::MatrixXd X2(2 * n, 3);
  Eigen::VectorXd y2(2 * n);
  X2 << X, X;
  y2 << y, y;
  auto f2 = fit_logistic(X2, y2, Eigen::VectorXd::Ones(2 * n));
  auto fw = fit_logistic(X, y, Eigen::VectorXd::Constant(n, 2.0));
  for (int j = 0; j < 3; ++j) CHECK(std::abs(f2.beta(j) - fw.beta(j)) < 1e-9);

  // An offset shifts the intercept one for one.
  auto fo = fit_logistic(X, y, Eigen::VectorXd::Ones(n), Eigen::VectorXd::Constant(n, 0.5));
  CHECK(std::abs(fo.beta(0) - (f.beta(0) - 0.5)) < 1e-8);
}

TEST_CASE("logistic fit clips under separation") {
  Eigen::MatrixXd X(4, 1);
  X << 1, 1, 1, 1;
  Eigen::VectorXd y = Eigen::VectorXd::Ones(4);
  GlmOptions o;
  o.clip = 15;
  auto f = fit_logistic(X, y, Eigen::VectorXd::Ones(4), {}, {}, o);
  CHECK(f.clipped);
  CHECK(f.beta(0) == 15.0);
}

TEST_CASE("gamma log-link fit recovers mean parameters") {
  std::mt19937_64 gen(9);
  const int n = 20000;
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n);
  std::uniform_real_distribution<double> ud;
  for (int i = 0; i < n; ++i) {
    const double t = ud(gen) < 0.5 ? 1.0 : 0.0;
    const double mu = std::exp(1.0 + 0.5 * t);
    std::gamma_distribution<double> g(2.0, mu / 2.0);
    X.row(i) << 1.0, t;
    y(i) = g(gen);
  }
  auto f = fit_gamma_log(X, y, Eigen::VectorXd::Ones(n));
  CHECK(f.converged);
  CHECK(std::abs(f.beta(0) - 1.0) < 0.03);
  CHECK(std::abs(f.beta(1) - 0.5) < 0.04);
  CHECK(std::abs(1.0 / f.dispersion - 2.0) < 0.15);
  // With a saturated binary design the fitted means are the group means.
  double s[2] = {0, 0}, c[2] = {0, 0};
  for (int i = 0; i < n; ++i) {
    s[int(X(i, 1))] += y(i);
    c[int(X(i, 1))] += 1;
  }
  CHECK(std::exp(f.beta(0)) == doctest::Approx(s[0] / c[0]).epsilon(1e-8));
  CHECK(std::exp(f.beta(0) + f.beta(1)) == doctest::Approx(s[1] / c[1]).epsilon(1e-8));
}

TEST_CASE("rank checks reject short or singular designs") {
  Eigen::MatrixXd X(2, 3);
  X.setOnes();
  CHECK_THROWS_AS(require_full_rank(X, Eigen::VectorXd::Ones(2), "m"), EstimationError);
  Eigen::MatrixXd S(4, 2);
  S << 1, 2, 1, 2, 1, 2, 1, 2;
  CHECK_THROWS_AS(require_full_rank(S, Eigen::VectorXd::Ones(4), "m"), EstimationError);
}
