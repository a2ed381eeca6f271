#pragma once

// Weighted generalized linear model fits used by the baselines and by the
// EM M-step. Weights are frequency-type (fractional imputation weights are
// allowed); an empty offset vector means no offset.

#include <cstddef>
#include <string>

#include <Eigen/Dense>

namespace catemnar {

struct GlmOptions {
  double grad_tol = 1e-8;
  std::size_t max_iter = 100;
  /// Coefficients are clipped to [-clip, clip] when clip > 0.
  double clip = 0.0;
};

struct GlmFit {
  Eigen::VectorXd beta;
  bool converged = false;
  bool clipped = false;
  std::size_t iterations = 0;
  double loglik = 0.0;
  /// Gaussian: MLE variance. Gamma: Pearson dispersion. Logistic: 1.
  double dispersion = 1.0;
  /// (X^T W X)^{-1} at the solution, W the working weights.
  Eigen::MatrixXd cov_unscaled;
};

/// Throws EstimationError when sqrt(w) X has rank below its column count
/// or fewer rows than columns.
void require_full_rank(const Eigen::MatrixXd& X, const Eigen::VectorXd& w, const std::string& what);

double logistic_loglik(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                       const Eigen::VectorXd& offset, const Eigen::VectorXd& beta);

/// Newton-Raphson with step halving; y in [0, 1].
GlmFit fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                    const Eigen::VectorXd& offset = {}, const Eigen::VectorXd& init = {},
                    const GlmOptions& opts = {});

/// Closed-form weighted least squares with MLE variance sum(w r^2) / sum(w).
GlmFit fit_gaussian(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w);

/// Gamma regression with log link by IRLS; y > 0.
GlmFit fit_gamma_log(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                     const Eigen::VectorXd& init = {}, const GlmOptions& opts = {});

}  // namespace catemnar
