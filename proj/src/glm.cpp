#include "catemnar/glm.hpp"

#include <cmath>

#include "catemnar/core.hpp"
#include "catemnar/stats.hpp"

namespace catemnar {

namespace {

Eigen::VectorXd linear_predictor(const Eigen::MatrixXd& X, const Eigen::VectorXd& offset,
                                 const Eigen::VectorXd& beta) {
  Eigen::VectorXd eta = X * beta;
  if (offset.size()) eta += offset;
  return eta;
}

Eigen::MatrixXd weighted_gram(const Eigen::MatrixXd& X, const Eigen::VectorXd& w) {
  return X.transpose() * w.asDiagonal() * X;
}

Eigen::MatrixXd inverse_spd(const Eigen::MatrixXd& A) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  return ldlt.solve(Eigen::MatrixXd::Identity(A.rows(), A.cols()));
}

void clip_vector(Eigen::VectorXd& b, double clip, bool& clipped) {
  if (clip <= 0) return;
  for (Eigen::Index j = 0; j < b.size(); ++j) {
    if (b(j) > clip) { b(j) = clip; clipped = true; }
    if (b(j) < -clip) { b(j) = -clip; clipped = true; }
  }
}

}  // namespace

void require_full_rank(const Eigen::MatrixXd& X, const Eigen::VectorXd& w, const std::string& what) {
  if (X.rows() < X.cols())
    throw EstimationError(what + ": fewer rows (" + std::to_string(X.rows()) + ") than parameters (" +
                          std::to_string(X.cols()) + ")");
  Eigen::MatrixXd sx = w.cwiseSqrt().asDiagonal() * X;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sx);
  qr.setThreshold(1e-10);
  if (qr.rank() < X.cols())
    throw EstimationError(what + ": singular design (rank " + std::to_string(qr.rank()) + " < " +
                          std::to_string(X.cols()) + ")");
}

double logistic_loglik(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                       const Eigen::VectorXd& offset, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = linear_predictor(X, offset, beta);
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i)
    ll += w(i) * (y(i) * log_expit(eta(i)) + (1.0 - y(i)) * log_expit(-eta(i)));
  return ll;
}

GlmFit fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                    const Eigen::VectorXd& offset, const Eigen::VectorXd& init, const GlmOptions& opts) {
  GlmFit fit;
  fit.beta = init.size() ? init : Eigen::VectorXd::Zero(X.cols());
  clip_vector(fit.beta, opts.clip, fit.clipped);
  fit.loglik = logistic_loglik(X, y, w, offset, fit.beta);
  Eigen::VectorXd p(X.rows()), hw(X.rows());

  for (fit.iterations = 0; fit.iterations < opts.max_iter; ++fit.iterations) {
    const Eigen::VectorXd eta = linear_predictor(X, offset, fit.beta);
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      p(i) = expit(eta(i));
      hw(i) = w(i) * p(i) * (1.0 - p(i));
    }
    const Eigen::VectorXd grad = X.transpose() * (w.cwiseProduct(y - p));
    if (grad.lpNorm<Eigen::Infinity>() < opts.grad_tol) {
      fit.converged = true;
      break;
    }
    Eigen::MatrixXd H = weighted_gram(X, hw);
    H.diagonal().array() += 1e-12 * (1.0 + H.diagonal().array().abs());
    const Eigen::VectorXd step = H.ldlt().solve(grad);
    double scale = 1.0;
    bool improved = false;
    Eigen::VectorXd cand;
    double ll = fit.loglik;
    bool cand_clipped = false;
    const double step_norm = step.lpNorm<Eigen::Infinity>();
    const double beta_norm = fit.beta.lpNorm<Eigen::Infinity>();
    // Predicted gain below rounding of the log-likelihood: trust Newton.
    const bool flat = grad.dot(step) < 1e-12 * (1.0 + std::abs(fit.loglik));
    for (int h = 0; h < 40; ++h, scale *= 0.5) {
      if (scale * step_norm < 1e-14 * (1.0 + beta_norm)) break;
      cand = fit.beta + scale * step;
      cand_clipped = false;
      clip_vector(cand, opts.clip, cand_clipped);
      ll = logistic_loglik(X, y, w, offset, cand);
      if (ll >= fit.loglik || (flat && h == 0 && !cand_clipped)) {
        improved = true;
        break;
      }
    }
    if (!improved) break;
    const double change = (cand - fit.beta).lpNorm<Eigen::Infinity>();
    fit.beta = cand;
    fit.clipped = fit.clipped || cand_clipped;
    const double prev = fit.loglik;
    fit.loglik = ll;
    if (change < 1e-13 || (cand_clipped && ll - prev < 1e-12 * (1.0 + std::abs(ll)))) {
      // Stalled at the clip boundary or at machine precision.
      fit.converged = !cand_clipped;
      break;
    }
  }
  const Eigen::VectorXd eta = linear_predictor(X, offset, fit.beta);
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double pi = expit(eta(i));
    hw(i) = w(i) * pi * (1.0 - pi);
  }
  fit.cov_unscaled = inverse_spd(weighted_gram(X, hw));
  return fit;
}

GlmFit fit_gaussian(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
  GlmFit fit;
  const Eigen::MatrixXd G = weighted_gram(X, w);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(G);
  fit.beta = ldlt.solve(X.transpose() * w.cwiseProduct(y));
  const Eigen::VectorXd r = y - X * fit.beta;
  const double sw = w.sum();
  fit.dispersion = r.cwiseProduct(r).dot(w) / sw;
  const double s2 = std::max(fit.dispersion, 1e-300);
  fit.loglik = -0.5 * sw * (std::log(2.0 * M_PI * s2)) - 0.5 * r.cwiseProduct(r).dot(w) / s2;
  fit.converged = true;
  fit.iterations = 1;
  fit.cov_unscaled = ldlt.solve(Eigen::MatrixXd::Identity(X.cols(), X.cols()));
  return fit;
}

GlmFit fit_gamma_log(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                     const Eigen::VectorXd& init, const GlmOptions& opts) {
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (!(y(i) > 0)) throw EstimationError("gamma regression requires positive outcomes");
  GlmFit fit;
  if (init.size()) {
    fit.beta = init;
  } else {
    // Start from least squares on log y.
    fit.beta = fit_gaussian(X, y.array().log().matrix(), w).beta;
  }
  // Deviance-type objective: sum w (log mu + y / mu), minimized.
  auto objective = [&](const Eigen::VectorXd& b) {
    const Eigen::VectorXd eta = X * b;
    double s = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) s += w(i) * (eta(i) + y(i) * std::exp(-eta(i)));
    return s;
  };
  double obj = objective(fit.beta);
  for (fit.iterations = 0; fit.iterations < opts.max_iter; ++fit.iterations) {
    const Eigen::VectorXd eta = X * fit.beta;
    Eigen::VectorXd ratio(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) ratio(i) = y(i) * std::exp(-eta(i));
    // Score of the log-likelihood (up to the dispersion) and expected information.
    const Eigen::VectorXd grad = X.transpose() * w.cwiseProduct(ratio - Eigen::VectorXd::Ones(eta.size()));
    if (grad.lpNorm<Eigen::Infinity>() < opts.grad_tol) {
      fit.converged = true;
      break;
    }
    const Eigen::VectorXd step = weighted_gram(X, w).ldlt().solve(grad);
    double scale = 1.0;
    bool improved = false;
    for (int h = 0; h < 40; ++h, scale *= 0.5) {
      const Eigen::VectorXd cand = fit.beta + scale * step;
      const double o = objective(cand);
      if (o <= obj) {
        improved = (fit.beta - cand).lpNorm<Eigen::Infinity>() > 0;
        fit.beta = cand;
        obj = o;
        break;
      }
    }
    if (!improved) break;
  }
  const Eigen::VectorXd mu = (X * fit.beta).array().exp().matrix();
  double pearson = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double r = (y(i) - mu(i)) / mu(i);
    pearson += w(i) * r * r;
  }
  const double dof = w.sum() - static_cast<double>(X.cols());
  fit.dispersion = dof > 0 ? pearson / dof : pearson;
  fit.loglik = -obj / std::max(fit.dispersion, 1e-300);
  fit.cov_unscaled = inverse_spd(weighted_gram(X, w));
  return fit;
}

}  // namespace catemnar
