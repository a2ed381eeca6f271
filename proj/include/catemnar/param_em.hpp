#pragma once

// Parametric selection-model estimation under the outcome-missingness
// assumptions: outcome model P_beta(y | x, t) and response model
// pi_lambda = expit(lambda' Z + delta * offset), fitted on units with
// observed (X, T) by EM. The E-step is exact for binary outcomes and uses
// fractional imputation with frozen draws for continuous outcomes.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "catemnar/core.hpp"
#include "catemnar/design.hpp"

namespace catemnar {

enum class OutcomeFamily { BernoulliLogit, GaussianLinear, TwoPart };
std::string to_string(OutcomeFamily f);
OutcomeFamily parse_outcome_family(const std::string& s);

struct OutcomeModel {
  OutcomeFamily family = OutcomeFamily::BernoulliLogit;
  /// U(x, t). For TwoPart this is the logit model for D = 1{Y > 0}.
  Design design;
  Eigen::VectorXd beta;
  /// Gaussian residual standard deviation.
  double sigma = 1.0;
  /// TwoPart only: log-link Gamma model for Y given D = 1.
  Design positive_design;
  Eigen::VectorXd positive_beta;
  double gamma_shape = 1.0;

  /// E(Y | x, t) under the current coefficients.
  double mean(const std::vector<double>& x, double t) const;
  /// log P(y | x, t) for the binary part (Bernoulli, TwoPart on D) or the
  /// Gaussian density.
  double log_density(const std::vector<double>& x, double t, double y) const;
};

/// Family from the outcome kind; design intercept + t + x_j + t:x_j.
OutcomeModel default_outcome_model(const Dataset& d);

enum class OffsetTerm { None, Outcome, Treatment, IdentifyingCovariates };
std::string to_string(OffsetTerm o);

struct MissingnessModel {
  AssumptionVariant assumption = AssumptionVariant::A2;
  /// Z(x, t, y); must omit the factor excluded by the assumption.
  Design design;
  Eigen::VectorXd lambda;
  double offset_delta = 0.0;
  OffsetTerm offset_term = OffsetTerm::None;
  /// Columns summed by OffsetTerm::IdentifyingCovariates.
  std::vector<std::size_t> offset_columns;
  /// X^id under A3 (empty: all of X).
  std::vector<std::size_t> identifying_covariates;
  /// Outcome offset uses D = 1{y > 0} instead of y (two-part family).
  bool offset_on_indicator = false;

  double offset(const std::vector<double>& x, double t, double y) const;
  double linear_predictor(const std::vector<double>& x, double t, double y) const;
  /// P(R^Y = 1 | x, t, y).
  double prob(const std::vector<double>& x, double t, double y) const;
  /// Throws ConfigError when the design uses an excluded factor.
  void validate(std::size_t p) const;
};

/// Z per assumption: A2 1 + x + y, A3 1 + t + x^c + y, A1/MAR 1 + x + t,
/// MCAR 1. The outcome factor is "d" for the two-part family.
MissingnessModel default_missingness_model(const MissingnessAssumption& a, std::size_t p,
                                           OutcomeFamily family = OutcomeFamily::BernoulliLogit);

struct EmConfig {
  std::size_t M = 50;
  double tol = 1e-8;
  std::size_t max_iter = 500;
  std::uint64_t seed = 1;
  double lambda_clip = 15.0;
  void validate() const;
};

struct EmTrace {
  /// Observed-data log-likelihood (Monte Carlo version for fractional
  /// imputation) at the start and after every iteration.
  std::vector<double> loglik;
  /// Q-function improvement achieved by each M-step.
  std::vector<double> q_gain;
  std::size_t iterations = 0;
  bool converged = false;
  bool exact_e_step = true;
  bool lambda_clipped = false;
  double min_ess = 0.0;
  std::vector<std::string> diagnostics;
};

struct EmFit {
  OutcomeModel outcome;
  MissingnessModel missingness;
  EmTrace trace;
  /// sigma^2 (U' W U)^{-1} or the logistic analogue from the last M-step.
  Eigen::MatrixXd beta_cov;
};

/// Complete-case MLE (units with rx = rt = ry = 1); for TwoPart fits the
/// D-part. Throws InsufficientDataError with fewer than dim + 1 cases.
OutcomeModel fit_initial_outcome(const Dataset& d, OutcomeModel model);

/// TwoPart only: log-link Gamma fit of Y on complete cases with Y > 0.
OutcomeModel fit_positive_part(const Dataset& d, OutcomeModel model);
/// Full complete-case MLE (both parts for TwoPart).
OutcomeModel fit_complete_case_outcome(const Dataset& d, const OutcomeModel& model);

/// Posterior over outcome levels {0, 1} for a unit with a missing binary
/// outcome: P_beta(y | x, t) (1 - pi(x, t, y)), normalized.
std::vector<double> e_step_exact_discrete(const Unit& u, const OutcomeModel& outcome,
                                          const MissingnessModel& miss);

struct ImputedUnit {
  std::size_t unit = 0;  // index into the dataset
  std::vector<double> draws;
  std::vector<double> log_proposal;
  std::vector<double> weights;
  double ess = 0.0;
};

/// Normalizes log-scale weights to sum to one. Throws EstimationError when
/// every weight is zero or not finite.
std::vector<double> normalize_log_weights(const std::vector<double>& log_w);
/// 1 / sum(w^2) for normalized weights (M for uniform weights).
double effective_sample_size(const std::vector<double>& w);

/// I-step: M draws per missing-outcome unit (rx = rt = 1, ry = 0) from the
/// Gaussian proposal `proposal`, followed by a W-step at (outcome, miss).
std::vector<ImputedUnit> fractional_impute(const Dataset& d, const OutcomeModel& proposal,
                                           const OutcomeModel& outcome, const MissingnessModel& miss,
                                           const EmConfig& cfg);
/// W-step: recompute weights of frozen draws.
void update_fractional_weights(std::vector<ImputedUnit>& imp, const Dataset& d,
                               const OutcomeModel& proposal, const OutcomeModel& outcome,
                               const MissingnessModel& miss);

/// EM on units with observed (X, T). `warm` supplies starting coefficients
/// (same designs); draws never depend on it.
EmFit fit_em(const Dataset& d, const OutcomeModel& outcome, const MissingnessModel& miss,
             const EmConfig& cfg, const EmFit* warm = nullptr);

/// Plug-in CATE from a fit.
CateEstimate cate_from_fit(const EmFit& fit, const std::vector<double>& x, double t1, double t0);

CateEstimate estimate_cate_param(const Dataset& d, const OutcomeModel& outcome,
                                 const MissingnessModel& miss, const EmConfig& cfg,
                                 const std::vector<double>& x, double t1, double t0,
                                 const EmFit* warm = nullptr, EmFit* fit_out = nullptr);

}  // namespace catemnar
