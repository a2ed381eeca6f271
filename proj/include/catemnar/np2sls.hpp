#pragma once

// Series two-stage least squares for the response-odds function zeta.
//
// Roles: under A2 the instrument is T and the conditioning variable is X;
// under A3 the instrument is X (one column) and the conditioning variable
// is T. With a discrete conditioning variable one system is solved per
// cell, zeta(c, y) = h(y)' beta(c). With a continuous one a tensor sieve
// zeta(c, y) = (g(c) kron h(y))' theta is solved once.

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "catemnar/core.hpp"

namespace catemnar {

enum class BasisKind { HermiteEnvelope, SaturatedBinary };
std::string to_string(BasisKind k);

struct SieveConfig {
  std::size_t J = 4;
  std::size_t Jx = 3;
  BasisKind basis_kind = BasisKind::HermiteEnvelope;
  /// Joint affine whitening of (conditioning variable, Y) when both are continuous.
  bool whiten = true;
  /// Quantile evaluation points per continuous instrument or conditioning variable.
  std::size_t grid_points = 25;
  void validate() const;
};

struct RegularizationConfig {
  /// Empty means identity.
  Eigen::MatrixXd lambda_matrix;
  double bound_B = 10.0;
  double pi_min = 0.05;
  /// Throws ConfigError unless Lambda is symmetric positive definite of size dim.
  void validate(std::size_t dim) const;
};

/// h_j(v) = exp(-v~^2) v~^(j-1), v~ = (v - mean) / sd.
Eigen::VectorXd hermite_envelope_basis(double v, std::size_t J, double mean, double sd);

/// Data-dependent tuning, fixed once and reused (e.g. across bootstrap resamples).
struct NpTuning {
  AssumptionVariant assumption = AssumptionVariant::A2;
  bool tensor = false;
  bool binary_outcome = true;
  bool instrument_discrete = true;
  double y_mean = 0.0, y_sd = 1.0;
  double c_mean = 0.0, c_sd = 1.0;
  bool whitened = false;
  double white_slope = 0.0, white_sd = 1.0;
  /// First-stage bandwidths; 0 marks exact matching on a discrete variable.
  double h_instrument = 0.0;
  double h_conditioning = 0.0;
  std::vector<double> instrument_points;
  std::vector<double> conditioning_points;
  /// Final-regression bandwidths for T and each X column (0 = exact match).
  std::vector<double> h_final;
  std::size_t feature_dim = 0;

  std::map<std::string, double> as_diagnostics() const;
};

/// Tuning from units with observed (X, T). Throws ConfigError for
/// unsupported layouts (see README) and InsufficientDataError when there
/// are too few complete cases.
NpTuning tune_np(const Dataset& d, const MissingnessAssumption& a, const SieveConfig& cfg);

/// Sieve features phi(c, y): h(y) in cell mode, g(c) kron h(y) in tensor mode.
Eigen::VectorXd sieve_features(const NpTuning& tu, const SieveConfig& cfg, double c, double y);

struct FirstStage {
  Eigen::MatrixXd M;
  Eigen::VectorXd b;
  /// (instrument) in cell mode, (instrument, conditioning) in tensor mode.
  std::vector<std::vector<double>> eval_points;
  std::vector<std::string> warnings;
};

/// Stacked rows b = E(1 - R^Y | z, c), M = E(R^Y phi(C, Y) | z, c) over the
/// evaluation points, estimated by cell means or Gaussian-kernel smoothing.
/// `cell` is the conditioning value in cell mode (ignored in tensor mode).
FirstStage build_first_stage(const Dataset& d, const MissingnessAssumption& a,
                             const SieveConfig& cfg, const NpTuning& tu,
                             const std::vector<double>& cell = {});

struct RegularizedSolution {
  Eigen::VectorXd beta;
  double residual = 0.0;  // ||b - M beta||^2
  double mu = 0.0;        // multiplier, 0 when the constraint is inactive
  bool constraint_active = false;
  std::size_t rank = 0;
};

/// argmin ||b - M beta||^2 subject to beta' Lambda beta <= B. The minimum
/// Lambda-norm least-squares solution is returned when it is feasible;
/// otherwise the multiplier is bisected until the constraint binds.
RegularizedSolution solve_regularized(const Eigen::MatrixXd& M, const Eigen::VectorXd& b,
                                      const RegularizationConfig& reg);
RegularizedSolution solve_regularized(const FirstStage& fs, const RegularizationConfig& reg);

struct CorrectedWeights {
  std::vector<double> weights;
  double clamped_fraction = 0.0;
};

/// w_i = clamp(1 + zeta(unit_i), 1, 1/pi_min) for every unit of `d`.
CorrectedWeights corrected_weights(const Dataset& d, const std::function<double(const Unit&)>& zeta,
                                   double pi_min);

/// Weighted regression on complete cases: cell means over discrete (t, x),
/// local-linear smoothing over continuous coordinates.
double weighted_outcome_mean(const Dataset& cc, const std::vector<double>& w, const NpTuning& tu,
                             double t, const std::vector<double>& x);

CateEstimate estimate_cate_np(const Dataset& d, const MissingnessAssumption& a,
                              const SieveConfig& sieve, const RegularizationConfig& reg,
                              const std::vector<double>& x, double t1, double t0,
                              const NpTuning* frozen = nullptr, NpTuning* tuning_out = nullptr);

}  // namespace catemnar
