#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "catemnar/core.hpp"
#include "catemnar/rng.hpp"

namespace catemnar {

// Parameter blocks mirror the simulation table row by row. Intercepts of the
// three response models are never taken from the table; they are calibrated
// to the target observation rate (see calibrate_scenario).

struct CovariateParams {
  double p_x = 0.5;      // binary X
  double mu_x = 0.2;     // continuous X
  double sigma_x = 1.0;  // continuous X
};

struct TreatmentParams {
  double alpha0 = -0.3;
  double alpha_x = 0.9;
  double sigma_t = 1.0;  // continuous T only
};

struct OutcomeParams {
  double beta0 = -0.4;
  double beta_t = 1.1;
  double beta_x = 0.9;
  double beta_tx = 0.5;
  double sigma_y = 1.0;  // continuous Y only
};

struct RxParams {
  std::optional<double> gamma0;
  double gamma_x = 0.6;
  double gamma_t = -0.4;
};

struct RtParams {
  std::optional<double> eta0;
  double eta_x = 0.4;
  double eta_t = 0.4;
  double eta_r = 0.5;
};

/// logit P(R^Y=1) = phi0 + rx_coef R^X + rt_coef R^T + u_x X + u_t T + u_y Y.
struct RyParams {
  std::optional<double> phi0;
  double rx_coef = 0.4;
  double rt_coef = 0.4;
  double u_x = 0.0;
  double u_t = 0.0;
  double u_y = 0.0;
};

struct ScenarioConfig {
  std::string id;
  VariableKind x_kind = VariableKind::Binary;
  VariableKind t_kind = VariableKind::Binary;
  VariableKind y_kind = VariableKind::Binary;
  CovariateParams x_params;
  TreatmentParams t_params;
  OutcomeParams y_params;
  RxParams rx_params;
  RtParams rt_params;
  RyParams ry_params;
  MissingnessAssumption assumption;
  bool null_effect = false;
  double target_obs_rate = 0.8;

  bool calibrated() const {
    return rx_params.gamma0 && rt_params.eta0 && ry_params.phi0;
  }
};

/// Throws ConfigError when the u-coefficients use a parent of R^Y that the
/// assumption excludes, when null_effect is set with a nonzero treatment
/// effect, or when scalar parameters are out of range.
void validate_scenario(const ScenarioConfig& cfg);

/// Default simulation parameters for one kind combination. Parameter rows
/// are keyed: X row by X kind, T row by T kind, Y row by Y kind, R^X row
/// by X kind, R^T row by T kind and the R^Y u-row by Y kind.
ScenarioConfig default_scenario(VariableKind x_kind, VariableKind t_kind,
                                 VariableKind y_kind, AssumptionVariant assumption,
                                 bool null_effect = false);

/// Short identifier such as "bcb-A2" (X,T,Y kinds then assumption); "-null"
/// is appended for the null variant.
std::string scenario_id(VariableKind x_kind, VariableKind t_kind, VariableKind y_kind,
                        AssumptionVariant assumption, bool null_effect);

/// All eight kind combinations for one assumption, in X-major order
/// (bbb, bbc, bcb, bcc, cbb, cbc, ccb, ccc).
std::vector<ScenarioConfig> scenario_grid(AssumptionVariant assumption,
                                          bool null_effect = false);

using LogitSampler = std::function<double(Rng&)>;

struct CalibrationOptions {
  double tol = 1e-3;
  std::size_t draws = 100000;
  double lower = -20.0;
  double upper = 20.0;
};

/// Intercept c with MonteCarloMean(expit(c + draw)) within tol of the
/// target, by bisection on a frozen sample of draws.
double calibrate_intercept(const LogitSampler& sampler, double target_obs_rate,
                           std::uint64_t seed, const CalibrationOptions& opts = {});

/// Fills gamma0, eta0 and phi0 in sequence (each conditioning on the
/// previously calibrated upstream intercepts). Always recalibrates.
ScenarioConfig calibrate_scenario(ScenarioConfig cfg, std::uint64_t seed,
                                  const CalibrationOptions& opts = {});

struct SimulatedData {
  Dataset observed;
  /// Fully observed shadow copy: all values present, all indicators 1.
  Dataset latent;
};

/// Draws n units; calibrates on the fly (seeded from `seed`) if intercepts
/// are absent. Deterministic given (cfg, n, seed).
SimulatedData simulate(const ScenarioConfig& cfg, std::size_t n, std::uint64_t seed);

/// Analytic CATE of the outcome model at scalar covariate x[0].
double true_cate(const ScenarioConfig& cfg, const std::vector<double>& x, double t1,
                 double t0);

/// P(Y=1 | t, x) (binary Y) or E(Y | t, x) (continuous Y).
double true_outcome_mean(const ScenarioConfig& cfg, double x, double t);

}  // namespace catemnar
