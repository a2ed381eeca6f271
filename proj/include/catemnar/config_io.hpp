#pragma once

// JSON configuration and result serialization for the command-line tool.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "catemnar/core.hpp"
#include "catemnar/csv_io.hpp"
#include "catemnar/dgp.hpp"
#include "catemnar/np2sls.hpp"
#include "catemnar/param_em.hpp"
#include "catemnar/sensitivity.hpp"
#include "catemnar/study.hpp"

namespace catemnar {

using Json = nlohmann::json;

/// Scenario from an id such as "bcb-A2" or "bbb-A2-null" with default parameters.
ScenarioConfig scenario_from_id(const std::string& id);
/// Object with optional "id", kinds, "assumption", "null_effect",
/// "target_obs_rate" and per-block parameter overrides. Unknown keys are
/// ConfigErrors.
ScenarioConfig scenario_from_json(const Json& j);
Json scenario_to_json(const ScenarioConfig& s);

struct RunConfig {
  std::vector<ScenarioConfig> scenarios;
  DatasetSchema schema;
  bool schema_given = false;
  MissingnessAssumption assumption{AssumptionVariant::A2, {}};
  std::vector<double> x;
  double t1 = 1.0, t0 = 0.0;
  std::optional<OutcomeFamily> family;
  std::vector<std::string> outcome_design;
  std::vector<std::string> positive_design;
  std::vector<std::string> response_design;
  SieveConfig sieve;
  RegularizationConfig reg;
  EmConfig em;
  std::size_t bootstrap = 0;
  double level = 0.95;
  std::vector<double> delta_grid = default_delta_grid();
  bool warm_start = true;
  std::vector<EstimatorKind> estimators = {EstimatorKind::Oracle, EstimatorKind::Cca, EstimatorKind::MissInd,
                                           EstimatorKind::Np, EstimatorKind::Para};
  std::size_t replicates = 100;
  std::size_t n = 1000;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
};

/// Keys: scenarios, schema, assumption, identifying_covariates (1-based),
/// query {x, t1, t0}, family, outcome_design, positive_design,
/// response_design, sieve, regularization, em, bootstrap {B, level},
/// sensitivity {grid, warm_start}, estimators, replicates, n, seed, threads.
RunConfig run_config_from_json(const Json& j);
RunConfig load_run_config(const std::string& path);

/// Outcome model from the config (defaults from the dataset kinds).
OutcomeModel outcome_model_from(const RunConfig& rc, const Dataset& d);
/// Response model from the config (defaults per assumption).
MissingnessModel response_model_from(const RunConfig& rc, const Dataset& d, OutcomeFamily family);

Json estimate_to_json(const CateEstimate& e);

}  // namespace catemnar
