#pragma once

// Reference estimators: oracle (latent data), complete-case analysis and
// the covariate miss-indicator variant of complete-case analysis.

#include <vector>

#include "catemnar/core.hpp"
#include "catemnar/dgp.hpp"
#include "catemnar/param_em.hpp"

namespace catemnar {

/// Outcome-model MLE on the fully observed latent sample, plug-in tau.
CateEstimate oracle_fit(const SimulatedData& sim, const OutcomeModel& model,
                        const std::vector<double>& x, double t1, double t0);
/// Same, for a latent dataset read from an oracle CSV.
CateEstimate oracle_fit(const Dataset& latent, const OutcomeModel& model,
                        const std::vector<double>& x, double t1, double t0);

/// Outcome-model MLE on units with rx = rt = ry = 1.
CateEstimate cca_fit(const Dataset& d, const OutcomeModel& model, const std::vector<double>& x,
                     double t1, double t0);

/// Units with rt = ry = 1; each covariate column with any missing value is
/// filled with 0 and gains an indicator column 1 - rx_j (entering as a main
/// effect only). The query sets every indicator to 0.
CateEstimate miss_indicator_fit(const Dataset& d, const OutcomeModel& model,
                                const std::vector<double>& x, double t1, double t0);

}  // namespace catemnar
