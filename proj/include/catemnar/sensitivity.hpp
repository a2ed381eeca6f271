#pragma once

#include <optional>
#include <string>
#include <vector>

#include "catemnar/core.hpp"
#include "catemnar/inference.hpp"
#include "catemnar/param_em.hpp"

namespace catemnar {

/// 21 equispaced points on [-2, 2].
std::vector<double> default_delta_grid();

struct SensitivitySpec {
  /// A1: offset delta * Y (delta * D for two-part), A2: delta * T,
  /// A3: delta * sum of the X^id columns.
  MissingnessAssumption assumption;
  std::vector<double> delta_grid = default_delta_grid();
  std::vector<double> x;
  double t1 = 1.0;
  double t0 = 0.0;
  /// Sequential warm starts outward from delta = 0; otherwise every point is
  /// cold-started and the grid runs in parallel.
  bool warm_start = true;
  std::size_t threads = 1;
  /// Strictly increasing and containing 0.
  void validate() const;
};

struct SensitivityPoint {
  double delta = 0.0;
  std::optional<double> tau;
  std::optional<Interval> interval;
  std::size_t em_iterations = 0;
  std::string error;
};

struct SensitivityCurve {
  std::vector<SensitivityPoint> points;
  std::size_t baseline_index = 0;
  /// Header delta,tau,lower,upper; failed points leave tau empty.
  std::string to_csv() const;
};

/// Response model for the sensitivity family at a given delta.
MissingnessModel sensitivity_model(const SensitivitySpec& spec, std::size_t p, OutcomeFamily family,
                                   double delta);

SensitivityCurve sensitivity_curve(const Dataset& d, const OutcomeModel& outcome,
                                   const SensitivitySpec& spec, const EmConfig& em,
                                   const std::optional<BootstrapConfig>& boot = std::nullopt);

}  // namespace catemnar
