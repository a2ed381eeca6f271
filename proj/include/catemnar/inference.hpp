#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "catemnar/core.hpp"

namespace catemnar {

struct BootstrapConfig {
  std::size_t B = 500;
  double level = 0.95;
  std::uint64_t seed = 1;
  /// 0 = hardware concurrency.
  std::size_t threads = 1;
  void validate() const;
};

/// Estimator with all tuning frozen. Must be deterministic given
/// (data, seed) and safe to call concurrently.
using CateEstimator = std::function<CateEstimate(const Dataset&, std::uint64_t seed)>;

/// Indices of resample b: n uniform draws with replacement from the stream
/// derive_seed(seed, b).
std::vector<std::size_t> resample_indices(std::size_t n, std::uint64_t seed, std::size_t b);

/// Re-estimates on B case resamples; failed resamples are nullopt. Entry b
/// depends only on (data, seed, b).
std::vector<std::optional<double>> bootstrap_replicates(const Dataset& d, const CateEstimator& est,
                                                        const BootstrapConfig& cfg);

/// Percentile interval from retained replicates (type-7 quantiles at
/// (1 - level)/2 and (1 + level)/2). Throws EstimationError when every
/// replicate failed.
Interval percentile_interval(const std::vector<std::optional<double>>& reps, double level);

/// Point estimate on d (seed cfg.seed) with a percentile interval attached.
CateEstimate bootstrap_ci(const Dataset& d, const CateEstimator& est, const BootstrapConfig& cfg);

}  // namespace catemnar
