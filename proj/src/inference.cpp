#include "catemnar/inference.hpp"

#include <algorithm>

#include "catemnar/parallel.hpp"
#include "catemnar/rng.hpp"
#include "catemnar/stats.hpp"

namespace catemnar {

void BootstrapConfig::validate() const {
  if (B < 2) throw ConfigError("bootstrap needs B >= 2");
  if (!(level > 0 && level < 1)) throw ConfigError("interval level must lie in (0,1)");
}

std::vector<std::size_t> resample_indices(std::size_t n, std::uint64_t seed, std::size_t b) {
  Rng rng(derive_seed(seed, b));
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = static_cast<std::size_t>(rng.index(n));
  return idx;
}

std::vector<std::optional<double>> bootstrap_replicates(const Dataset& d, const CateEstimator& est,
                                                        const BootstrapConfig& cfg) {
  cfg.validate();
  std::vector<std::optional<double>> out(cfg.B);
  parallel_for(cfg.B, cfg.threads, [&](std::size_t b) {
    Dataset r = d.empty_like();
    r.units.reserve(d.n());
    for (std::size_t i : resample_indices(d.n(), cfg.seed, b)) r.units.push_back(d.units[i]);
    try {
      out[b] = est(r, derive_seed(cfg.seed, b, 1)).tau;
    } catch (const Error&) {
      out[b] = std::nullopt;
    }
  });
  return out;
}

Interval percentile_interval(const std::vector<std::optional<double>>& reps, double level) {
  if (!(level > 0 && level < 1)) throw ConfigError("interval level must lie in (0,1)");
  std::vector<double> v;
  for (const auto& r : reps)
    if (r) v.push_back(*r);
  if (v.empty()) throw EstimationError("every bootstrap resample failed");
  std::sort(v.begin(), v.end());
  Interval iv;
  iv.level = level;
  iv.lower = quantile_sorted(v, (1.0 - level) / 2.0);
  iv.upper = quantile_sorted(v, (1.0 + level) / 2.0);
  iv.resamples = reps.size();
  iv.failed_resamples = reps.size() - v.size();
  iv.unreliable = static_cast<double>(iv.failed_resamples) > 0.1 * static_cast<double>(reps.size());
  return iv;
}

CateEstimate bootstrap_ci(const Dataset& d, const CateEstimator& est, const BootstrapConfig& cfg) {
  cfg.validate();
  CateEstimate point = est(d, cfg.seed);
  point.interval = percentile_interval(bootstrap_replicates(d, est, cfg), cfg.level);
  if (point.interval->unreliable)
    point.notes.push_back("more than 10% of bootstrap resamples failed; interval unreliable");
  return point;
}

}  // namespace catemnar
