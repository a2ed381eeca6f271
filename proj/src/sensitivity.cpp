#include "catemnar/sensitivity.hpp"

#include <algorithm>
#include <iomanip>
#include <charconv>
#include <sstream>

#include "catemnar/parallel.hpp"

namespace catemnar {

std::vector<double> default_delta_grid() {
  std::vector<double> g;
  for (int k = -10; k <= 10; ++k) g.push_back(k / 5.0);
  g[10] = 0.0;
  return g;
}

void SensitivitySpec::validate() const {
  if (delta_grid.empty()) throw ConfigError("sensitivity grid is empty");
  for (std::size_t i = 1; i < delta_grid.size(); ++i)
    if (!(delta_grid[i] > delta_grid[i - 1])) throw ConfigError("sensitivity grid must be strictly increasing");
  if (std::find(delta_grid.begin(), delta_grid.end(), 0.0) == delta_grid.end())
    throw ConfigError("sensitivity grid must contain 0");
  switch (assumption.variant) {
    case AssumptionVariant::A1:
    case AssumptionVariant::A2:
    case AssumptionVariant::A3:
      break;
    default:
      throw ConfigError("sensitivity families are defined for A1, A2 and A3");
  }
}

namespace {

std::string shortest(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace

std::string SensitivityCurve::to_csv() const {
  std::ostringstream os;
  os << "delta,tau,lower,upper\n";
  for (const auto& p : points) {
    os << shortest(p.delta) << ",";
    if (p.tau) os << shortest(*p.tau);
    os << ",";
    if (p.interval) os << shortest(p.interval->lower);
    os << ",";
    if (p.interval) os << shortest(p.interval->upper);
    os << "\n";
  }
  return os.str();
}

MissingnessModel sensitivity_model(const SensitivitySpec& spec, std::size_t p, OutcomeFamily family,
                                   double delta) {
  MissingnessModel m = default_missingness_model(spec.assumption, p, family);
  switch (spec.assumption.variant) {
    case AssumptionVariant::A1: m.offset_term = OffsetTerm::Outcome; break;
    case AssumptionVariant::A2: m.offset_term = OffsetTerm::Treatment; break;
    case AssumptionVariant::A3: m.offset_term = OffsetTerm::IdentifyingCovariates; break;
    default: throw ConfigError("sensitivity families are defined for A1, A2 and A3");
  }
  m.offset_delta = delta;
  return m;
}

SensitivityCurve sensitivity_curve(const Dataset& d, const OutcomeModel& outcome,
                                   const SensitivitySpec& spec, const EmConfig& em,
                                   const std::optional<BootstrapConfig>& boot) {
  spec.validate();
  if (boot) boot->validate();
  SensitivityCurve curve;
  const auto& grid = spec.delta_grid;
  curve.points.resize(grid.size());
  curve.baseline_index =
      static_cast<std::size_t>(std::find(grid.begin(), grid.end(), 0.0) - grid.begin());

  std::vector<std::optional<EmFit>> fits(grid.size());
  auto run = [&](std::size_t i, const EmFit* warm) {
    SensitivityPoint& pt = curve.points[i];
    pt.delta = grid[i];
    try {
      EmFit fit;
      const MissingnessModel mm = sensitivity_model(spec, d.p(), outcome.family, grid[i]);
      const CateEstimate e = estimate_cate_param(d, outcome, mm, em, spec.x, spec.t1, spec.t0, warm, &fit);
      pt.tau = e.tau;
      pt.em_iterations = fit.trace.iterations;
      fits[i] = std::move(fit);
      if (boot) {
        // Resamples are cold-started: starting values are tuning-free.
        const CateEstimator est = [&, mm](const Dataset& r, std::uint64_t) {
          return estimate_cate_param(r, outcome, mm, em, spec.x, spec.t1, spec.t0);
        };
        pt.interval = percentile_interval(bootstrap_replicates(d, est, *boot), boot->level);
      }
    } catch (const Error& e) {
      pt.tau.reset();
      pt.error = e.what();
    }
  };

  if (!spec.warm_start) {
    parallel_for(grid.size(), spec.threads, [&](std::size_t i) { run(i, nullptr); });
    return curve;
  }
  const std::size_t b = curve.baseline_index;
  run(b, nullptr);
  for (std::size_t i = b + 1; i < grid.size(); ++i) run(i, fits[i - 1] ? &*fits[i - 1] : nullptr);
  for (std::size_t i = b; i-- > 0;) run(i, fits[i + 1] ? &*fits[i + 1] : nullptr);
  return curve;
}

}  // namespace catemnar
