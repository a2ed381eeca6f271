#include "catemnar/dgp.hpp"

#include <cmath>
#include <sstream>

#include "catemnar/stats.hpp"

namespace catemnar {

namespace {

constexpr VariableKind kBin = VariableKind::Binary;
constexpr VariableKind kCont = VariableKind::Continuous;

char kind_letter(VariableKind k) { return k == kBin ? 'b' : 'c'; }

struct Draw {
  double x, t, y;
  int rx, rt, ry;
};

double draw_x(const ScenarioConfig& c, Rng& rng) {
  if (c.x_kind == kBin) return rng.bernoulli(c.x_params.p_x);
  return rng.normal(c.x_params.mu_x, c.x_params.sigma_x);
}

double draw_t(const ScenarioConfig& c, double x, Rng& rng) {
  const auto& a = c.t_params;
  const double lp = a.alpha0 + a.alpha_x * x;
  if (c.t_kind == kBin) return rng.bernoulli(expit(lp));
  return rng.normal(lp, a.sigma_t);
}

double draw_y(const ScenarioConfig& c, double x, double t, Rng& rng) {
  const double m = true_outcome_mean(c, x, t);
  if (c.y_kind == kBin) return rng.bernoulli(m);
  return rng.normal(m, c.y_params.sigma_y);
}

double rx_slope_part(const ScenarioConfig& c, double x, double t) {
  return c.rx_params.gamma_x * x + c.rx_params.gamma_t * t;
}

double rt_slope_part(const ScenarioConfig& c, double x, double t, int rx) {
  return c.rt_params.eta_x * x + c.rt_params.eta_t * t + c.rt_params.eta_r * rx;
}

double ry_slope_part(const ScenarioConfig& c, double x, double t, double y, int rx, int rt) {
  const auto& r = c.ry_params;
  return r.rx_coef * rx + r.rt_coef * rt + r.u_x * x + r.u_t * t + r.u_y * y;
}

Draw draw_unit(const ScenarioConfig& c, Rng& rng) {
  Draw d{};
  d.x = draw_x(c, rng);
  d.t = draw_t(c, d.x, rng);
  d.y = draw_y(c, d.x, d.t, rng);
  d.rx = rng.bernoulli(expit(*c.rx_params.gamma0 + rx_slope_part(c, d.x, d.t)));
  d.rt = rng.bernoulli(expit(*c.rt_params.eta0 + rt_slope_part(c, d.x, d.t, d.rx)));
  d.ry = rng.bernoulli(
      expit(*c.ry_params.phi0 + ry_slope_part(c, d.x, d.t, d.y, d.rx, d.rt)));
  return d;
}

}  // namespace

void validate_scenario(const ScenarioConfig& cfg) {
  const auto& u = cfg.ry_params;
  switch (cfg.assumption.variant) {
    case AssumptionVariant::A1:
      if (u.u_y != 0.0) throw ConfigError("A1 scenario: R^Y may not depend on Y (u_y != 0)");
      break;
    case AssumptionVariant::A2:
      if (u.u_t != 0.0) throw ConfigError("A2 scenario: R^Y may not depend on T (u_t != 0)");
      break;
    case AssumptionVariant::A3:
      if (u.u_x != 0.0) throw ConfigError("A3 scenario: R^Y may not depend on X (u_x != 0)");
      break;
    case AssumptionVariant::MAR:
      if (u.u_x != 0.0 || u.u_t != 0.0 || u.u_y != 0.0 || cfg.rx_params.gamma_x != 0.0 ||
          cfg.rx_params.gamma_t != 0.0 || cfg.rt_params.eta_x != 0.0 ||
          cfg.rt_params.eta_t != 0.0)
        throw ConfigError("MAR scenario: indicators may not depend on X, T or Y");
      break;
    case AssumptionVariant::MCAR:
      if (u.u_x != 0.0 || u.u_t != 0.0 || u.u_y != 0.0 || u.rx_coef != 0.0 ||
          u.rt_coef != 0.0 || cfg.rx_params.gamma_x != 0.0 || cfg.rx_params.gamma_t != 0.0 ||
          cfg.rt_params.eta_x != 0.0 || cfg.rt_params.eta_t != 0.0 ||
          cfg.rt_params.eta_r != 0.0)
        throw ConfigError("MCAR scenario: indicators must be independent of everything");
      break;
    case AssumptionVariant::General:
      break;
  }
  if (cfg.null_effect && (cfg.y_params.beta_t != 0.0 || cfg.y_params.beta_tx != 0.0))
    throw ConfigError("null_effect scenario requires beta_t = beta_tx = 0");
  if (!(cfg.target_obs_rate > 0.0 && cfg.target_obs_rate < 1.0))
    throw ConfigError("target_obs_rate must lie in (0,1)");
  if (cfg.x_kind == kBin && !(cfg.x_params.p_x >= 0.0 && cfg.x_params.p_x <= 1.0))
    throw ConfigError("p_x must lie in [0,1]");
  if (cfg.x_kind == kCont && !(cfg.x_params.sigma_x > 0))
    throw ConfigError("sigma_x must be positive");
  if (cfg.t_kind == kCont && !(cfg.t_params.sigma_t > 0))
    throw ConfigError("sigma_t must be positive");
  if (cfg.y_kind == kCont && !(cfg.y_params.sigma_y > 0))
    throw ConfigError("sigma_y must be positive");
  if (!cfg.assumption.identifying_covariates.empty())
    cfg.assumption.validate(1);
}

std::string scenario_id(VariableKind x_kind, VariableKind t_kind, VariableKind y_kind,
                        AssumptionVariant assumption, bool null_effect) {
  std::string id{kind_letter(x_kind), kind_letter(t_kind), kind_letter(y_kind)};
  id += "-" + to_string(assumption);
  if (null_effect) id += "-null";
  return id;
}

ScenarioConfig default_scenario(VariableKind x_kind, VariableKind t_kind,
                                 VariableKind y_kind, AssumptionVariant assumption,
                                 bool null_effect) {
  ScenarioConfig c;
  c.id = scenario_id(x_kind, t_kind, y_kind, assumption, null_effect);
  c.x_kind = x_kind;
  c.t_kind = t_kind;
  c.y_kind = y_kind;
  c.assumption.variant = assumption;
  c.null_effect = null_effect;

  c.x_params = {0.5, 0.2, 1.0};
  if (t_kind == kBin)
    c.t_params = {-0.3, 0.9, 1.0};
  else
    c.t_params = {0.5, 0.9, 1.0};
  if (y_kind == kBin)
    c.y_params = {-0.4, 1.1, 0.9, 0.5, 1.0};
  else
    c.y_params = {-0.3, 1.0, 0.8, 0.5, 1.0};
  if (null_effect) {
    c.y_params.beta_t = 0.0;
    c.y_params.beta_tx = 0.0;
  }

  if (x_kind == kBin)
    c.rx_params = {std::nullopt, 0.6, -0.4};
  else
    c.rx_params = {std::nullopt, -1.0, 0.6};
  if (t_kind == kBin)
    c.rt_params = {std::nullopt, 0.4, 0.4, 0.5};
  else
    c.rt_params = {std::nullopt, -0.6, -0.4, 0.5};

  RyParams& r = c.ry_params;
  r.rx_coef = 0.4;
  r.rt_coef = 0.4;
  const bool yb = y_kind == kBin;
  switch (assumption) {
    case AssumptionVariant::A1:
      r.u_x = yb ? -0.8 : -0.4;
      r.u_t = yb ? 0.9 : -0.4;
      break;
    case AssumptionVariant::A2:
      r.u_x = yb ? -0.8 : -0.4;
      r.u_y = yb ? 2.2 : -1.8;
      break;
    case AssumptionVariant::A3:
      r.u_t = yb ? 0.9 : -0.4;
      r.u_y = yb ? 2.2 : -1.8;
      break;
    default:
      throw ConfigError("simulation table only defines A1, A2 and A3 scenarios");
  }
  return c;
}

std::vector<ScenarioConfig> scenario_grid(AssumptionVariant assumption, bool null_effect) {
  std::vector<ScenarioConfig> out;
  for (VariableKind xk : {kBin, kCont})
    for (VariableKind tk : {kBin, kCont})
      for (VariableKind yk : {kBin, kCont})
        out.push_back(default_scenario(xk, tk, yk, assumption, null_effect));
  return out;
}

double calibrate_intercept(const LogitSampler& sampler, double target_obs_rate,
                           std::uint64_t seed, const CalibrationOptions& opts) {
  if (!(target_obs_rate > 0.0 && target_obs_rate < 1.0))
    throw CalibrationError("target observation rate must lie in (0,1)");
  Rng rng(seed);
  std::vector<double> draws(opts.draws);
  for (auto& d : draws) d = sampler(rng);

  auto rate = [&](double c) {
    double s = 0.0;
    for (double d : draws) s += expit(c + d);
    return s / static_cast<double>(draws.size());
  };

  double lo = opts.lower, hi = opts.upper;
  const double r_lo = rate(lo), r_hi = rate(hi);
  if (r_lo > target_obs_rate || r_hi < target_obs_rate) {
    std::ostringstream os;
    os << "target observation rate " << target_obs_rate << " unreachable: achieved range ["
       << r_lo << ", " << r_hi << "] over intercepts [" << lo << ", " << hi << "]";
    throw CalibrationError(os.str());
  }
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    mid = 0.5 * (lo + hi);
    if (rate(mid) < target_obs_rate)
      lo = mid;
    else
      hi = mid;
  }
  mid = 0.5 * (lo + hi);
  if (std::abs(rate(mid) - target_obs_rate) > opts.tol) {
    std::ostringstream os;
    os << "calibration did not reach tolerance " << opts.tol << " (rate " << rate(mid) << ")";
    throw CalibrationError(os.str());
  }
  return mid;
}

ScenarioConfig calibrate_scenario(ScenarioConfig cfg, std::uint64_t seed,
                                  const CalibrationOptions& opts) {
  validate_scenario(cfg);
  const double target = cfg.target_obs_rate;

  cfg.rx_params.gamma0 = calibrate_intercept(
      [&cfg](Rng& rng) {
        const double x = draw_x(cfg, rng);
        const double t = draw_t(cfg, x, rng);
        return rx_slope_part(cfg, x, t);
      },
      target, derive_seed(seed, 1), opts);

  cfg.rt_params.eta0 = calibrate_intercept(
      [&cfg](Rng& rng) {
        const double x = draw_x(cfg, rng);
        const double t = draw_t(cfg, x, rng);
        const int rx = rng.bernoulli(expit(*cfg.rx_params.gamma0 + rx_slope_part(cfg, x, t)));
        return rt_slope_part(cfg, x, t, rx);
      },
      target, derive_seed(seed, 2), opts);

  cfg.ry_params.phi0 = calibrate_intercept(
      [&cfg](Rng& rng) {
        const double x = draw_x(cfg, rng);
        const double t = draw_t(cfg, x, rng);
        const double y = draw_y(cfg, x, t, rng);
        const int rx = rng.bernoulli(expit(*cfg.rx_params.gamma0 + rx_slope_part(cfg, x, t)));
        const int rt =
            rng.bernoulli(expit(*cfg.rt_params.eta0 + rt_slope_part(cfg, x, t, rx)));
        return ry_slope_part(cfg, x, t, y, rx, rt);
      },
      target, derive_seed(seed, 3), opts);
  return cfg;
}

SimulatedData simulate(const ScenarioConfig& cfg_in, std::size_t n, std::uint64_t seed) {
  validate_scenario(cfg_in);
  const ScenarioConfig cfg =
      cfg_in.calibrated() ? cfg_in : calibrate_scenario(cfg_in, derive_seed(seed, 0xca11b));

  SimulatedData out;
  for (Dataset* d : {&out.observed, &out.latent}) {
    d->x_kinds = {cfg.x_kind};
    d->t_kind = cfg.t_kind;
    d->y_kind = cfg.y_kind;
    d->units.reserve(n);
  }
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const Draw d = draw_unit(cfg, rng);
    Unit latent;
    latent.x = {d.x};
    latent.t = d.t;
    latent.y = d.y;
    latent.rx = {1};
    latent.rt = 1;
    latent.ry = 1;

    Unit obs;
    obs.rx = {static_cast<std::uint8_t>(d.rx)};
    obs.rt = static_cast<std::uint8_t>(d.rt);
    obs.ry = static_cast<std::uint8_t>(d.ry);
    obs.x = {d.rx ? std::optional<double>(d.x) : std::nullopt};
    if (d.rt) obs.t = d.t;
    if (d.ry) obs.y = d.y;

    out.latent.units.push_back(std::move(latent));
    out.observed.units.push_back(std::move(obs));
  }
  return out;
}

double true_outcome_mean(const ScenarioConfig& cfg, double x, double t) {
  const auto& b = cfg.y_params;
  const double lp = b.beta0 + b.beta_t * t + b.beta_x * x + b.beta_tx * t * x;
  return cfg.y_kind == kBin ? expit(lp) : lp;
}

double true_cate(const ScenarioConfig& cfg, const std::vector<double>& x, double t1,
                 double t0) {
  const double xv = x.empty() ? 0.0 : x.front();
  if (cfg.y_kind == kCont) {
    const auto& b = cfg.y_params;
    return (b.beta_t + b.beta_tx * xv) * (t1 - t0);
  }
  return true_outcome_mean(cfg, xv, t1) - true_outcome_mean(cfg, xv, t0);
}

}  // namespace catemnar
