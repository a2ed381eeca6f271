#include "catemnar/baselines.hpp"

namespace catemnar {

namespace {

CateEstimate plug_in(const OutcomeModel& om, const std::vector<double>& x, double t1, double t0,
                     const std::string& name) {
  if (x.size() < om.design.covariates_needed())
    throw ConfigError("query covariate vector has wrong dimension");
  CateEstimate est;
  est.t1 = t1;
  est.t0 = t0;
  est.x_query = x;
  est.estimator = name;
  est.tau = om.mean(x, t1) - om.mean(x, t0);
  const auto labels = om.design.labels();
  for (std::size_t k = 0; k < labels.size(); ++k) est.diagnostics["beta_" + labels[k]] = om.beta(k);
  return est;
}

}  // namespace

CateEstimate oracle_fit(const Dataset& latent, const OutcomeModel& model,
                        const std::vector<double>& x, double t1, double t0) {
  for (const auto& u : latent.units)
    if (!u.complete()) throw ConfigError("oracle fit requires fully observed latent data");
  auto est = plug_in(fit_complete_case_outcome(latent, model), x, t1, t0, "oracle");
  est.diagnostics["n_used"] = static_cast<double>(latent.n());
  return est;
}

CateEstimate oracle_fit(const SimulatedData& sim, const OutcomeModel& model,
                        const std::vector<double>& x, double t1, double t0) {
  return oracle_fit(sim.latent, model, x, t1, t0);
}

CateEstimate cca_fit(const Dataset& d, const OutcomeModel& model, const std::vector<double>& x,
                     double t1, double t0) {
  auto est = plug_in(fit_complete_case_outcome(d, model), x, t1, t0, "cca");
  est.diagnostics["n_used"] = static_cast<double>(complete_cases(d).n());
  return est;
}

CateEstimate miss_indicator_fit(const Dataset& d, const OutcomeModel& model,
                                const std::vector<double>& x, double t1, double t0) {
  const std::size_t p = d.p();
  if (x.size() != p) throw ConfigError("query covariate vector has wrong dimension");
  std::vector<std::size_t> flagged;
  for (std::size_t j = 0; j < p; ++j) {
    bool any = false;
    for (const auto& u : d.units)
      if (u.rt && u.ry && !u.rx[j]) any = true;
    if (any) flagged.push_back(j);
  }

  Dataset aug;
  aug.x_kinds = d.x_kinds;
  for (std::size_t k = 0; k < flagged.size(); ++k) aug.x_kinds.push_back(VariableKind::Binary);
  aug.t_kind = d.t_kind;
  aug.y_kind = d.y_kind;
  for (const auto& u : d.units) {
    if (!u.rt || !u.ry) continue;
    Unit a;
    a.t = u.t;
    a.y = u.y;
    a.rt = 1;
    a.ry = 1;
    for (std::size_t j = 0; j < p; ++j) {
      a.x.push_back(u.rx[j] ? u.x[j] : std::optional<double>(0.0));
      a.rx.push_back(1);
    }
    for (std::size_t j : flagged) {
      a.x.push_back(u.rx[j] ? 0.0 : 1.0);
      a.rx.push_back(1);
    }
    aug.units.push_back(std::move(a));
  }

  OutcomeModel am = model;
  std::vector<std::string> terms = model.design.labels();
  for (std::size_t k = 0; k < flagged.size(); ++k) {
    const std::string col = "x" + std::to_string(p + k + 1);
    terms.push_back(col);
  }
  am.design = Design::parse(terms);
  if (model.family == OutcomeFamily::TwoPart) {
    std::vector<std::string> pterms =
        (model.positive_design.dim() ? model.positive_design : model.design).labels();
    for (std::size_t k = 0; k < flagged.size(); ++k) {
      const std::string col = "x" + std::to_string(p + k + 1);
      pterms.push_back(col);
    }
    am.positive_design = Design::parse(pterms);
  }

  std::vector<double> xq = x;
  xq.resize(p + flagged.size(), 0.0);
  auto est = plug_in(fit_complete_case_outcome(aug, am), xq, t1, t0, "miss-ind");
  est.x_query = x;
  est.diagnostics["n_used"] = static_cast<double>(aug.n());
  est.diagnostics["indicator_columns"] = static_cast<double>(flagged.size());
  if (flagged.empty()) est.notes.push_back("no missing covariates among used units; indicator columns dropped");
  return est;
}

}  // namespace catemnar
