#include "catemnar/config_io.hpp"

#include <fstream>
#include <set>

namespace catemnar {

namespace {

void check_keys(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

template <class T>
T get(const Json& j, const std::string& key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad value for '" + key + "' in " + where + ": " + e.what());
  }
}

template <class T>
void maybe(const Json& j, const std::string& key, T& out, const std::string& where) {
  if (j.contains(key)) out = get<T>(j, key, where);
}

void maybe_opt(const Json& j, const std::string& key, std::optional<double>& out, const std::string& where) {
  if (!j.contains(key)) return;
  if (j.at(key).is_null())
    out.reset();
  else
    out = get<double>(j, key, where);
}

VariableKind kind_letter(char c) {
  if (c == 'b') return VariableKind::Binary;
  if (c == 'c') return VariableKind::Continuous;
  throw ConfigError(std::string("scenario kind letter must be b or c, got '") + c + "'");
}

}  // namespace

ScenarioConfig scenario_from_id(const std::string& id) {
  if (id.size() < 6 || id[3] != '-') throw ConfigError("scenario id must look like 'bcb-A2' or 'bcb-A2-null'");
  const auto xk = kind_letter(id[0]), tk = kind_letter(id[1]), yk = kind_letter(id[2]);
  std::string rest = id.substr(4);
  bool null_effect = false;
  if (rest.size() > 5 && rest.substr(rest.size() - 5) == "-null") {
    null_effect = true;
    rest = rest.substr(0, rest.size() - 5);
  }
  return default_scenario(xk, tk, yk, parse_assumption(rest), null_effect);
}

ScenarioConfig scenario_from_json(const Json& j) {
  if (j.is_string()) return scenario_from_id(j.get<std::string>());
  const std::string w = "scenario";
  check_keys(j, {"id", "x_kind", "t_kind", "y_kind", "assumption", "null_effect", "target_obs_rate", "x_params",
                 "t_params", "y_params", "rx_params", "rt_params", "ry_params"},
             w);
  ScenarioConfig s;
  if (j.contains("id")) {
    s = scenario_from_id(get<std::string>(j, "id", w));
  } else {
    const auto xk = parse_variable_kind(j.value("x_kind", std::string("binary")));
    const auto tk = parse_variable_kind(j.value("t_kind", std::string("binary")));
    const auto yk = parse_variable_kind(j.value("y_kind", std::string("binary")));
    const auto av = parse_assumption(j.value("assumption", std::string("A2")));
    const bool base_ok = av == AssumptionVariant::A1 || av == AssumptionVariant::A2 || av == AssumptionVariant::A3;
    s = default_scenario(xk, tk, yk, base_ok ? av : AssumptionVariant::A1, j.value("null_effect", false));
    if (!base_ok) {
      s.ry_params.u_x = s.ry_params.u_t = s.ry_params.u_y = 0.0;
      s.assumption.variant = av;
      s.id = scenario_id(xk, tk, yk, av, s.null_effect);
    }
  }
  maybe(j, "target_obs_rate", s.target_obs_rate, w);
  if (j.contains("x_params")) {
    const auto& b = j["x_params"];
    check_keys(b, {"p_x", "mu_x", "sigma_x"}, "x_params");
    maybe(b, "p_x", s.x_params.p_x, "x_params");
    maybe(b, "mu_x", s.x_params.mu_x, "x_params");
    maybe(b, "sigma_x", s.x_params.sigma_x, "x_params");
  }
  if (j.contains("t_params")) {
    const auto& b = j["t_params"];
    check_keys(b, {"alpha0", "alpha_x", "sigma_t"}, "t_params");
    maybe(b, "alpha0", s.t_params.alpha0, "t_params");
    maybe(b, "alpha_x", s.t_params.alpha_x, "t_params");
    maybe(b, "sigma_t", s.t_params.sigma_t, "t_params");
  }
  if (j.contains("y_params")) {
    const auto& b = j["y_params"];
    check_keys(b, {"beta0", "beta_t", "beta_x", "beta_tx", "sigma_y"}, "y_params");
    maybe(b, "beta0", s.y_params.beta0, "y_params");
    maybe(b, "beta_t", s.y_params.beta_t, "y_params");
    maybe(b, "beta_x", s.y_params.beta_x, "y_params");
    maybe(b, "beta_tx", s.y_params.beta_tx, "y_params");
    maybe(b, "sigma_y", s.y_params.sigma_y, "y_params");
  }
  if (j.contains("rx_params")) {
    const auto& b = j["rx_params"];
    check_keys(b, {"gamma0", "gamma_x", "gamma_t"}, "rx_params");
    maybe_opt(b, "gamma0", s.rx_params.gamma0, "rx_params");
    maybe(b, "gamma_x", s.rx_params.gamma_x, "rx_params");
    maybe(b, "gamma_t", s.rx_params.gamma_t, "rx_params");
  }
  if (j.contains("rt_params")) {
    const auto& b = j["rt_params"];
    check_keys(b, {"eta0", "eta_x", "eta_t", "eta_r"}, "rt_params");
    maybe_opt(b, "eta0", s.rt_params.eta0, "rt_params");
    maybe(b, "eta_x", s.rt_params.eta_x, "rt_params");
    maybe(b, "eta_t", s.rt_params.eta_t, "rt_params");
    maybe(b, "eta_r", s.rt_params.eta_r, "rt_params");
  }
  if (j.contains("ry_params")) {
    const auto& b = j["ry_params"];
    check_keys(b, {"phi0", "rx_coef", "rt_coef", "u_x", "u_t", "u_y"}, "ry_params");
    maybe_opt(b, "phi0", s.ry_params.phi0, "ry_params");
    maybe(b, "rx_coef", s.ry_params.rx_coef, "ry_params");
    maybe(b, "rt_coef", s.ry_params.rt_coef, "ry_params");
    maybe(b, "u_x", s.ry_params.u_x, "ry_params");
    maybe(b, "u_t", s.ry_params.u_t, "ry_params");
    maybe(b, "u_y", s.ry_params.u_y, "ry_params");
  }
  validate_scenario(s);
  return s;
}

Json scenario_to_json(const ScenarioConfig& s) {
  auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
  return Json{
      {"id", s.id},
      {"x_kind", to_string(s.x_kind)},
      {"t_kind", to_string(s.t_kind)},
      {"y_kind", to_string(s.y_kind)},
      {"assumption", to_string(s.assumption.variant)},
      {"null_effect", s.null_effect},
      {"target_obs_rate", s.target_obs_rate},
      {"x_params", {{"p_x", s.x_params.p_x}, {"mu_x", s.x_params.mu_x}, {"sigma_x", s.x_params.sigma_x}}},
      {"t_params",
       {{"alpha0", s.t_params.alpha0}, {"alpha_x", s.t_params.alpha_x}, {"sigma_t", s.t_params.sigma_t}}},
      {"y_params",
       {{"beta0", s.y_params.beta0},
        {"beta_t", s.y_params.beta_t},
        {"beta_x", s.y_params.beta_x},
        {"beta_tx", s.y_params.beta_tx},
        {"sigma_y", s.y_params.sigma_y}}},
      {"rx_params",
       {{"gamma0", opt(s.rx_params.gamma0)}, {"gamma_x", s.rx_params.gamma_x}, {"gamma_t", s.rx_params.gamma_t}}},
      {"rt_params",
       {{"eta0", opt(s.rt_params.eta0)},
        {"eta_x", s.rt_params.eta_x},
        {"eta_t", s.rt_params.eta_t},
        {"eta_r", s.rt_params.eta_r}}},
      {"ry_params",
       {{"phi0", opt(s.ry_params.phi0)},
        {"rx_coef", s.ry_params.rx_coef},
        {"rt_coef", s.ry_params.rt_coef},
        {"u_x", s.ry_params.u_x},
        {"u_t", s.ry_params.u_t},
        {"u_y", s.ry_params.u_y}}},
  };
}

RunConfig run_config_from_json(const Json& j) {
  const std::string w = "config";
  check_keys(j, {"scenarios", "schema", "assumption", "identifying_covariates", "query", "family", "outcome_design",
                 "positive_design", "response_design", "sieve", "regularization", "em", "bootstrap", "sensitivity",
                 "estimators", "replicates", "n", "seed", "threads"},
             w);
  RunConfig rc;
  if (j.contains("scenarios")) {
    if (!j["scenarios"].is_array()) throw ConfigError("'scenarios' must be an array");
    for (const auto& s : j["scenarios"]) rc.scenarios.push_back(scenario_from_json(s));
  }
  if (j.contains("schema")) {
    const auto& s = j["schema"];
    check_keys(s, {"x_kinds", "t_kind", "y_kind"}, "schema");
    rc.schema.x_kinds.clear();
    for (const auto& k : get<std::vector<std::string>>(s, "x_kinds", "schema"))
      rc.schema.x_kinds.push_back(parse_variable_kind(k));
    rc.schema.t_kind = parse_variable_kind(s.value("t_kind", std::string("binary")));
    rc.schema.y_kind = parse_variable_kind(s.value("y_kind", std::string("binary")));
    rc.schema_given = true;
  }
  if (j.contains("assumption")) rc.assumption.variant = parse_assumption(get<std::string>(j, "assumption", w));
  if (j.contains("identifying_covariates")) {
    for (int c : get<std::vector<int>>(j, "identifying_covariates", w)) {
      if (c < 1) throw ConfigError("identifying_covariates are 1-based column numbers");
      rc.assumption.identifying_covariates.push_back(static_cast<std::size_t>(c - 1));
    }
  }
  if (j.contains("query")) {
    const auto& q = j["query"];
    check_keys(q, {"x", "t1", "t0"}, "query");
    maybe(q, "x", rc.x, "query");
    maybe(q, "t1", rc.t1, "query");
    maybe(q, "t0", rc.t0, "query");
  }
  if (j.contains("family")) rc.family = parse_outcome_family(get<std::string>(j, "family", w));
  maybe(j, "outcome_design", rc.outcome_design, w);
  maybe(j, "positive_design", rc.positive_design, w);
  maybe(j, "response_design", rc.response_design, w);
  if (j.contains("sieve")) {
    const auto& s = j["sieve"];
    check_keys(s, {"J", "Jx", "basis", "whiten", "grid_points"}, "sieve");
    maybe(s, "J", rc.sieve.J, "sieve");
    maybe(s, "Jx", rc.sieve.Jx, "sieve");
    maybe(s, "whiten", rc.sieve.whiten, "sieve");
    maybe(s, "grid_points", rc.sieve.grid_points, "sieve");
    if (s.contains("basis")) {
      const auto b = get<std::string>(s, "basis", "sieve");
      if (b == "hermite-envelope")
        rc.sieve.basis_kind = BasisKind::HermiteEnvelope;
      else if (b == "saturated-binary")
        rc.sieve.basis_kind = BasisKind::SaturatedBinary;
      else
        throw ConfigError("unknown sieve basis '" + b + "'");
    }
    rc.sieve.validate();
  }
  if (j.contains("regularization")) {
    const auto& r = j["regularization"];
    check_keys(r, {"B", "pi_min", "lambda"}, "regularization");
    maybe(r, "B", rc.reg.bound_B, "regularization");
    maybe(r, "pi_min", rc.reg.pi_min, "regularization");
    if (r.contains("lambda")) {
      const auto rows = get<std::vector<std::vector<double>>>(r, "lambda", "regularization");
      rc.reg.lambda_matrix.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows.size()) throw ConfigError("regularization lambda must be square");
        for (std::size_t k = 0; k < rows.size(); ++k)
          rc.reg.lambda_matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
      }
    }
  }
  if (j.contains("em")) {
    const auto& e = j["em"];
    check_keys(e, {"M", "tol", "max_iter", "lambda_clip"}, "em");
    maybe(e, "M", rc.em.M, "em");
    maybe(e, "tol", rc.em.tol, "em");
    maybe(e, "max_iter", rc.em.max_iter, "em");
    maybe(e, "lambda_clip", rc.em.lambda_clip, "em");
    rc.em.validate();
  }
  if (j.contains("bootstrap")) {
    const auto& b = j["bootstrap"];
    check_keys(b, {"B", "level"}, "bootstrap");
    maybe(b, "B", rc.bootstrap, "bootstrap");
    maybe(b, "level", rc.level, "bootstrap");
  }
  if (j.contains("sensitivity")) {
    const auto& s = j["sensitivity"];
    check_keys(s, {"grid", "warm_start"}, "sensitivity");
    maybe(s, "grid", rc.delta_grid, "sensitivity");
    maybe(s, "warm_start", rc.warm_start, "sensitivity");
  }
  if (j.contains("estimators")) {
    rc.estimators.clear();
    for (const auto& e : get<std::vector<std::string>>(j, "estimators", w)) rc.estimators.push_back(parse_estimator(e));
  }
  maybe(j, "replicates", rc.replicates, w);
  maybe(j, "n", rc.n, w);
  maybe(j, "seed", rc.seed, w);
  maybe(j, "threads", rc.threads, w);
  return rc;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  Json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

OutcomeModel outcome_model_from(const RunConfig& rc, const Dataset& d) {
  OutcomeModel m = default_outcome_model(d);
  if (rc.family) m.family = *rc.family;
  if (!rc.outcome_design.empty()) m.design = Design::parse(rc.outcome_design);
  if (!rc.positive_design.empty()) m.positive_design = Design::parse(rc.positive_design);
  if (m.family == OutcomeFamily::BernoulliLogit && d.y_kind != VariableKind::Binary)
    throw ConfigError("logistic outcome family requires a binary outcome");
  return m;
}

MissingnessModel response_model_from(const RunConfig& rc, const Dataset& d, OutcomeFamily family) {
  MissingnessModel m = default_missingness_model(rc.assumption, d.p(), family);
  if (!rc.response_design.empty()) m.design = Design::parse(rc.response_design);
  m.validate(d.p());
  return m;
}

Json estimate_to_json(const CateEstimate& e) {
  Json j{{"estimator", e.estimator}, {"tau", e.tau},       {"t1", e.t1},
         {"t0", e.t0},               {"x", e.x_query},     {"null_identified", e.null_identified},
         {"diagnostics", e.diagnostics}, {"notes", e.notes}};
  if (e.interval)
    j["interval"] = {{"lower", e.interval->lower},
                     {"upper", e.interval->upper},
                     {"level", e.interval->level},
                     {"resamples", e.interval->resamples},
                     {"failed_resamples", e.interval->failed_resamples},
                     {"unreliable", e.interval->unreliable}};
  return j;
}

}  // namespace catemnar
