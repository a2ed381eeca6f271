#include "catemnar/param_em.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "catemnar/glm.hpp"
#include "catemnar/rng.hpp"
#include "catemnar/stats.hpp"

namespace catemnar {

namespace {

const double kLog2Pi = std::log(2.0 * M_PI);

double log_normal(double y, double mu, double sigma) {
  const double z = (y - mu) / sigma;
  return -0.5 * kLog2Pi - std::log(sigma) - 0.5 * z * z;
}

bool binary_part(OutcomeFamily f) { return f != OutcomeFamily::GaussianLinear; }

Dataset indicator_dataset(const Dataset& d) {
  Dataset out = d;
  out.y_kind = VariableKind::Binary;
  for (auto& u : out.units)
    if (u.y) u.y = *u.y > 0 ? 1.0 : 0.0;
  return out;
}

double linear(const Design& design, const Eigen::VectorXd& beta, const std::vector<double>& x,
              double t, double y = 0.0) {
  double s = 0.0;
  for (std::size_t k = 0; k < design.terms.size(); ++k)
    s += beta(static_cast<Eigen::Index>(k)) * design.terms[k].eval(x, t, y);
  return s;
}

std::ptrdiff_t intercept_index(const Design& d) {
  for (std::size_t k = 0; k < d.terms.size(); ++k)
    if (d.terms[k].factors.empty()) return static_cast<std::ptrdiff_t>(k);
  return -1;
}

double log_sum_exp(const double* v, std::size_t n) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, v[i]);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

}  // namespace

std::string to_string(OutcomeFamily f) {
  switch (f) {
    case OutcomeFamily::BernoulliLogit: return "bernoulli-logit";
    case OutcomeFamily::GaussianLinear: return "gaussian-linear";
    case OutcomeFamily::TwoPart: return "two-part";
  }
  return "?";
}

OutcomeFamily parse_outcome_family(const std::string& s) {
  if (s == "bernoulli-logit" || s == "bernoulli" || s == "logit") return OutcomeFamily::BernoulliLogit;
  if (s == "gaussian-linear" || s == "gaussian" || s == "linear") return OutcomeFamily::GaussianLinear;
  if (s == "two-part" || s == "twopart") return OutcomeFamily::TwoPart;
  throw ConfigError("unknown outcome family '" + s + "'");
}

std::string to_string(OffsetTerm o) {
  switch (o) {
    case OffsetTerm::None: return "none";
    case OffsetTerm::Outcome: return "outcome";
    case OffsetTerm::Treatment: return "treatment";
    case OffsetTerm::IdentifyingCovariates: return "identifying-covariates";
  }
  return "?";
}

double OutcomeModel::mean(const std::vector<double>& x, double t) const {
  const double eta = linear(design, beta, x, t);
  switch (family) {
    case OutcomeFamily::BernoulliLogit: return expit(eta);
    case OutcomeFamily::GaussianLinear: return eta;
    case OutcomeFamily::TwoPart: return expit(eta) * std::exp(linear(positive_design, positive_beta, x, t));
  }
  return 0.0;
}

double OutcomeModel::log_density(const std::vector<double>& x, double t, double y) const {
  const double eta = linear(design, beta, x, t);
  if (family == OutcomeFamily::GaussianLinear) return log_normal(y, eta, sigma);
  return y > 0 ? log_expit(eta) : log_expit(-eta);
}

OutcomeModel default_outcome_model(const Dataset& d) {
  OutcomeModel m;
  m.family = d.y_kind == VariableKind::Binary ? OutcomeFamily::BernoulliLogit
                                              : OutcomeFamily::GaussianLinear;
  m.design = outcome_design_main_and_interactions(d.p());
  return m;
}

double MissingnessModel::offset(const std::vector<double>& x, double t, double y) const {
  if (offset_delta == 0.0) return 0.0;
  switch (offset_term) {
    case OffsetTerm::None: return 0.0;
    case OffsetTerm::Outcome: return offset_delta * (offset_on_indicator ? (y > 0 ? 1.0 : 0.0) : y);
    case OffsetTerm::Treatment: return offset_delta * t;
    case OffsetTerm::IdentifyingCovariates: {
      double s = 0.0;
      if (offset_columns.empty())
        for (double v : x) s += v;
      else
        for (std::size_t j : offset_columns) s += x[j];
      return offset_delta * s;
    }
  }
  return 0.0;
}

double MissingnessModel::linear_predictor(const std::vector<double>& x, double t, double y) const {
  return linear(design, lambda, x, t, y) + offset(x, t, y);
}

double MissingnessModel::prob(const std::vector<double>& x, double t, double y) const {
  return expit(linear_predictor(x, t, y));
}

void MissingnessModel::validate(std::size_t p) const {
  if (design.covariates_needed() > p) throw ConfigError("response design references a missing covariate");
  switch (assumption) {
    case AssumptionVariant::A2:
      if (design.uses(FactorKind::T))
        throw ConfigError("response design under A2 must not depend on the treatment");
      break;
    case AssumptionVariant::A3: {
      MissingnessAssumption a{AssumptionVariant::A3, identifying_covariates};
      a.validate(p);
      for (std::size_t j : a.id_columns(p))
        if (design.uses_covariate(j))
          throw ConfigError("response design under A3 must not depend on identifying covariate x" +
                            std::to_string(j + 1));
      break;
    }
    case AssumptionVariant::A1:
    case AssumptionVariant::MAR:
      if (design.uses(FactorKind::Y) || design.uses(FactorKind::D))
        throw ConfigError("response design under A1 must not depend on the outcome");
      break;
    case AssumptionVariant::MCAR:
      if (design.dim() != 1 || !design.terms[0].factors.empty())
        throw ConfigError("response design under MCAR is intercept-only");
      break;
    case AssumptionVariant::General:
      throw ConfigError("the general outcome-missingness mechanism is not identified");
  }
  if (lambda.size() && static_cast<std::size_t>(lambda.size()) != design.dim())
    throw ConfigError("response coefficient vector does not match its design");
}

MissingnessModel default_missingness_model(const MissingnessAssumption& a, std::size_t p,
                                           OutcomeFamily family) {
  a.validate(p);
  MissingnessModel m;
  m.assumption = a.variant;
  m.identifying_covariates = a.identifying_covariates;
  m.offset_on_indicator = family == OutcomeFamily::TwoPart;
  const std::string yname = family == OutcomeFamily::TwoPart ? "d" : "y";
  std::vector<std::string> terms = {"intercept"};
  auto all_x = [&] {
    for (std::size_t j = 1; j <= p; ++j) terms.push_back("x" + std::to_string(j));
  };
  switch (a.variant) {
    case AssumptionVariant::A2:
      all_x();
      terms.push_back(yname);
      m.offset_term = OffsetTerm::None;
      break;
    case AssumptionVariant::A3:
      terms.push_back("t");
      for (std::size_t j : a.complement_columns(p)) terms.push_back("x" + std::to_string(j + 1));
      terms.push_back(yname);
      m.offset_columns = a.id_columns(p);
      break;
    case AssumptionVariant::A1:
    case AssumptionVariant::MAR:
      all_x();
      terms.push_back("t");
      break;
    case AssumptionVariant::MCAR:
      break;
    case AssumptionVariant::General:
      throw ConfigError("the general outcome-missingness mechanism is not identified");
  }
  m.design = Design::parse(terms);
  return m;
}

void EmConfig::validate() const {
  if (M < 2) throw ConfigError("fractional imputation needs M >= 2");
  if (!(tol > 0)) throw ConfigError("EM tolerance must be positive");
  if (max_iter < 1) throw ConfigError("EM needs max_iter >= 1");
}

OutcomeModel fit_initial_outcome(const Dataset& d_in, OutcomeModel model) {
  const Dataset cc = complete_cases(model.family == OutcomeFamily::TwoPart ? indicator_dataset(d_in) : d_in);
  const std::size_t k = model.design.dim();
  if (model.design.covariates_needed() > d_in.p())
    throw ConfigError("outcome design references a missing covariate");
  if (model.design.uses(FactorKind::Y) || model.design.uses(FactorKind::D))
    throw ConfigError("outcome design must not contain the outcome");
  if (cc.n() < k + 1)
    throw InsufficientDataError("outcome model needs at least " + std::to_string(k + 1) +
                                " complete cases, found " + std::to_string(cc.n()));
  Eigen::MatrixXd U(cc.n(), k);
  Eigen::VectorXd y(cc.n());
  for (std::size_t i = 0; i < cc.n(); ++i) {
    const auto& u = cc.units[i];
    U.row(i) = model.design.row(u.x_values(), *u.t, 0.0).transpose();
    y(i) = *u.y;
  }
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(cc.n());
  require_full_rank(U, w, "complete-case outcome model");
  if (binary_part(model.family)) {
    for (Eigen::Index i = 0; i < y.size(); ++i)
      if (y(i) != 0.0 && y(i) != 1.0) throw ConfigError("logistic outcome model requires a binary outcome");
    GlmFit f = fit_logistic(U, y, w);
    model.beta = f.beta;
  } else {
    GlmFit f = fit_gaussian(U, y, w);
    model.beta = f.beta;
    model.sigma = std::sqrt(f.dispersion);
  }
  return model;
}

OutcomeModel fit_positive_part(const Dataset& d, OutcomeModel om) {
  if (om.positive_design.dim() == 0) om.positive_design = om.design;
  std::vector<const Unit*> pos;
  for (const auto& u : d.units)
    if (u.complete() && *u.y > 0) pos.push_back(&u);
  if (pos.size() < om.positive_design.dim() + 1)
    throw InsufficientDataError("too few positive complete cases for the magnitude model");
  Eigen::MatrixXd P(pos.size(), om.positive_design.dim());
  Eigen::VectorXd yp(pos.size());
  for (std::size_t i = 0; i < pos.size(); ++i) {
    P.row(i) = om.positive_design.row(pos[i]->x_values(), *pos[i]->t, 0.0).transpose();
    yp(i) = *pos[i]->y;
  }
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(pos.size());
  require_full_rank(P, ones, "positive-part model");
  GlmFit gf = fit_gamma_log(P, yp, ones);
  om.positive_beta = gf.beta;
  om.gamma_shape = 1.0 / std::max(gf.dispersion, 1e-300);
  return om;
}

OutcomeModel fit_complete_case_outcome(const Dataset& d, const OutcomeModel& model) {
  OutcomeModel om = fit_initial_outcome(d, model);
  if (om.family == OutcomeFamily::TwoPart) om = fit_positive_part(d, std::move(om));
  return om;
}

std::vector<double> e_step_exact_discrete(const Unit& u, const OutcomeModel& outcome,
                                          const MissingnessModel& miss) {
  if (!binary_part(outcome.family)) throw ConfigError("exact E-step requires a discrete outcome");
  if (!u.xt_observed() || u.ry != 0) throw ConfigError("exact E-step applies to units with only Y missing");
  const auto x = u.x_values();
  double lp[2];
  for (int y = 0; y < 2; ++y)
    lp[y] = outcome.log_density(x, *u.t, y) + log_expit(-miss.linear_predictor(x, *u.t, y));
  const double lse = log_sum_exp(lp, 2);
  if (!std::isfinite(lse)) throw EstimationError("degenerate E-step posterior (no mass on any outcome level)");
  return {std::exp(lp[0] - lse), std::exp(lp[1] - lse)};
}

std::vector<double> normalize_log_weights(const std::vector<double>& log_w) {
  const double lse = log_sum_exp(log_w.data(), log_w.size());
  if (!std::isfinite(lse)) throw EstimationError("fractional imputation weights are all zero");
  std::vector<double> w(log_w.size());
  for (std::size_t j = 0; j < w.size(); ++j) w[j] = std::exp(log_w[j] - lse);
  return w;
}

double effective_sample_size(const std::vector<double>& w) {
  double s = 0.0;
  for (double v : w) s += v * v;
  return s > 0 ? 1.0 / s : 0.0;
}

std::vector<ImputedUnit> fractional_impute(const Dataset& d, const OutcomeModel& proposal,
                                           const OutcomeModel& outcome, const MissingnessModel& miss,
                                           const EmConfig& cfg) {
  cfg.validate();
  if (proposal.family != OutcomeFamily::GaussianLinear)
    throw ConfigError("fractional imputation requires a continuous outcome model");
  Rng rng(cfg.seed);
  std::vector<ImputedUnit> out;
  for (std::size_t i = 0; i < d.n(); ++i) {
    const auto& u = d.units[i];
    if (!u.xt_observed() || u.ry != 0) continue;
    ImputedUnit iu;
    iu.unit = i;
    const double mu = proposal.mean(u.x_values(), *u.t);
    for (std::size_t j = 0; j < cfg.M; ++j) {
      const double y = rng.normal(mu, proposal.sigma);
      iu.draws.push_back(y);
      iu.log_proposal.push_back(log_normal(y, mu, proposal.sigma));
    }
    out.push_back(std::move(iu));
  }
  update_fractional_weights(out, d, proposal, outcome, miss);
  return out;
}

void update_fractional_weights(std::vector<ImputedUnit>& imp, const Dataset& d,
                               const OutcomeModel& /*proposal*/, const OutcomeModel& outcome,
                               const MissingnessModel& miss) {
  for (auto& iu : imp) {
    const auto& u = d.units.at(iu.unit);
    const auto x = u.x_values();
    std::vector<double> lw(iu.draws.size());
    for (std::size_t j = 0; j < lw.size(); ++j)
      lw[j] = outcome.log_density(x, *u.t, iu.draws[j]) +
              log_expit(-miss.linear_predictor(x, *u.t, iu.draws[j])) - iu.log_proposal[j];
    iu.weights = normalize_log_weights(lw);
    iu.ess = effective_sample_size(iu.weights);
  }
}

namespace {

// Stacked EM rows: observed units first, then candidate values of the
// missing outcomes grouped by unit.
struct EmRows {
  Eigen::MatrixXd U, Z;
  Eigen::VectorXd y, offset, resp, log_h;
  std::size_t n_obs = 0;
  std::vector<std::size_t> group_start;  // per missing unit, plus end sentinel
};

struct RowTerms {
  Eigen::VectorXd log_py, log_r;
};

RowTerms row_terms(const EmRows& rows, const OutcomeModel& om, const MissingnessModel& mm) {
  RowTerms rt;
  const Eigen::VectorXd eta_u = rows.U * om.beta;
  const Eigen::VectorXd eta_z = rows.Z * mm.lambda + rows.offset;
  const Eigen::Index R = rows.y.size();
  rt.log_py.resize(R);
  rt.log_r.resize(R);
  const bool gauss = om.family == OutcomeFamily::GaussianLinear;
  const double ls = std::log(om.sigma);
  for (Eigen::Index r = 0; r < R; ++r) {
    if (gauss) {
      const double z = (rows.y(r) - eta_u(r)) / om.sigma;
      rt.log_py(r) = -0.5 * kLog2Pi - ls - 0.5 * z * z;
    } else {
      rt.log_py(r) = rows.y(r) > 0 ? log_expit(eta_u(r)) : log_expit(-eta_u(r));
    }
    rt.log_r(r) = rows.resp(r) > 0 ? log_expit(eta_z(r)) : log_expit(-eta_z(r));
  }
  return rt;
}

// Observed-data log-likelihood; fills normalized candidate weights.
double loglik_and_weights(const EmRows& rows, const RowTerms& rt, bool exact, Eigen::VectorXd& w,
                          double* min_ess) {
  double ll = 0.0;
  for (std::size_t r = 0; r < rows.n_obs; ++r) ll += rt.log_py(r) + rt.log_r(r);
  w.resize(rows.y.size());
  w.head(rows.n_obs).setOnes();
  std::vector<double> buf;
  double mess = std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g + 1 < rows.group_start.size(); ++g) {
    const std::size_t a = rows.group_start[g], b = rows.group_start[g + 1];
    buf.resize(b - a);
    for (std::size_t r = a; r < b; ++r) buf[r - a] = rt.log_py(r) + rt.log_r(r) - rows.log_h(r);
    const double lse = log_sum_exp(buf.data(), buf.size());
    if (!std::isfinite(lse)) throw EstimationError("degenerate E-step: no posterior mass for a missing outcome");
    ll += lse - (exact ? 0.0 : std::log(static_cast<double>(b - a)));
    double s2 = 0.0;
    for (std::size_t r = a; r < b; ++r) {
      w(r) = std::exp(buf[r - a] - lse);
      s2 += w(r) * w(r);
    }
    mess = std::min(mess, 1.0 / s2);
  }
  if (min_ess) *min_ess = std::isfinite(mess) ? mess : 0.0;
  return ll;
}

double q_outcome(const RowTerms& rt, const Eigen::VectorXd& w) { return rt.log_py.dot(w); }
double q_response(const RowTerms& rt, const Eigen::VectorXd& w) { return rt.log_r.dot(w); }

}  // namespace

EmFit fit_em(const Dataset& d, const OutcomeModel& outcome_in, const MissingnessModel& miss_in,
             const EmConfig& cfg, const EmFit* warm) {
  cfg.validate();
  miss_in.validate(d.p());
  if (outcome_in.family == OutcomeFamily::BernoulliLogit && d.y_kind != VariableKind::Binary)
    throw ConfigError("logistic outcome model requires a binary outcome");
  if (outcome_in.family == OutcomeFamily::TwoPart && miss_in.design.uses(FactorKind::Y))
    throw ConfigError("two-part response design depends on the outcome only through d");

  const Dataset xt = subset_observed_xt(d);
  const Dataset work = outcome_in.family == OutcomeFamily::TwoPart ? indicator_dataset(xt) : xt;

  EmFit fit;
  EmTrace& tr = fit.trace;
  OutcomeModel om = fit_initial_outcome(work, outcome_in);
  const OutcomeModel proposal = om;
  MissingnessModel mm = miss_in;
  const bool exact = binary_part(om.family);
  tr.exact_e_step = exact;

  std::size_t n_obs = 0;
  for (const auto& u : work.units) n_obs += u.ry;
  const std::size_t n = work.n();
  mm.lambda = Eigen::VectorXd::Zero(mm.design.dim());
  if (const auto ic = intercept_index(mm.design); ic >= 0) {
    const double rate = static_cast<double>(n_obs) / static_cast<double>(n);
    const double c = rate <= 0 ? -cfg.lambda_clip : rate >= 1 ? cfg.lambda_clip : logit(rate);
    mm.lambda(ic) = std::clamp(c, -cfg.lambda_clip, cfg.lambda_clip);
  }
  if (warm) {
    if (warm->outcome.beta.size() != om.beta.size() || warm->missingness.lambda.size() != mm.lambda.size())
      throw ConfigError("warm start does not match the model designs");
    om.beta = warm->outcome.beta;
    om.sigma = warm->outcome.sigma;
    mm.lambda = warm->missingness.lambda;
  }

  // Assemble stacked rows.
  std::vector<ImputedUnit> imp;
  if (!exact && n_obs < n) imp = fractional_impute(work, proposal, om, mm, cfg);
  const std::size_t n_mis = n - n_obs;
  const std::size_t per = exact ? 2 : cfg.M;
  const std::size_t R = n_obs + n_mis * per;
  EmRows rows;
  rows.n_obs = n_obs;
  rows.U.resize(R, om.design.dim());
  rows.Z.resize(R, mm.design.dim());
  rows.y.resize(R);
  rows.offset.resize(R);
  rows.resp.resize(R);
  rows.log_h = Eigen::VectorXd::Zero(R);
  Eigen::VectorXd ubuf(om.design.dim()), zbuf(mm.design.dim());
  auto put = [&](std::size_t r, const std::vector<double>& x, double t, double y, double resp) {
    om.design.eval(x, t, y, ubuf.data());
    mm.design.eval(x, t, y, zbuf.data());
    rows.U.row(r) = ubuf.transpose();
    rows.Z.row(r) = zbuf.transpose();
    rows.y(r) = y;
    rows.offset(r) = mm.offset(x, t, y);
    rows.resp(r) = resp;
  };
  std::size_t r = 0;
  for (const auto& u : work.units)
    if (u.ry) put(r++, u.x_values(), *u.t, *u.y, 1.0);
  std::size_t mi = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& u = work.units[i];
    if (u.ry) continue;
    rows.group_start.push_back(r);
    const auto x = u.x_values();
    if (exact) {
      put(r++, x, *u.t, 0.0, 0.0);
      put(r++, x, *u.t, 1.0, 0.0);
    } else {
      const auto& iu = imp[mi++];
      for (std::size_t j = 0; j < per; ++j) {
        rows.log_h(r) = iu.log_proposal[j];
        put(r++, x, *u.t, iu.draws[j], 0.0);
      }
    }
  }
  rows.group_start.push_back(r);

  GlmOptions lopts;
  lopts.clip = cfg.lambda_clip;
  GlmOptions bopts;
  Eigen::VectorXd w;
  RowTerms rt = row_terms(rows, om, mm);
  double ll = loglik_and_weights(rows, rt, exact, w, &tr.min_ess);
  tr.loglik.push_back(ll);

  if (n_mis == 0) {
    // Nothing to impute: the outcome fit is the complete-case MLE and the
    // response model sees only ones.
    GlmFit lf = fit_logistic(rows.Z, rows.resp, w, rows.offset, mm.lambda, lopts);
    mm.lambda = lf.beta;
    tr.lambda_clipped = lf.clipped;
    tr.diagnostics.push_back("no missing outcomes: response model at the separation boundary");
    rt = row_terms(rows, om, mm);
    tr.loglik.push_back(loglik_and_weights(rows, rt, exact, w, &tr.min_ess));
    tr.q_gain.push_back(tr.loglik.back() - tr.loglik.front());
    tr.iterations = 1;
    tr.converged = true;
    tr.min_ess = 0.0;
  } else {
    for (tr.iterations = 0; tr.iterations < cfg.max_iter;) {
      ++tr.iterations;
      const double q_before = q_outcome(rt, w) + q_response(rt, w);
      // M-step for beta.
      OutcomeModel om_new = om;
      if (exact) {
        GlmFit bf = fit_logistic(rows.U, rows.y, w, {}, om.beta, bopts);
        om_new.beta = bf.beta;
      } else {
        GlmFit bf = fit_gaussian(rows.U, rows.y, w);
        om_new.beta = bf.beta;
        om_new.sigma = std::sqrt(std::max(bf.dispersion, 1e-300));
      }
      // M-step for lambda.
      MissingnessModel mm_new = mm;
      GlmFit lf = fit_logistic(rows.Z, rows.resp, w, rows.offset, mm.lambda, lopts);
      mm_new.lambda = lf.beta;
      RowTerms rt_new = row_terms(rows, om_new, mm_new);
      // Generalized-EM guard: keep each block only when it raises Q.
      if (q_outcome(rt_new, w) < q_outcome(rt, w)) {
        om_new = om;
        rt_new.log_py = rt.log_py;
      }
      if (q_response(rt_new, w) < q_response(rt, w)) {
        mm_new = mm;
        rt_new.log_r = rt.log_r;
      } else {
        tr.lambda_clipped = tr.lambda_clipped || lf.clipped;
      }
      tr.q_gain.push_back(q_outcome(rt_new, w) + q_response(rt_new, w) - q_before);
      om = om_new;
      mm = mm_new;
      rt = std::move(rt_new);
      const double ll_new = loglik_and_weights(rows, rt, exact, w, &tr.min_ess);
      tr.loglik.push_back(ll_new);
      const double scale = std::max(1.0, std::abs(ll));
      if (exact && ll_new < ll - 1e-10 * scale) {
        std::ostringstream os;
        os.precision(17);
        os << "internal error: EM log-likelihood decreased from " << ll << " to " << ll_new;
        throw EstimationError(os.str());
      }
      const double change = std::abs(ll_new - ll) / scale;
      ll = ll_new;
      if (change < cfg.tol) {
        tr.converged = true;
        break;
      }
    }
    if (!tr.converged)
      tr.diagnostics.push_back("EM reached max_iter=" + std::to_string(cfg.max_iter) +
                               " without convergence; last iterate returned");
  }
  if (tr.lambda_clipped)
    tr.diagnostics.push_back("response coefficients clipped at |lambda| <= " + std::to_string(cfg.lambda_clip));

  // Covariance of beta from the final weighted M-step.
  if (exact) {
    const Eigen::VectorXd eta = rows.U * om.beta;
    Eigen::VectorXd hw(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      const double p = expit(eta(i));
      hw(i) = w(i) * p * (1 - p);
    }
    fit.beta_cov = (rows.U.transpose() * hw.asDiagonal() * rows.U).ldlt().solve(
        Eigen::MatrixXd::Identity(om.beta.size(), om.beta.size()));
  } else {
    fit.beta_cov = om.sigma * om.sigma *
                   (rows.U.transpose() * w.asDiagonal() * rows.U)
                       .ldlt()
                       .solve(Eigen::MatrixXd::Identity(om.beta.size(), om.beta.size()));
  }

  if (om.family == OutcomeFamily::TwoPart) om = fit_positive_part(xt, std::move(om));
  fit.outcome = std::move(om);
  fit.missingness = std::move(mm);
  return fit;
}

CateEstimate cate_from_fit(const EmFit& fit, const std::vector<double>& x, double t1, double t0) {
  CateEstimate est;
  est.t1 = t1;
  est.t0 = t0;
  est.x_query = x;
  est.estimator = "para-" + to_string(fit.missingness.assumption);
  const auto& om = fit.outcome;
  est.tau = om.mean(x, t1) - om.mean(x, t0);
  const auto& tr = fit.trace;
  est.diagnostics["em_iterations"] = static_cast<double>(tr.iterations);
  est.diagnostics["em_converged"] = tr.converged ? 1.0 : 0.0;
  est.diagnostics["loglik"] = tr.loglik.empty() ? 0.0 : tr.loglik.back();
  est.diagnostics["min_ess"] = tr.min_ess;
  est.diagnostics["offset_delta"] = fit.missingness.offset_delta;
  const auto bl = om.design.labels();
  for (std::size_t k = 0; k < bl.size(); ++k) est.diagnostics["beta_" + bl[k]] = om.beta(k);
  const auto ll = fit.missingness.design.labels();
  for (std::size_t k = 0; k < ll.size(); ++k) est.diagnostics["lambda_" + ll[k]] = fit.missingness.lambda(k);
  if (om.family == OutcomeFamily::GaussianLinear) est.diagnostics["sigma"] = om.sigma;
  if (om.family == OutcomeFamily::TwoPart) {
    est.diagnostics["p_t1"] = expit(linear(om.design, om.beta, x, t1));
    est.diagnostics["p_t0"] = expit(linear(om.design, om.beta, x, t0));
    est.diagnostics["m_t1"] = std::exp(linear(om.positive_design, om.positive_beta, x, t1));
    est.diagnostics["m_t0"] = std::exp(linear(om.positive_design, om.positive_beta, x, t0));
  }
  est.notes = tr.diagnostics;

  // Parametric completeness: the shadow variable must shift the outcome mean.
  if (om.family == OutcomeFamily::GaussianLinear &&
      (fit.missingness.assumption == AssumptionVariant::A2 ||
       fit.missingness.assumption == AssumptionVariant::A3)) {
    std::vector<std::pair<std::string, Eigen::VectorXd>> contrasts;
    if (fit.missingness.assumption == AssumptionVariant::A2) {
      contrasts.push_back({"treatment slope at x",
                           om.design.row(x, 1.0, 0.0) - om.design.row(x, 0.0, 0.0)});
    } else {
      MissingnessAssumption a{AssumptionVariant::A3, fit.missingness.identifying_covariates};
      for (std::size_t j : a.id_columns(x.size()))
        for (double t : {t1, t0}) {
          auto xp = x;
          xp[j] += 1.0;
          contrasts.push_back({"x" + std::to_string(j + 1) + " slope at t=" + std::to_string(t),
                               om.design.row(xp, t, 0.0) - om.design.row(x, t, 0.0)});
        }
    }
    for (const auto& [name, c] : contrasts) {
      const double q = c.dot(om.beta);
      const double se = std::sqrt(std::max(0.0, c.dot(fit.beta_cov * c)));
      if (std::abs(q) < 2.0 * se) {
        std::ostringstream os;
        os << "completeness near-degenerate: " << name << " = " << q << " within 2 SE (" << se << ") of 0";
        est.notes.push_back(os.str());
        est.diagnostics["completeness_warning"] = 1.0;
      }
    }
  }
  return est;
}

CateEstimate estimate_cate_param(const Dataset& d, const OutcomeModel& outcome,
                                 const MissingnessModel& miss, const EmConfig& cfg,
                                 const std::vector<double>& x, double t1, double t0,
                                 const EmFit* warm, EmFit* fit_out) {
  if (x.size() != d.p()) throw ConfigError("query covariate vector has wrong dimension");
  EmFit fit = fit_em(d, outcome, miss, cfg, warm);
  CateEstimate est = cate_from_fit(fit, x, t1, t0);
  if (fit_out) *fit_out = std::move(fit);
  return est;
}

}  // namespace catemnar
