#include "catemnar/np2sls.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "catemnar/kernel.hpp"
#include "catemnar/stats.hpp"

namespace catemnar {

std::string to_string(BasisKind k) {
  return k == BasisKind::SaturatedBinary ? "saturated-binary" : "hermite-envelope";
}

void SieveConfig::validate() const {
  if (J < 1) throw ConfigError("sieve dimension J must be at least 1");
  if (Jx < 1) throw ConfigError("sieve dimension Jx must be at least 1");
  if (grid_points < 1) throw ConfigError("grid_points must be at least 1");
}

void RegularizationConfig::validate(std::size_t dim) const {
  if (!(bound_B > 0)) throw ConfigError("regularization bound B must be positive");
  if (!(pi_min > 0 && pi_min < 1)) throw ConfigError("pi_min must lie in (0,1)");
  if (lambda_matrix.size() == 0) return;
  if (static_cast<std::size_t>(lambda_matrix.rows()) != dim ||
      static_cast<std::size_t>(lambda_matrix.cols()) != dim)
    throw ConfigError("penalty matrix has wrong dimension");
  if (!lambda_matrix.isApprox(lambda_matrix.transpose(), 1e-12))
    throw ConfigError("penalty matrix must be symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(lambda_matrix);
  if (llt.info() != Eigen::Success) throw ConfigError("penalty matrix must be positive definite");
}

Eigen::VectorXd hermite_envelope_basis(double v, std::size_t J, double mean, double sd) {
  if (!(sd > 0)) throw ConfigError("basis standardization needs sd > 0");
  const double z = (v - mean) / sd;
  const double env = std::exp(-z * z);
  Eigen::VectorXd h(static_cast<Eigen::Index>(J));
  double pw = 1.0;
  for (std::size_t j = 0; j < J; ++j) {
    h(static_cast<Eigen::Index>(j)) = env * pw;
    pw *= z;
  }
  return h;
}

std::map<std::string, double> NpTuning::as_diagnostics() const {
  std::map<std::string, double> m{
      {"tuning_tensor", tensor ? 1.0 : 0.0},
      {"tuning_y_mean", y_mean},
      {"tuning_y_sd", y_sd},
      {"tuning_h_instrument", h_instrument},
      {"tuning_h_conditioning", h_conditioning},
      {"tuning_eval_points",
       static_cast<double>(instrument_points.size() * std::max<std::size_t>(1, conditioning_points.size()))},
      {"tuning_feature_dim", static_cast<double>(feature_dim)},
  };
  if (tensor) {
    m["tuning_c_mean"] = c_mean;
    m["tuning_c_sd"] = c_sd;
  }
  if (whitened) {
    m["tuning_white_slope"] = white_slope;
    m["tuning_white_sd"] = white_sd;
  }
  for (std::size_t j = 0; j < h_final.size(); ++j)
    m["tuning_h_final_" + std::to_string(j)] = h_final[j];
  return m;
}

namespace {

bool shadow_assumption(AssumptionVariant v) {
  return v == AssumptionVariant::A2 || v == AssumptionVariant::A3;
}

double instrument_of(const NpTuning& tu, const Unit& u) {
  return tu.assumption == AssumptionVariant::A2 ? *u.t : *u.x[0];
}

std::vector<double> conditioning_of(const NpTuning& tu, const Unit& u) {
  if (tu.assumption == AssumptionVariant::A2) return u.x_values();
  return {*u.t};
}

double scalar_conditioning(const NpTuning& tu, const Unit& u) {
  return tu.assumption == AssumptionVariant::A2 ? *u.x[0] : *u.t;
}

std::vector<double> quantile_grid(std::vector<double> v, std::size_t q) {
  std::sort(v.begin(), v.end());
  std::vector<double> out;
  for (std::size_t k = 0; k < q; ++k)
    out.push_back(quantile_sorted(v, (static_cast<double>(k) + 0.5) / static_cast<double>(q)));
  return out;
}

double bandwidth(const std::vector<double>& v) {
  const double h = silverman_bandwidth(v);
  if (!(h > 0)) throw InsufficientDataError("continuous variable has no spread; bandwidth undefined");
  return h;
}

std::string cell_str(const std::vector<double>& c) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < c.size(); ++i) os << (i ? "," : "") << c[i];
  os << ")";
  return os.str();
}

}  // namespace

NpTuning tune_np(const Dataset& d, const MissingnessAssumption& a, const SieveConfig& cfg) {
  cfg.validate();
  a.validate(d.p());
  if (a.variant == AssumptionVariant::General)
    throw ConfigError("the general outcome-missingness mechanism is not identified");
  NpTuning tu;
  tu.assumption = a.variant;
  tu.binary_outcome = d.y_kind == VariableKind::Binary;
  if (!tu.binary_outcome && cfg.basis_kind == BasisKind::SaturatedBinary)
    throw ConfigError("saturated binary basis requires a binary outcome");

  const Dataset xt = subset_observed_xt(d);
  const Dataset cc = complete_cases(d);
  if (cc.n() < 5) throw InsufficientDataError("fewer than 5 complete cases");

  std::vector<double> cc_y, cc_t;
  for (const auto& u : cc.units) {
    cc_y.push_back(*u.y);
    cc_t.push_back(*u.t);
  }
  tu.h_final.push_back(d.t_kind == VariableKind::Continuous ? bandwidth(cc_t) : 0.0);
  for (std::size_t j = 0; j < d.p(); ++j) {
    std::vector<double> v;
    for (const auto& u : cc.units) v.push_back(*u.x[j]);
    tu.h_final.push_back(d.x_kinds[j] == VariableKind::Continuous ? bandwidth(v) : 0.0);
  }
  if (!tu.binary_outcome) {
    tu.y_mean = mean(cc_y);
    tu.y_sd = sample_sd(cc_y);
    if (!(tu.y_sd > 0)) throw InsufficientDataError("complete-case outcomes have no spread");
  }
  if (!shadow_assumption(a.variant)) return tu;

  bool cond_continuous = false;
  if (a.variant == AssumptionVariant::A2) {
    bool any_cont = false;
    for (auto k : d.x_kinds) any_cont = any_cont || k == VariableKind::Continuous;
    if (any_cont && d.p() != 1)
      throw ConfigError("nonparametric estimator with continuous covariates supports a single covariate");
    cond_continuous = any_cont;
    tu.instrument_discrete = d.t_kind == VariableKind::Binary;
  } else {
    if (d.p() != 1)
      throw ConfigError("nonparametric estimator under A3 requires a single identifying covariate");
    cond_continuous = d.t_kind == VariableKind::Continuous;
    tu.instrument_discrete = d.x_kinds[0] == VariableKind::Binary;
  }
  tu.tensor = cond_continuous;

  std::vector<double> z_all;
  for (const auto& u : xt.units) z_all.push_back(instrument_of(tu, u));
  if (tu.instrument_discrete) {
    tu.instrument_points = {0.0, 1.0};
  } else {
    tu.h_instrument = bandwidth(z_all);
    tu.instrument_points = quantile_grid(z_all, cfg.grid_points);
  }

  if (tu.tensor) {
    std::vector<double> c_all, c_cc;
    for (const auto& u : xt.units) c_all.push_back(scalar_conditioning(tu, u));
    for (const auto& u : cc.units) c_cc.push_back(scalar_conditioning(tu, u));
    tu.h_conditioning = bandwidth(c_all);
    tu.conditioning_points = quantile_grid(c_all, cfg.grid_points);
    tu.c_mean = mean(c_cc);
    tu.c_sd = sample_sd(c_cc);
    if (!(tu.c_sd > 0)) throw InsufficientDataError("conditioning variable has no spread");
    if (cfg.whiten && !tu.binary_outcome) {
      double sxy = 0, sxx = 0;
      for (std::size_t i = 0; i < c_cc.size(); ++i) {
        sxy += (c_cc[i] - tu.c_mean) * (cc_y[i] - tu.y_mean);
        sxx += (c_cc[i] - tu.c_mean) * (c_cc[i] - tu.c_mean);
      }
      tu.white_slope = sxy / sxx;
      std::vector<double> res;
      for (std::size_t i = 0; i < c_cc.size(); ++i)
        res.push_back(cc_y[i] - tu.y_mean - tu.white_slope * (c_cc[i] - tu.c_mean));
      tu.white_sd = sample_sd(res);
      tu.whitened = tu.white_sd > 0;
    }
  }
  const std::size_t J = tu.binary_outcome ? 2 : cfg.J;
  tu.feature_dim = J * (tu.tensor ? cfg.Jx : 1);
  return tu;
}

Eigen::VectorXd sieve_features(const NpTuning& tu, const SieveConfig& cfg, double c, double y) {
  Eigen::VectorXd h;
  if (tu.binary_outcome) {
    h.resize(2);
    h << (y == 0.0 ? 1.0 : 0.0), (y == 1.0 ? 1.0 : 0.0);
  } else if (tu.whitened) {
    h = hermite_envelope_basis((y - tu.y_mean - tu.white_slope * (c - tu.c_mean)) / tu.white_sd,
                               cfg.J, 0.0, 1.0);
  } else {
    h = hermite_envelope_basis(y, cfg.J, tu.y_mean, tu.y_sd);
  }
  if (!tu.tensor) return h;
  const Eigen::VectorXd g = hermite_envelope_basis(c, cfg.Jx, tu.c_mean, tu.c_sd);
  Eigen::VectorXd phi(g.size() * h.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) phi.segment(i * h.size(), h.size()) = g(i) * h;
  return phi;
}

FirstStage build_first_stage(const Dataset& d, const MissingnessAssumption& a,
                             const SieveConfig& cfg, const NpTuning& tu,
                             const std::vector<double>& cell) {
  if (!shadow_assumption(a.variant))
    throw ConfigError("first stage is only defined under A2 or A3");
  const std::size_t K = tu.feature_dim;

  // Per-unit columns: [instrument, conditioning, 1 - R, R phi].
  std::vector<double> zs, cs;
  std::vector<Eigen::VectorXd> vals;
  for (const auto& u : d.units) {
    if (!u.xt_observed()) continue;
    if (!tu.tensor && conditioning_of(tu, u) != cell) continue;
    const double c = tu.tensor ? scalar_conditioning(tu, u) : 0.0;
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(K) + 1);
    v(0) = u.ry ? 0.0 : 1.0;
    if (u.ry) v.tail(K) = sieve_features(tu, cfg, c, *u.y);
    zs.push_back(instrument_of(tu, u));
    cs.push_back(c);
    vals.push_back(std::move(v));
  }
  if (vals.empty())
    throw InsufficientDataError("no units with observed (X, T) in conditioning cell " + cell_str(cell));

  const Eigen::Index n = static_cast<Eigen::Index>(vals.size());
  Eigen::MatrixXd Z(n, tu.tensor ? 2 : 1), V(n, static_cast<Eigen::Index>(K) + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    Z(i, 0) = zs[static_cast<std::size_t>(i)];
    if (tu.tensor) Z(i, 1) = cs[static_cast<std::size_t>(i)];
    V.row(i) = vals[static_cast<std::size_t>(i)].transpose();
  }
  Eigen::VectorXd h(Z.cols());
  h(0) = tu.h_instrument;
  if (tu.tensor) h(1) = tu.h_conditioning;

  FirstStage fs;
  std::vector<Eigen::VectorXd> rows;
  const std::vector<double> cpts = tu.tensor ? tu.conditioning_points : std::vector<double>{0.0};
  for (double zp : tu.instrument_points) {
    for (double cp : cpts) {
      Eigen::VectorXd q(Z.cols());
      q(0) = zp;
      if (tu.tensor) q(1) = cp;
      const Eigen::VectorXd est = nadaraya_watson(Z, V, q, h);
      if (!std::isfinite(est(0))) {
        fs.warnings.push_back("instrument level " + std::to_string(zp) + " has no units in cell " +
                              cell_str(cell) + "; row omitted");
        continue;
      }
      rows.push_back(est);
      fs.eval_points.push_back(tu.tensor ? std::vector<double>{zp, cp} : std::vector<double>{zp});
    }
  }
  if (rows.empty()) throw InsufficientDataError("first stage has no evaluation rows");
  fs.M.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(K));
  fs.b.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    fs.b(static_cast<Eigen::Index>(r)) = rows[r](0);
    fs.M.row(static_cast<Eigen::Index>(r)) = rows[r].tail(K).transpose();
  }
  if (rows.size() < K)
    fs.warnings.push_back("first stage has " + std::to_string(rows.size()) + " rows for " +
                          std::to_string(K) + " unknowns; the solution relies on regularization");
  return fs;
}

RegularizedSolution solve_regularized(const Eigen::MatrixXd& M, const Eigen::VectorXd& b,
                                      const RegularizationConfig& reg) {
  const Eigen::Index K = M.cols();
  if (b.size() != M.rows()) throw ConfigError("first-stage row count does not match b");
  reg.validate(static_cast<std::size_t>(K));
  const Eigen::MatrixXd Lam =
      reg.lambda_matrix.size() ? reg.lambda_matrix : Eigen::MatrixXd::Identity(K, K);
  // Substitute gamma = L' beta (Lambda = L L'): the constraint becomes ||gamma||^2 <= B.
  const Eigen::LLT<Eigen::MatrixXd> llt(Lam);
  const Eigen::MatrixXd L = llt.matrixL();
  const Eigen::MatrixXd A = L.triangularView<Eigen::Lower>().solve(M.transpose()).transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd s = svd.singularValues();
  const Eigen::VectorXd c = svd.matrixU().transpose() * b;
  const double smax = s.size() ? s(0) : 0.0;
  const double tol = static_cast<double>(std::max(A.rows(), A.cols())) *
                     std::numeric_limits<double>::epsilon() * smax;

  RegularizedSolution out;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > tol) ++out.rank;

  auto coef = [&](double mu) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i)
      if (s(i) > tol) g(i) = s(i) * c(i) / (s(i) * s(i) + mu);
    return g;
  };

  const double B = reg.bound_B;
  Eigen::VectorXd g = coef(0.0);
  if (g.squaredNorm() > B) {
    out.constraint_active = true;
    double lo = 0.0, hi = std::max(smax * smax, 1.0);
    while (coef(hi).squaredNorm() > B) hi *= 2.0;
    bool done = false;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (coef(mid).squaredNorm() > B)
        lo = mid;
      else
        hi = mid;
      const double nh = coef(hi).squaredNorm();
      if (B - nh <= 1e-12 * B || hi - lo <= 1e-300) {
        done = true;
        break;
      }
    }
    if (!done) throw SolverError("regularized solve: multiplier bisection did not converge");
    out.mu = hi;
    g = coef(hi);
  }
  const Eigen::VectorXd gamma = svd.matrixV() * g;
  out.beta = L.transpose().triangularView<Eigen::Upper>().solve(gamma);
  out.residual = (b - M * out.beta).squaredNorm();
  return out;
}

RegularizedSolution solve_regularized(const FirstStage& fs, const RegularizationConfig& reg) {
  return solve_regularized(fs.M, fs.b, reg);
}

CorrectedWeights corrected_weights(const Dataset& d, const std::function<double(const Unit&)>& zeta,
                                   double pi_min) {
  if (!(pi_min > 0 && pi_min < 1)) throw ConfigError("pi_min must lie in (0,1)");
  CorrectedWeights out;
  const double hi = 1.0 / pi_min;
  std::size_t clamped = 0;
  for (const auto& u : d.units) {
    const double raw = 1.0 + zeta(u);
    const double w = std::clamp(raw, 1.0, hi);
    if (w != raw) ++clamped;
    out.weights.push_back(w);
  }
  if (!d.units.empty()) out.clamped_fraction = static_cast<double>(clamped) / static_cast<double>(d.n());
  return out;
}

double weighted_outcome_mean(const Dataset& cc, const std::vector<double>& w, const NpTuning& tu,
                             double t, const std::vector<double>& x) {
  const Eigen::Index n = static_cast<Eigen::Index>(cc.n());
  const Eigen::Index d = static_cast<Eigen::Index>(1 + x.size());
  if (static_cast<std::size_t>(d) != tu.h_final.size())
    throw ConfigError("query covariate vector has wrong dimension");
  Eigen::MatrixXd Z(n, d);
  Eigen::VectorXd y(n), wv(n), q(d), h(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& u = cc.units[static_cast<std::size_t>(i)];
    Z(i, 0) = *u.t;
    for (std::size_t j = 0; j < x.size(); ++j) Z(i, static_cast<Eigen::Index>(j) + 1) = *u.x[j];
    y(i) = *u.y;
    wv(i) = w[static_cast<std::size_t>(i)];
  }
  q(0) = t;
  for (std::size_t j = 0; j < x.size(); ++j) q(static_cast<Eigen::Index>(j) + 1) = x[j];
  for (Eigen::Index j = 0; j < d; ++j) h(j) = tu.h_final[static_cast<std::size_t>(j)];
  const LocalFit f = local_linear(Z, y, wv, q, h);
  if (!(f.kernel_mass > 0) || !std::isfinite(f.value)) {
    std::vector<double> cell{t};
    cell.insert(cell.end(), x.begin(), x.end());
    throw InsufficientDataError("no complete cases near (t, x) = " + cell_str(cell));
  }
  return f.value;
}

CateEstimate estimate_cate_np(const Dataset& d, const MissingnessAssumption& a,
                              const SieveConfig& sieve, const RegularizationConfig& reg,
                              const std::vector<double>& x, double t1, double t0,
                              const NpTuning* frozen, NpTuning* tuning_out) {
  if (x.size() != d.p()) throw ConfigError("query covariate vector has wrong dimension");
  const NpTuning tu = frozen ? *frozen : tune_np(d, a, sieve);
  if (tuning_out) *tuning_out = tu;
  CateEstimate est;
  est.t1 = t1;
  est.t0 = t0;
  est.x_query = x;
  est.estimator = "np-" + to_string(a.variant);
  est.diagnostics = tu.as_diagnostics();

  const Dataset cc = complete_cases(d);
  std::vector<double> w(cc.n(), 1.0);

  if (shadow_assumption(a.variant)) {
    std::vector<std::vector<double>> cells;
    if (tu.tensor)
      cells = {{}};
    else if (a.variant == AssumptionVariant::A2)
      cells = {x};
    else
      cells = {{t1}, {t0}};

    std::size_t touched = 0, clamped = 0;
    for (std::size_t ci = 0; ci < cells.size(); ++ci) {
      const auto& cell = cells[ci];
      const std::string prefix = cells.size() > 1 ? (ci == 0 ? "t1_" : "t0_") : "";
      const FirstStage fs = build_first_stage(d, a, sieve, tu, cell);
      const RegularizedSolution sol = solve_regularized(fs, reg);
      est.diagnostics[prefix + "residual"] = sol.residual;
      est.diagnostics[prefix + "rank"] = static_cast<double>(sol.rank);
      est.diagnostics[prefix + "rows"] = static_cast<double>(fs.M.rows());
      est.diagnostics[prefix + "constraint_active"] = sol.constraint_active ? 1.0 : 0.0;
      for (Eigen::Index k = 0; k < sol.beta.size(); ++k)
        est.diagnostics[prefix + "beta_" + std::to_string(k)] = sol.beta(k);
      for (const auto& wmsg : fs.warnings) est.notes.push_back(prefix + wmsg);

      const double hi = 1.0 / reg.pi_min;
      for (std::size_t i = 0; i < cc.n(); ++i) {
        const Unit& u = cc.units[i];
        if (!tu.tensor && conditioning_of(tu, u) != cell) continue;
        const double c = tu.tensor ? scalar_conditioning(tu, u) : 0.0;
        const double raw = 1.0 + sieve_features(tu, sieve, c, *u.y).dot(sol.beta);
        w[i] = std::clamp(raw, 1.0, hi);
        ++touched;
        if (w[i] != raw) ++clamped;
      }
    }
    est.diagnostics["clamp_fraction"] =
        touched ? static_cast<double>(clamped) / static_cast<double>(touched) : 0.0;
  }

  const double m1 = weighted_outcome_mean(cc, w, tu, t1, x);
  const double m0 = weighted_outcome_mean(cc, w, tu, t0, x);
  est.diagnostics["mu_t1"] = m1;
  est.diagnostics["mu_t0"] = m0;
  est.tau = m1 - m0;
  return est;
}

}  // namespace catemnar
