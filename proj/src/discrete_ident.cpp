#include "catemnar/discrete_ident.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include <Eigen/Dense>

#include "catemnar/stats.hpp"

namespace catemnar {

namespace {

void require_binary(VariableKind k, const std::string& what) {
  if (k != VariableKind::Binary)
    throw ConfigError("discrete identification requires binary " + what);
}

std::string level_str(const std::vector<double>& v) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  os << ")";
  return os.str();
}

std::vector<std::vector<double>> binary_levels(std::size_t dims) {
  std::vector<std::vector<double>> out;
  for (std::size_t m = 0; m < (std::size_t{1} << dims); ++m) {
    std::vector<double> lv(dims);
    for (std::size_t k = 0; k < dims; ++k) lv[k] = static_cast<double>((m >> (dims - 1 - k)) & 1);
    out.push_back(lv);
  }
  return out;
}

}  // namespace

bool check_observed_conditionals(const ObservedConditionals<double>& oc, double eps) {
  for (std::size_t j = 0; j < oc.theta.rows; ++j) {
    double s = oc.b[j];
    if (oc.b[j] < -eps || oc.b[j] > 1 + eps) return false;
    for (std::size_t k = 0; k < oc.theta.cols; ++k) {
      const double v = oc.theta(j, k);
      if (v < -eps || v > 1 + eps) return false;
      s += v;
    }
    if (s > 1 + eps) return false;
  }
  return true;
}

ObservedConditionals<double> estimate_observed_conditionals(const Dataset& d,
                                                            InstrumentRole role,
                                                            const Conditioning& cond) {
  const std::size_t p = d.p();
  require_binary(d.y_kind, "outcome");
  if (cond.x.size() != p)
    throw ConfigError("conditioning covariate vector has wrong dimension");

  std::vector<std::size_t> id_cols, c_cols;
  if (role == InstrumentRole::Treatment) {
    require_binary(d.t_kind, "treatment");
    for (std::size_t j = 0; j < p; ++j) {
      require_binary(d.x_kinds[j], "covariates");
      c_cols.push_back(j);
    }
  } else {
    if (!cond.t) throw ConfigError("covariate-instrument conditioning requires a treatment level");
    MissingnessAssumption a{AssumptionVariant::A3, cond.id_columns};
    a.validate(p);
    id_cols = a.id_columns(p);
    c_cols = a.complement_columns(p);
    for (std::size_t j : id_cols) require_binary(d.x_kinds[j], "identifying covariates");
    for (std::size_t j : c_cols) require_binary(d.x_kinds[j], "covariates");
    require_binary(d.t_kind, "treatment");
  }

  // instrument level -> (count, missing count, outcome counts)
  struct Cell {
    std::size_t n = 0, n_missing = 0;
    std::map<double, std::size_t> outcome;
  };
  std::map<std::vector<double>, Cell> cells;
  std::set<double> outcome_set{0.0, 1.0};

  for (const auto& u : d.units) {
    if (!u.xt_observed()) continue;
    bool match = true;
    for (std::size_t j : c_cols) match = match && (*u.x[j] == cond.x[j]);
    if (role == InstrumentRole::Covariate) match = match && (*u.t == *cond.t);
    if (!match) continue;
    std::vector<double> level;
    if (role == InstrumentRole::Treatment) {
      level = {*u.t};
    } else {
      for (std::size_t j : id_cols) level.push_back(*u.x[j]);
    }
    Cell& c = cells[level];
    ++c.n;
    if (u.ry == 1)
      ++c.outcome[*u.y];
    else
      ++c.n_missing;
  }

  ObservedConditionals<double> oc;
  oc.outcome_levels.assign(outcome_set.begin(), outcome_set.end());
  const std::size_t dims = role == InstrumentRole::Treatment ? 1 : id_cols.size();
  for (const auto& lv : binary_levels(dims)) {
    auto it = cells.find(lv);
    if (it == cells.end() || it->second.n == 0) {
      oc.warnings.push_back("instrument level " + level_str(lv) +
                            " has no units in the conditioning cell; row omitted");
      continue;
    }
    oc.instrument_levels.push_back(lv);
  }
  if (oc.instrument_levels.size() < 2)
    throw InsufficientDataError("fewer than 2 instrument levels observed in the conditioning cell");

  const std::size_t J = oc.instrument_levels.size(), K = oc.outcome_levels.size();
  oc.theta = DenseMatrix<double>(J, K);
  oc.b.assign(J, 0.0);
  for (std::size_t j = 0; j < J; ++j) {
    const Cell& c = cells.at(oc.instrument_levels[j]);
    const double n = static_cast<double>(c.n);
    oc.row_counts.push_back(c.n);
    oc.b[j] = static_cast<double>(c.n_missing) / n;
    for (std::size_t k = 0; k < K; ++k) {
      auto it = c.outcome.find(oc.outcome_levels[k]);
      oc.theta(j, k) = it == c.outcome.end() ? 0.0 : static_cast<double>(it->second) / n;
    }
  }
  return oc;
}

RankCheck completeness_rank_check(const DenseMatrix<double>& theta, double tol) {
  Eigen::MatrixXd m(theta.rows, theta.cols);
  for (std::size_t i = 0; i < theta.rows; ++i)
    for (std::size_t j = 0; j < theta.cols; ++j) m(i, j) = theta(i, j);
  RankCheck out;
  if (m.size() == 0) return out;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() ? sv(0) : 0.0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (smax > 0 && sv(i) > tol * smax) ++out.rank;
  out.complete = out.rank == theta.cols;
  return out;
}

RankCheck completeness_rank_check(const DenseMatrix<Rational>& theta) {
  DenseMatrix<Rational> m = theta;
  std::size_t rank = 0;
  for (std::size_t c = 0; c < m.cols && rank < m.rows; ++c) {
    std::size_t piv = rank;
    while (piv < m.rows && m(piv, c) == 0) ++piv;
    if (piv == m.rows) continue;
    for (std::size_t k = 0; k < m.cols; ++k) std::swap(m(rank, k), m(piv, k));
    for (std::size_t r = rank + 1; r < m.rows; ++r) {
      if (m(r, c) == 0) continue;
      const Rational f = m(r, c) / m(rank, c);
      for (std::size_t k = c; k < m.cols; ++k) m(r, k) -= f * m(rank, k);
    }
    ++rank;
  }
  return {rank == theta.cols, rank};
}

ResponseOdds<double> solve_response_odds(const ObservedConditionals<double>& oc,
                                         const SolveOptions& opts) {
  const auto rc = completeness_rank_check(oc.theta, opts.rank_tol);
  if (!rc.complete)
    throw RankDeficientError("observed-conditional matrix is rank deficient (rank " +
                                 std::to_string(rc.rank) + " < " +
                                 std::to_string(oc.theta.cols) + ")",
                             rc.rank);
  const std::size_t J = oc.theta.rows, K = oc.theta.cols;
  Eigen::MatrixXd m(J, K);
  Eigen::VectorXd b(J);
  for (std::size_t j = 0; j < J; ++j) {
    b(j) = oc.b[j];
    for (std::size_t k = 0; k < K; ++k) m(j, k) = oc.theta(j, k);
  }
  const Eigen::VectorXd z = m.colPivHouseholderQr().solve(b);

  ResponseOdds<double> out;
  for (std::size_t k = 0; k < K; ++k) {
    double v = z(k);
    if (v < -opts.odds_tol) {
      std::ostringstream os;
      os << "response odds for outcome level " << oc.outcome_levels[k] << " are negative ("
         << v << "); the missingness assumption is incompatible with the data";
      throw InfeasibleOddsError(os.str());
    }
    if (v < 0) v = 0.0;
    out.zeta.push_back(v);
    out.pi.push_back(1.0 / (1.0 + v));
  }
  return out;
}

ResponseOdds<Rational> solve_response_odds(const ObservedConditionals<Rational>& oc) {
  const auto rc = completeness_rank_check(oc.theta);
  if (!rc.complete)
    throw RankDeficientError("observed-conditional matrix is rank deficient", rc.rank);
  const std::size_t J = oc.theta.rows, K = oc.theta.cols;
  // Normal equations [A^T A | A^T b], solved by Gauss-Jordan elimination.
  DenseMatrix<Rational> aug(K, K + 1);
  for (std::size_t r = 0; r < K; ++r) {
    for (std::size_t c = 0; c < K; ++c) {
      Rational s = 0;
      for (std::size_t j = 0; j < J; ++j) s += oc.theta(j, r) * oc.theta(j, c);
      aug(r, c) = s;
    }
    Rational s = 0;
    for (std::size_t j = 0; j < J; ++j) s += oc.theta(j, r) * oc.b[j];
    aug(r, K) = s;
  }
  for (std::size_t c = 0; c < K; ++c) {
    std::size_t piv = c;
    while (aug(piv, c) == 0) ++piv;  // full rank guarantees a pivot
    for (std::size_t k = 0; k <= K; ++k) std::swap(aug(c, k), aug(piv, k));
    const Rational d = aug(c, c);
    for (std::size_t k = c; k <= K; ++k) aug(c, k) /= d;
    for (std::size_t r = 0; r < K; ++r) {
      if (r == c || aug(r, c) == 0) continue;
      const Rational f = aug(r, c);
      for (std::size_t k = c; k <= K; ++k) aug(r, k) -= f * aug(c, k);
    }
  }
  ResponseOdds<Rational> out;
  for (std::size_t k = 0; k < K; ++k) {
    const Rational& z = aug(k, K);
    if (z < 0) throw InfeasibleOddsError("exact response odds are negative");
    out.zeta.push_back(z);
    out.pi.push_back(Rational(1) / (Rational(1) + z));
  }
  return out;
}

namespace {

std::size_t find_level(const ObservedConditionals<double>& oc, const std::vector<double>& lv) {
  for (std::size_t j = 0; j < oc.instrument_levels.size(); ++j)
    if (oc.instrument_levels[j] == lv) return j;
  throw InsufficientDataError("level " + level_str(lv) + " not observed in the conditioning cell");
}

double row_mean(const OutcomeDistribution<double>& dist, const std::vector<double>& levels,
                std::size_t row) {
  double m = 0.0;
  for (std::size_t k = 0; k < levels.size(); ++k) m += levels[k] * dist.probs(row, k);
  return m;
}

double rank_tol_for(const ObservedConditionals<double>& oc, const DiscreteIdentOptions& opts) {
  if (opts.rank_tol) return *opts.rank_tol;
  const auto nmin = *std::min_element(oc.row_counts.begin(), oc.row_counts.end());
  return 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(nmin, 1)));
}

/// Complete-case counts of Y by T within the conditioning cell at x.
double chi_square_y_t(const Dataset& d, const std::vector<double>& x) {
  std::map<double, std::vector<double>> rows;
  for (const auto& u : d.units) {
    if (!u.complete() || u.x_values() != x) continue;
    auto& r = rows[*u.t];
    r.resize(2, 0.0);
    r[*u.y == 1.0 ? 1 : 0] += 1.0;
  }
  std::vector<std::vector<double>> table;
  for (auto& [t, r] : rows) table.push_back(r);
  return chi_square_independence_pvalue(table);
}

void record(CateEstimate& est, const std::string& prefix, const ObservedConditionals<double>& oc,
            const ResponseOdds<double>& odds, const OutcomeDistribution<double>& dist) {
  for (std::size_t k = 0; k < odds.zeta.size(); ++k)
    est.diagnostics[prefix + "zeta_" + std::to_string(k)] = odds.zeta[k];
  for (const auto& w : oc.warnings) est.notes.push_back(prefix + w);
  for (const auto& w : dist.diagnostics) est.notes.push_back(prefix + w);
}

}  // namespace

CateEstimate cate_discrete(const Dataset& d, const MissingnessAssumption& assumption,
                           const std::vector<double>& x, double t1, double t0,
                           const DiscreteIdentOptions& opts) {
  assumption.validate(d.p());
  CateEstimate est;
  est.t1 = t1;
  est.t0 = t0;
  est.x_query = x;
  est.estimator = "discrete-" + to_string(assumption.variant);
  SolveOptions sopts;
  sopts.odds_tol = opts.odds_tol;

  switch (assumption.variant) {
    case AssumptionVariant::A2: {
      const auto oc = estimate_observed_conditionals(d, InstrumentRole::Treatment, {x, {}, {}});
      const double tol = rank_tol_for(oc, opts);
      const auto rc = completeness_rank_check(oc.theta, tol);
      est.diagnostics["rank"] = static_cast<double>(rc.rank);
      est.diagnostics["rank_tol"] = tol;
      if (!rc.complete) {
        const double pval = chi_square_y_t(d, x);
        est.diagnostics["null_test_pvalue"] = pval;
        if (pval >= opts.null_test_level) {
          est.tau = 0.0;
          est.null_identified = true;
          est.notes.push_back("completeness fails and Y shows no dependence on T at x; "
                              "null stratum effect identified");
          return est;
        }
        throw RankDeficientError("completeness fails at x but Y depends on T; CATE not identified",
                                 rc.rank);
      }
      const auto odds = solve_response_odds(oc, sopts);
      const auto dist = identify_outcome_distribution(oc, odds);
      record(est, "", oc, odds, dist);
      est.tau = row_mean(dist, oc.outcome_levels, find_level(oc, {t1})) -
                row_mean(dist, oc.outcome_levels, find_level(oc, {t0}));
      return est;
    }
    case AssumptionVariant::A3: {
      const auto id = assumption.id_columns(d.p());
      std::vector<double> id_level;
      for (std::size_t j : id) id_level.push_back(x.at(j));
      double means[2];
      const double ts[2] = {t1, t0};
      for (int s = 0; s < 2; ++s) {
        const auto oc = estimate_observed_conditionals(
            d, InstrumentRole::Covariate, {x, ts[s], assumption.identifying_covariates});
        const double tol = rank_tol_for(oc, opts);
        const auto rc = completeness_rank_check(oc.theta, tol);
        const std::string prefix = s == 0 ? "t1_" : "t0_";
        est.diagnostics[prefix + "rank"] = static_cast<double>(rc.rank);
        if (!rc.complete)
          throw RankDeficientError("completeness in X fails at t=" + std::to_string(ts[s]),
                                   rc.rank);
        const auto odds = solve_response_odds(oc, sopts);
        const auto dist = identify_outcome_distribution(oc, odds);
        record(est, prefix, oc, odds, dist);
        means[s] = row_mean(dist, oc.outcome_levels, find_level(oc, id_level));
      }
      est.tau = means[0] - means[1];
      return est;
    }
    default: {
      // Outcome missingness ignorable given (X, T): complete-case conditionals.
      require_binary(d.y_kind, "outcome");
      double sum[2] = {0, 0}, cnt[2] = {0, 0};
      for (const auto& u : d.units) {
        if (!u.complete() || u.x_values() != x) continue;
        for (int s = 0; s < 2; ++s)
          if (*u.t == (s == 0 ? t1 : t0)) {
            sum[s] += *u.y;
            cnt[s] += 1;
          }
      }
      if (cnt[0] == 0 || cnt[1] == 0)
        throw InsufficientDataError("no complete cases at a queried (t, x) cell");
      est.tau = sum[0] / cnt[0] - sum[1] / cnt[1];
      return est;
    }
  }
}

}  // namespace catemnar
