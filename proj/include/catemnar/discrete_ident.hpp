#pragma once

// Exact identification machinery for discrete treatment, covariates and
// outcome. Observed conditionals form a J x K matrix Theta (rows: levels of
// the shadow/instrument variable, columns: outcome levels) and a vector b of
// outcome-missingness probabilities; the response odds zeta solve
// Theta zeta = b. Scalar-generic pieces work for double (empirical data) and
// for exact rationals (analytic round-trips and counterexamples).

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "catemnar/core.hpp"

namespace catemnar {

using Rational = boost::multiprecision::cpp_rational;

/// Row-major dense matrix for small exact or floating systems.
template <class S>
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<S> data;

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, S(0)) {}

  S& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  const S& operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

enum class InstrumentRole {
  /// Shadow variable T, conditioning on X (treatment-independent R^Y).
  Treatment,
  /// Shadow variable X^id, conditioning on (T, X^c) (covariate-independent R^Y).
  Covariate,
};

struct Conditioning {
  /// Query covariates. Under InstrumentRole::Covariate only the X^c entries
  /// are used for conditioning.
  std::vector<double> x;
  /// Treatment level; required under InstrumentRole::Covariate.
  std::optional<double> t;
  /// X^id columns under InstrumentRole::Covariate; empty means all of X.
  std::vector<std::size_t> id_columns;
};

template <class S>
struct ObservedConditionals {
  /// theta(j,k) = P(Y=y_k, R^Y=1 | level_j, conditioning, R^T=1, R^X=1).
  DenseMatrix<S> theta;
  /// b[j] = P(R^Y=0 | level_j, conditioning, R^T=1, R^X=1).
  std::vector<S> b;
  std::vector<std::vector<double>> instrument_levels;
  std::vector<double> outcome_levels;
  std::vector<std::size_t> row_counts;
  std::vector<std::string> warnings;
};

/// Entries in [0,1] and row sums of theta plus b at most 1 + eps.
bool check_observed_conditionals(const ObservedConditionals<double>& oc, double eps = 1e-9);

/// Empirical cell frequencies among units with R^X = R^T = 1. Outcome
/// levels are {0,1} for binary Y, else the distinct complete-case values.
/// Declared binary instrument levels absent in the conditioning cell are
/// omitted with a warning; fewer than two remaining levels is an
/// InsufficientDataError.
ObservedConditionals<double> estimate_observed_conditionals(const Dataset& d,
                                                            InstrumentRole role,
                                                            const Conditioning& cond);

struct RankCheck {
  bool complete = false;
  std::size_t rank = 0;
};

/// Numerical rank by singular values (sigma_i > tol * sigma_max counts);
/// complete iff rank equals the column count.
RankCheck completeness_rank_check(const DenseMatrix<double>& theta, double tol);
/// Exact rank by fraction-free elimination.
RankCheck completeness_rank_check(const DenseMatrix<Rational>& theta);

template <class S>
struct ResponseOdds {
  std::vector<S> zeta;
  /// pi_k = 1 / (1 + zeta_k).
  std::vector<S> pi;
};

struct SolveOptions {
  /// Components below -odds_tol are infeasible; [-odds_tol, 0) clamp to 0.
  double odds_tol = 1e-8;
  double rank_tol = 1e-10;
};

/// Least-squares solution of theta zeta = b. Throws RankDeficientError or
/// InfeasibleOddsError.
ResponseOdds<double> solve_response_odds(const ObservedConditionals<double>& oc,
                                         const SolveOptions& opts = {});
/// Exact solution via the normal equations; any negative odds are infeasible.
ResponseOdds<Rational> solve_response_odds(const ObservedConditionals<Rational>& oc);

template <class S>
struct OutcomeDistribution {
  /// probs(j,k) = P(Y = y_k | level_j, conditioning), rows sum to one.
  DenseMatrix<S> probs;
  /// Row sums before renormalization.
  std::vector<S> raw_row_sums;
  std::vector<std::string> diagnostics;
};

template <class S>
double to_double(const S& v) {
  return static_cast<double>(v);
}

/// probs(j,k) proportional to theta(j,k) (1 + zeta_k). Rows whose
/// pre-normalization sum deviates from one by more than 0.05 are noted.
template <class S>
OutcomeDistribution<S> identify_outcome_distribution(const ObservedConditionals<S>& oc,
                                                     const ResponseOdds<S>& odds) {
  OutcomeDistribution<S> out;
  const std::size_t J = oc.theta.rows, K = oc.theta.cols;
  out.probs = DenseMatrix<S>(J, K);
  out.raw_row_sums.assign(J, S(0));
  for (std::size_t j = 0; j < J; ++j) {
    S sum(0);
    for (std::size_t k = 0; k < K; ++k) {
      out.probs(j, k) = oc.theta(j, k) * (S(1) + odds.zeta[k]);
      sum += out.probs(j, k);
    }
    out.raw_row_sums[j] = sum;
    const double dev = to_double(sum) - 1.0;
    if (dev > 0.05 || dev < -0.05)
      out.diagnostics.push_back("row " + std::to_string(j) + " sums to " +
                                std::to_string(to_double(sum)) + " before renormalization");
    if (sum != S(0))
      for (std::size_t k = 0; k < K; ++k) out.probs(j, k) /= sum;
  }
  return out;
}

struct DiscreteIdentOptions {
  double odds_tol = 1e-8;
  /// Relative singular-value threshold for the completeness check on
  /// empirical data. Defaults to 1/sqrt(smallest conditioning-cell count),
  /// the order of sampling noise in Theta.
  std::optional<double> rank_tol;
  /// Level of the chi-square test of Y independent of T used to declare
  /// the null regime when the rank check fails.
  double null_test_level = 0.05;
};

/// tau(x) = sum_k y_k [P(y_k | t1, x) - P(y_k | t0, x)] under A2 (shadow T)
/// or A3 (shadow X^id); A1/MAR/MCAR reduce to complete-case conditionals.
CateEstimate cate_discrete(const Dataset& d, const MissingnessAssumption& assumption,
                           const std::vector<double>& x, double t1, double t0,
                           const DiscreteIdentOptions& opts = {});

}  // namespace catemnar
