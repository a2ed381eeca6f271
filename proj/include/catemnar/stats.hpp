#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace catemnar {

inline double expit(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

/// log(1 + exp(z)) without overflow.
inline double log1pexp(double z) {
  return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

/// log(expit(z)).
inline double log_expit(double z) { return -log1pexp(-z); }

/// Sample quantile with linear interpolation between order statistics
/// (Hyndman-Fan type 7, the R default). `sorted` must be ascending.
double quantile_sorted(std::span<const double> sorted, double prob);
double quantile(std::vector<double> values, double prob);

double mean(std::span<const double> v);
/// Sample standard deviation (n - 1 denominator).
double sample_sd(std::span<const double> v);

/// Silverman's rule-of-thumb bandwidth 0.9 min(sd, IQR/1.34) n^(-1/5).
/// Falls back to sd when the IQR is zero.
double silverman_bandwidth(std::span<const double> v);

/// Upper-tail p-value of Pearson's chi-square test of independence on an
/// r x c contingency table (rows/cols with zero margins are dropped).
double chi_square_independence_pvalue(const std::vector<std::vector<double>>& table);

}  // namespace catemnar
