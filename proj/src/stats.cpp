#include "catemnar/stats.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>

namespace catemnar {

double quantile_sorted(std::span<const double> sorted, double prob) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double quantile(std::vector<double> values, double prob) {
  std::sort(values.begin(), values.end());
  return quantile_sorted(values, prob);
}

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double a : v) ss += (a - m) * (a - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double silverman_bandwidth(std::span<const double> v) {
  if (v.size() < 2) return 1.0;
  std::vector<double> s(v.begin(), v.end());
  std::sort(s.begin(), s.end());
  const double sd = sample_sd(v);
  const double iqr = quantile_sorted(s, 0.75) - quantile_sorted(s, 0.25);
  double scale = iqr > 0 ? std::min(sd, iqr / 1.34) : sd;
  if (!(scale > 0)) scale = 1.0;
  return 0.9 * scale * std::pow(static_cast<double>(v.size()), -0.2);
}

double chi_square_independence_pvalue(const std::vector<std::vector<double>>& table) {
  std::vector<double> rows, cols;
  const std::size_t nc = table.empty() ? 0 : table.front().size();
  std::vector<double> col_tot(nc, 0.0);
  std::vector<double> row_tot;
  double total = 0.0;
  for (const auto& r : table) {
    const double s = std::accumulate(r.begin(), r.end(), 0.0);
    row_tot.push_back(s);
    for (std::size_t c = 0; c < nc; ++c) col_tot[c] += r[c];
    total += s;
  }
  std::size_t nr_eff = 0, nc_eff = 0;
  for (double s : row_tot) nr_eff += s > 0;
  for (double s : col_tot) nc_eff += s > 0;
  if (nr_eff < 2 || nc_eff < 2 || total <= 0) return 1.0;
  double stat = 0.0;
  for (std::size_t r = 0; r < table.size(); ++r) {
    if (row_tot[r] <= 0) continue;
    for (std::size_t c = 0; c < nc; ++c) {
      if (col_tot[c] <= 0) continue;
      const double e = row_tot[r] * col_tot[c] / total;
      stat += (table[r][c] - e) * (table[r][c] - e) / e;
    }
  }
  const double dof = static_cast<double>((nr_eff - 1) * (nc_eff - 1));
  boost::math::chi_squared dist(dof);
  return boost::math::cdf(boost::math::complement(dist, stat));
}

}  // namespace catemnar
