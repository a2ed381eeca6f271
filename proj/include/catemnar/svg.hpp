#pragma once

#include <string>
#include <vector>

namespace catemnar {

struct BoxStats {
  double q1 = 0, median = 0, q3 = 0;
  /// Most extreme data points within 1.5 IQR of the box.
  double whisker_lo = 0, whisker_hi = 0;
  std::vector<double> outliers;
  std::size_t n = 0;
};

/// Type-7 quartiles, 1.5 IQR whiskers. Throws ConfigError on empty input.
BoxStats box_stats(std::vector<double> values);

struct BoxGroup {
  std::string label;
  std::vector<double> values;
};

/// One box per group in input order; empty groups are skipped and listed in
/// a note under the plot. Output depends only on the input.
std::string render_boxplot(const std::vector<BoxGroup>& groups, const std::string& title,
                           const std::string& y_label);

struct LinePoint {
  double x = 0, y = 0;
  bool has_band = false;
  double lo = 0, hi = 0;
};

/// Polyline with an optional pointwise band and a vertical marker at x = marker_x.
std::string render_line_chart(const std::vector<LinePoint>& points, double marker_x,
                              const std::string& title, const std::string& x_label,
                              const std::string& y_label);

}  // namespace catemnar
