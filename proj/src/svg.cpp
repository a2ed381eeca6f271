#include "catemnar/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "catemnar/core.hpp"
#include "catemnar/stats.hpp"

namespace catemnar {

BoxStats box_stats(std::vector<double> v) {
  if (v.empty()) throw ConfigError("box statistics need at least one value");
  std::sort(v.begin(), v.end());
  BoxStats b;
  b.n = v.size();
  b.q1 = quantile_sorted(v, 0.25);
  b.median = quantile_sorted(v, 0.5);
  b.q3 = quantile_sorted(v, 0.75);
  const double iqr = b.q3 - b.q1;
  const double lo = b.q1 - 1.5 * iqr, hi = b.q3 + 1.5 * iqr;
  b.whisker_lo = b.q1;
  b.whisker_hi = b.q3;
  bool first = true;
  for (double x : v) {
    if (x < lo || x > hi) {
      b.outliers.push_back(x);
      continue;
    }
    if (first) b.whisker_lo = x;
    first = false;
    b.whisker_hi = x;
  }
  b.whisker_lo = std::min(b.whisker_lo, b.q1);
  b.whisker_hi = std::max(b.whisker_hi, b.q3);
  return b;
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string esc(const std::string& s) {
  std::string o;
  for (char c : s) {
    switch (c) {
      case '&': o += "&amp;"; break;
      case '<': o += "&lt;"; break;
      case '>': o += "&gt;"; break;
      case '"': o += "&quot;"; break;
      default: o += c;
    }
  }
  return o;
}

struct Scale {
  double lo, hi, top, bottom;
  double operator()(double v) const { return bottom - (v - lo) / (hi - lo) * (bottom - top); }
};

Scale make_scale(double lo, double hi, double top, double bottom) {
  if (!(hi > lo)) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad, top, bottom};
}

void y_axis(std::ostringstream& os, const Scale& s, double left, double right, const std::string& label) {
  for (int k = 0; k <= 4; ++k) {
    const double v = s.lo + (s.hi - s.lo) * k / 4.0;
    const double y = s(v);
    os << "<line x1=\"" << num(left) << "\" y1=\"" << num(y) << "\" x2=\"" << num(right) << "\" y2=\""
       << num(y) << "\" stroke=\"#ddd\"/>\n";
    os << "<text x=\"" << num(left - 6) << "\" y=\"" << num(y + 4)
       << "\" font-size=\"11\" text-anchor=\"end\">" << num(v) << "</text>\n";
  }
  os << "<text x=\"16\" y=\"" << num((s.top + s.bottom) / 2) << "\" font-size=\"12\" transform=\"rotate(-90 16 "
     << num((s.top + s.bottom) / 2) << ")\" text-anchor=\"middle\">" << esc(label) << "</text>\n";
}

}  // namespace

std::string render_boxplot(const std::vector<BoxGroup>& groups, const std::string& title,
                           const std::string& y_label) {
  std::vector<std::pair<std::string, BoxStats>> boxes;
  std::vector<std::string> skipped;
  for (const auto& g : groups) {
    if (g.values.empty())
      skipped.push_back(g.label);
    else
      boxes.emplace_back(g.label, box_stats(g.values));
  }
  const double left = 70, slot = 48, top = 40, bottom = 340;
  const double width = left + slot * static_cast<double>(std::max<std::size_t>(boxes.size(), 1)) + 30;
  const double height = 460;
  double lo = 0, hi = 0;
  bool init = false;
  for (const auto& [l, b] : boxes) {
    double a = b.whisker_lo, c = b.whisker_hi;
    for (double o : b.outliers) {
      a = std::min(a, o);
      c = std::max(c, o);
    }
    lo = init ? std::min(lo, a) : a;
    hi = init ? std::max(hi, c) : c;
    init = true;
  }
  lo = std::min(lo, 0.0);
  hi = std::max(hi, 0.0);
  const Scale s = make_scale(lo, hi, top, bottom);

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\"" << num(height)
     << "\" font-family=\"sans-serif\">\n";
  os << "<text x=\"" << num(width / 2) << "\" y=\"22\" font-size=\"14\" text-anchor=\"middle\">" << esc(title)
     << "</text>\n";
  y_axis(os, s, left, width - 20, y_label);
  os << "<line x1=\"" << num(left) << "\" y1=\"" << num(s(0)) << "\" x2=\"" << num(width - 20) << "\" y2=\""
     << num(s(0)) << "\" stroke=\"#888\" stroke-dasharray=\"4 3\"/>\n";
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const auto& [label, b] = boxes[i];
    const double cx = left + slot * (static_cast<double>(i) + 0.5);
    const double hw = slot * 0.3;
    os << "<g>\n";
    os << "<line x1=\"" << num(cx) << "\" y1=\"" << num(s(b.whisker_lo)) << "\" x2=\"" << num(cx) << "\" y2=\""
       << num(s(b.q1)) << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << num(cx) << "\" y1=\"" << num(s(b.q3)) << "\" x2=\"" << num(cx) << "\" y2=\""
       << num(s(b.whisker_hi)) << "\" stroke=\"black\"/>\n";
    for (double w : {b.whisker_lo, b.whisker_hi})
      os << "<line x1=\"" << num(cx - hw / 2) << "\" y1=\"" << num(s(w)) << "\" x2=\"" << num(cx + hw / 2)
         << "\" y2=\"" << num(s(w)) << "\" stroke=\"black\"/>\n";
    os << "<rect x=\"" << num(cx - hw) << "\" y=\"" << num(s(b.q3)) << "\" width=\"" << num(2 * hw)
       << "\" height=\"" << num(s(b.q1) - s(b.q3)) << "\" fill=\"#9ecae1\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << num(cx - hw) << "\" y1=\"" << num(s(b.median)) << "\" x2=\"" << num(cx + hw)
       << "\" y2=\"" << num(s(b.median)) << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
    for (double o : b.outliers)
      os << "<circle cx=\"" << num(cx) << "\" cy=\"" << num(s(o)) << "\" r=\"2.5\" fill=\"none\" stroke=\"black\"/>\n";
    os << "<text x=\"" << num(cx) << "\" y=\"" << num(bottom + 12) << "\" font-size=\"10\" text-anchor=\"end\" transform=\"rotate(-60 "
       << num(cx) << " " << num(bottom + 12) << ")\">" << esc(label) << "</text>\n";
    os << "</g>\n";
  }
  if (!skipped.empty()) {
    std::string note = "no data: ";
    for (std::size_t i = 0; i < skipped.size(); ++i) note += (i ? ", " : "") + skipped[i];
    os << "<text x=\"" << num(left) << "\" y=\"" << num(height - 8) << "\" font-size=\"10\">" << esc(note)
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string render_line_chart(const std::vector<LinePoint>& points, double marker_x,
                              const std::string& title, const std::string& x_label,
                              const std::string& y_label) {
  const double left = 70, right = 560, top = 40, bottom = 320, width = 600, height = 370;
  double xlo = marker_x, xhi = marker_x, ylo = 0, yhi = 0;
  bool init = false;
  for (const auto& p : points) {
    xlo = std::min(xlo, p.x);
    xhi = std::max(xhi, p.x);
    const double a = p.has_band ? std::min(p.lo, p.y) : p.y;
    const double b = p.has_band ? std::max(p.hi, p.y) : p.y;
    ylo = init ? std::min(ylo, a) : a;
    yhi = init ? std::max(yhi, b) : b;
    init = true;
  }
  ylo = std::min(ylo, 0.0);
  yhi = std::max(yhi, 0.0);
  const Scale sy = make_scale(ylo, yhi, top, bottom);
  const double xspan = xhi > xlo ? xhi - xlo : 1.0;
  auto sx = [&](double v) { return left + (v - xlo) / xspan * (right - left); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\"" << num(height)
     << "\" font-family=\"sans-serif\">\n";
  os << "<text x=\"" << num(width / 2) << "\" y=\"22\" font-size=\"14\" text-anchor=\"middle\">" << esc(title)
     << "</text>\n";
  y_axis(os, sy, left, right, y_label);
  for (int k = 0; k <= 4; ++k) {
    const double v = xlo + xspan * k / 4.0;
    os << "<text x=\"" << num(sx(v)) << "\" y=\"" << num(bottom + 16) << "\" font-size=\"11\" text-anchor=\"middle\">"
       << num(v) << "</text>\n";
  }
  os << "<text x=\"" << num((left + right) / 2) << "\" y=\"" << num(bottom + 36)
     << "\" font-size=\"12\" text-anchor=\"middle\">" << esc(x_label) << "</text>\n";
  os << "<line x1=\"" << num(left) << "\" y1=\"" << num(sy(0)) << "\" x2=\"" << num(right) << "\" y2=\"" << num(sy(0))
     << "\" stroke=\"#888\" stroke-dasharray=\"4 3\"/>\n";
  os << "<line x1=\"" << num(sx(marker_x)) << "\" y1=\"" << num(top) << "\" x2=\"" << num(sx(marker_x)) << "\" y2=\""
     << num(bottom) << "\" stroke=\"#c33\" stroke-dasharray=\"2 2\"/>\n";
  std::string band_up, band_dn, line;
  for (const auto& p : points) {
    line += num(sx(p.x)) + "," + num(sy(p.y)) + " ";
    if (p.has_band) {
      band_up += num(sx(p.x)) + "," + num(sy(p.hi)) + " ";
      band_dn = num(sx(p.x)) + "," + num(sy(p.lo)) + " " + band_dn;
    }
  }
  if (!band_up.empty())
    os << "<polygon points=\"" << band_up << band_dn << "\" fill=\"#9ecae1\" fill-opacity=\"0.5\" stroke=\"none\"/>\n";
  os << "<polyline points=\"" << line << "\" fill=\"none\" stroke=\"#08519c\" stroke-width=\"2\"/>\n";
  for (const auto& p : points)
    os << "<circle cx=\"" << num(sx(p.x)) << "\" cy=\"" << num(sy(p.y)) << "\" r=\"2.5\" fill=\"#08519c\"/>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace catemnar
