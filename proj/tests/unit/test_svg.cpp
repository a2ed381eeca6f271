#include "doctest.h"

#include "catemnar/core.hpp"
#include "catemnar/svg.hpp"

using namespace catemnar;

TEST_CASE("box statistics for {1,2,3,4,100}") {
  const auto b = box_stats({4, 100, 1, 3, 2});
  CHECK(b.median == 3.0);
  CHECK(b.q1 == 2.0);
  CHECK(b.q3 == 4.0);
  CHECK(b.whisker_lo == 1.0);
  CHECK(b.whisker_hi == 4.0);
  REQUIRE(b.outliers.size() == 1);
  CHECK(b.outliers[0] == 100.0);
  CHECK(b.n == 5);
}

TEST_CASE("single value gives a degenerate box") {
  const auto b = box_stats({2.5});
  CHECK(b.q1 == 2.5);
  CHECK(b.q3 == 2.5);
  CHECK(b.whisker_lo == 2.5);
  CHECK(b.whisker_hi == 2.5);
  CHECK(b.outliers.empty());
  CHECK_THROWS_AS(box_stats({}), ConfigError);
}

TEST_CASE("boxplot rendering is deterministic and notes empty groups") {
  const std::vector<BoxGroup> groups = {{"a/cca", {1, 2, 3, 4, 100}}, {"a/np", {}}, {"b/para", {-1, 0, 1}}};
  const auto s1 = render_boxplot(groups, "t", "percent bias");
  const auto s2 = render_boxplot(groups, "t", "percent bias");
  CHECK(s1 == s2);
  CHECK(s1.rfind("<svg", 0) == 0);
  CHECK(s1.find("</svg>") != std::string::npos);
  CHECK(s1.find("a/np") != std::string::npos);
  CHECK(s1.find("<circle") != std::string::npos);
}

TEST_CASE("line chart escapes text and draws a band") {
  std::vector<LinePoint> pts = {{-1, 0.5, true, 0.2, 0.8}, {0, 0.4, true, 0.1, 0.7}, {1, 0.3, true, 0.0, 0.6}};
  const auto s = render_line_chart(pts, 0.0, "a < b & c", "delta", "tau");
  CHECK(s.find("a &lt; b &amp; c") != std::string::npos);
  CHECK(s.find("<polyline") != std::string::npos);
  CHECK(s.find("<polygon") != std::string::npos);
}
