#pragma once

// Model-matrix terms over (X, T, Y) such as "intercept", "t", "x1", "t:x1",
// "y" or "d" (the positivity indicator 1{y > 0}). Covariate names are
// 1-based in text ("x1" is column 0).

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "catemnar/core.hpp"

namespace catemnar {

enum class FactorKind { T, X, Y, D };

struct Factor {
  FactorKind kind = FactorKind::T;
  std::size_t column = 0;  // X only
  bool operator==(const Factor&) const = default;
};

/// Product of factors; no factors is the intercept.
struct Term {
  std::vector<Factor> factors;
  bool operator==(const Term&) const = default;

  static Term parse(const std::string& text);
  std::string label() const;
  bool uses(FactorKind kind) const;
  bool uses_covariate(std::size_t column) const;
  double eval(const std::vector<double>& x, double t, double y) const;
};

struct Design {
  std::vector<Term> terms;

  static Design parse(const std::vector<std::string>& texts);
  std::size_t dim() const { return terms.size(); }
  std::vector<std::string> labels() const;
  bool uses(FactorKind kind) const;
  bool uses_covariate(std::size_t column) const;
  /// Largest referenced covariate column plus one.
  std::size_t covariates_needed() const;

  void eval(const std::vector<double>& x, double t, double y, double* out) const;
  Eigen::VectorXd row(const std::vector<double>& x, double t, double y) const;
};

/// intercept + t + x_j + t:x_j for every covariate column.
Design outcome_design_main_and_interactions(std::size_t p);

}  // namespace catemnar
