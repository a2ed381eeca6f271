#pragma once

// Exact-rational verification of the two non-identifiability constructions:
// two parameterizations that share an observed-data law but disagree on the
// ATE (covariate/treatment missingness) or on the CATE (outcome missingness
// depending on X, T and Y jointly).

#include <string>
#include <vector>

#include "catemnar/discrete_ident.hpp"

namespace catemnar {

struct CheckRow {
  std::string name;
  Rational expected;
  Rational actual;
  bool pass() const { return expected == actual; }
};

struct CounterexampleReport {
  std::string title;
  std::vector<CheckRow> rows;
  bool passed() const;
  /// Fixed-width pass/fail table, one line per check.
  std::string table() const;
};

/// Models A and B reproduce the ten observed cells; shared theta; ATE_A = 3/10,
/// ATE_B = 0.
CounterexampleReport verify_counterexample_1();

/// Models A and B reproduce the twelve observed cells; CATEs (2/5, 3/10)
/// versus (1/5, 1/10).
CounterexampleReport verify_counterexample_2();

}  // namespace catemnar
