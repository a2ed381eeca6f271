#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace catemnar {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Bad user input: malformed config, CSV or contradictory options.
class ConfigError : public Error {
public:
  using Error::Error;
};

class InsufficientDataError : public Error {
public:
  using Error::Error;
};

class RankDeficientError : public Error {
public:
  RankDeficientError(const std::string& what, std::size_t rank)
    : Error(what), rank_(rank) {}
  std::size_t rank() const { return rank_; }

private:
  std::size_t rank_;
};

class InfeasibleOddsError : public Error {
public:
  using Error::Error;
};

class SolverError : public Error {
public:
  using Error::Error;
};

class CalibrationError : public Error {
public:
  using Error::Error;
};

class EstimationError : public Error {
public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Data model
// ---------------------------------------------------------------------------

enum class VariableKind { Binary, Continuous };

std::string to_string(VariableKind kind);
VariableKind parse_variable_kind(const std::string& s);

/// One partially observed (X, T, Y) triple with its response indicators.
/// Values and indicators are stored separately so that ingestion errors
/// (value present with indicator 0) remain detectable by validate_dataset.
struct Unit {
  std::vector<std::optional<double>> x;
  std::optional<double> t;
  std::optional<double> y;
  std::vector<std::uint8_t> rx;
  std::uint8_t rt = 0;
  std::uint8_t ry = 0;

  bool x_observed() const;
  bool xt_observed() const { return x_observed() && rt == 1; }
  bool complete() const { return xt_observed() && ry == 1; }

  /// Observed covariate values; requires x_observed().
  std::vector<double> x_values() const;
};

struct Dataset {
  std::vector<Unit> units;
  std::vector<VariableKind> x_kinds;
  VariableKind t_kind = VariableKind::Binary;
  VariableKind y_kind = VariableKind::Binary;

  std::size_t n() const { return units.size(); }
  std::size_t p() const { return x_kinds.size(); }

  /// Same kinds, no units.
  Dataset empty_like() const;
};

struct Violation {
  std::size_t row;
  std::string rule;
};

std::vector<Violation> validate_dataset(const Dataset& d);

/// Units with every rx component and rt equal to 1, in original order.
Dataset subset_observed_xt(const Dataset& d);

/// Units with rx = rt = ry = 1, in original order.
Dataset complete_cases(const Dataset& d);

// ---------------------------------------------------------------------------
// Missingness taxonomy
// ---------------------------------------------------------------------------

enum class AssumptionVariant { MCAR, MAR, A1, A2, A3, General };

std::string to_string(AssumptionVariant v);
AssumptionVariant parse_assumption(const std::string& s);

struct MissingnessAssumption {
  AssumptionVariant variant = AssumptionVariant::A1;
  /// Columns of X forming X^id under A3. Several columns are allowed so that
  /// a categorical covariate coded as dummies can serve as one identifying
  /// component. Empty means "all of X" (the scalar-X case).
  std::vector<std::size_t> identifying_covariates;

  /// Throws ConfigError when the index set is invalid for a p-column X.
  void validate(std::size_t p) const;

  /// Resolved X^id columns (all columns when none were given).
  std::vector<std::size_t> id_columns(std::size_t p) const;
  /// Columns of X^c, the complement of id_columns.
  std::vector<std::size_t> complement_columns(std::size_t p) const;
};

// ---------------------------------------------------------------------------
// Estimates
// ---------------------------------------------------------------------------

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.95;
  /// More than 10% of bootstrap resamples failed.
  bool unreliable = false;
  std::size_t failed_resamples = 0;
  std::size_t resamples = 0;
};

struct CateEstimate {
  double tau = 0.0;
  double t1 = 1.0;
  double t0 = 0.0;
  std::vector<double> x_query;
  std::string estimator;
  std::optional<Interval> interval;
  bool null_identified = false;
  std::map<std::string, double> diagnostics;
  std::vector<std::string> notes;

  /// Percentile intervals need not contain tau; this only reports it.
  bool interval_excludes_tau() const;
};

}  // namespace catemnar
