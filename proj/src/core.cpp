#include "catemnar/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace catemnar {

std::string to_string(VariableKind kind) {
  return kind == VariableKind::Binary ? "binary" : "continuous";
}

VariableKind parse_variable_kind(const std::string& s) {
  if (s == "binary" || s == "Binary") return VariableKind::Binary;
  if (s == "continuous" || s == "Continuous") return VariableKind::Continuous;
  throw ConfigError("unknown variable kind '" + s + "'");
}

bool Unit::x_observed() const {
  return std::all_of(rx.begin(), rx.end(), [](std::uint8_t r) { return r == 1; });
}

std::vector<double> Unit::x_values() const {
  std::vector<double> out;
  out.reserve(x.size());
  for (const auto& v : x) out.push_back(v.value());
  return out;
}

Dataset Dataset::empty_like() const {
  Dataset out;
  out.x_kinds = x_kinds;
  out.t_kind = t_kind;
  out.y_kind = y_kind;
  return out;
}

namespace {

void check_value(std::vector<Violation>& out, std::size_t row, const std::string& name,
                 const std::optional<double>& value, std::uint8_t indicator,
                 VariableKind kind) {
  if (indicator > 1) {
    out.push_back({row, "indicator r" + name + " not in {0,1}"});
    return;
  }
  if (indicator == 1 && !value) {
    out.push_back({row, name + " missing but r" + name + "=1"});
    return;
  }
  if (indicator == 0 && value) {
    out.push_back({row, name + " present but r" + name + "=0"});
    return;
  }
  if (!value) return;
  if (!std::isfinite(*value)) {
    out.push_back({row, name + " not finite"});
  } else if (kind == VariableKind::Binary && *value != 0.0 && *value != 1.0) {
    std::ostringstream os;
    os << name << "=" << *value << " violates binary kind";
    out.push_back({row, os.str()});
  }
}

}  // namespace

std::vector<Violation> validate_dataset(const Dataset& d) {
  std::vector<Violation> out;
  const std::size_t p = d.p();
  for (std::size_t i = 0; i < d.units.size(); ++i) {
    const Unit& u = d.units[i];
    if (u.x.size() != p || u.rx.size() != p) {
      out.push_back({i, "x/rx dimension differs from declared covariate count"});
      continue;
    }
    for (std::size_t j = 0; j < p; ++j)
      check_value(out, i, "x" + std::to_string(j + 1), u.x[j], u.rx[j], d.x_kinds[j]);
    check_value(out, i, "t", u.t, u.rt, d.t_kind);
    check_value(out, i, "y", u.y, u.ry, d.y_kind);
  }
  return out;
}

Dataset subset_observed_xt(const Dataset& d) {
  Dataset out = d.empty_like();
  for (const auto& u : d.units)
    if (u.xt_observed()) out.units.push_back(u);
  return out;
}

Dataset complete_cases(const Dataset& d) {
  Dataset out = d.empty_like();
  for (const auto& u : d.units)
    if (u.complete()) out.units.push_back(u);
  return out;
}

std::string to_string(AssumptionVariant v) {
  switch (v) {
    case AssumptionVariant::MCAR: return "MCAR";
    case AssumptionVariant::MAR: return "MAR";
    case AssumptionVariant::A1: return "A1";
    case AssumptionVariant::A2: return "A2";
    case AssumptionVariant::A3: return "A3";
    case AssumptionVariant::General: return "General";
  }
  return "?";
}

AssumptionVariant parse_assumption(const std::string& s) {
  if (s == "MCAR") return AssumptionVariant::MCAR;
  if (s == "MAR") return AssumptionVariant::MAR;
  if (s == "A1" || s == "a1") return AssumptionVariant::A1;
  if (s == "A2" || s == "a2") return AssumptionVariant::A2;
  if (s == "A3" || s == "a3") return AssumptionVariant::A3;
  if (s == "General" || s == "general") return AssumptionVariant::General;
  throw ConfigError("unknown missingness assumption '" + s + "'");
}

void MissingnessAssumption::validate(std::size_t p) const {
  if (identifying_covariates.empty()) return;
  if (variant != AssumptionVariant::A3)
    throw ConfigError("identifying covariates are only meaningful under A3");
  for (std::size_t j : identifying_covariates)
    if (j >= p)
      throw ConfigError("identifying covariate index " + std::to_string(j) +
                        " out of range for " + std::to_string(p) + " covariates");
}

std::vector<std::size_t> MissingnessAssumption::id_columns(std::size_t p) const {
  if (!identifying_covariates.empty()) return identifying_covariates;
  std::vector<std::size_t> all(p);
  for (std::size_t j = 0; j < p; ++j) all[j] = j;
  return all;
}

std::vector<std::size_t> MissingnessAssumption::complement_columns(std::size_t p) const {
  const auto id = id_columns(p);
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < p; ++j)
    if (std::find(id.begin(), id.end(), j) == id.end()) out.push_back(j);
  return out;
}

bool CateEstimate::interval_excludes_tau() const {
  return interval && (tau < interval->lower || tau > interval->upper);
}

}  // namespace catemnar
