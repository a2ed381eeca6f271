#include "catemnar/design.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace catemnar {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

Factor parse_factor(const std::string& raw) {
  const std::string f = trim(raw);
  if (f == "t") return {FactorKind::T, 0};
  if (f == "y") return {FactorKind::Y, 0};
  if (f == "d") return {FactorKind::D, 0};
  if (f.size() > 1 && f[0] == 'x') {
    const std::string digits = f.substr(1);
    if (std::all_of(digits.begin(), digits.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
      const long idx = std::stol(digits);
      if (idx >= 1) return {FactorKind::X, static_cast<std::size_t>(idx - 1)};
    }
  }
  throw ConfigError("unknown model term factor '" + f + "'");
}

}  // namespace

Term Term::parse(const std::string& text) {
  const std::string s = trim(text);
  if (s == "1" || s == "intercept") return {};
  Term term;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ':')) term.factors.push_back(parse_factor(part));
  if (term.factors.empty()) throw ConfigError("empty model term");
  return term;
}

std::string Term::label() const {
  if (factors.empty()) return "intercept";
  std::string out;
  for (std::size_t i = 0; i < factors.size(); ++i) {
    if (i) out += ":";
    switch (factors[i].kind) {
      case FactorKind::T: out += "t"; break;
      case FactorKind::Y: out += "y"; break;
      case FactorKind::D: out += "d"; break;
      case FactorKind::X: out += "x" + std::to_string(factors[i].column + 1); break;
    }
  }
  return out;
}

bool Term::uses(FactorKind kind) const {
  return std::any_of(factors.begin(), factors.end(), [&](const Factor& f) { return f.kind == kind; });
}

bool Term::uses_covariate(std::size_t column) const {
  return std::any_of(factors.begin(), factors.end(), [&](const Factor& f) {
    return f.kind == FactorKind::X && f.column == column;
  });
}

double Term::eval(const std::vector<double>& x, double t, double y) const {
  double v = 1.0;
  for (const auto& f : factors) {
    switch (f.kind) {
      case FactorKind::T: v *= t; break;
      case FactorKind::Y: v *= y; break;
      case FactorKind::D: v *= (y > 0 ? 1.0 : 0.0); break;
      case FactorKind::X: v *= x[f.column]; break;
    }
  }
  return v;
}

Design Design::parse(const std::vector<std::string>& texts) {
  Design d;
  for (const auto& t : texts) {
    Term term = Term::parse(t);
    if (std::find(d.terms.begin(), d.terms.end(), term) != d.terms.end())
      throw ConfigError("duplicate model term '" + t + "'");
    d.terms.push_back(std::move(term));
  }
  if (d.terms.empty()) throw ConfigError("model design has no terms");
  return d;
}

std::vector<std::string> Design::labels() const {
  std::vector<std::string> out;
  for (const auto& t : terms) out.push_back(t.label());
  return out;
}

bool Design::uses(FactorKind kind) const {
  return std::any_of(terms.begin(), terms.end(), [&](const Term& t) { return t.uses(kind); });
}

bool Design::uses_covariate(std::size_t column) const {
  return std::any_of(terms.begin(), terms.end(), [&](const Term& t) { return t.uses_covariate(column); });
}

std::size_t Design::covariates_needed() const {
  std::size_t p = 0;
  for (const auto& t : terms)
    for (const auto& f : t.factors)
      if (f.kind == FactorKind::X) p = std::max(p, f.column + 1);
  return p;
}

void Design::eval(const std::vector<double>& x, double t, double y, double* out) const {
  for (std::size_t k = 0; k < terms.size(); ++k) out[k] = terms[k].eval(x, t, y);
}

Eigen::VectorXd Design::row(const std::vector<double>& x, double t, double y) const {
  Eigen::VectorXd r(static_cast<Eigen::Index>(dim()));
  eval(x, t, y, r.data());
  return r;
}

Design outcome_design_main_and_interactions(std::size_t p) {
  std::vector<std::string> terms = {"intercept", "t"};
  for (std::size_t j = 1; j <= p; ++j) terms.push_back("x" + std::to_string(j));
  for (std::size_t j = 1; j <= p; ++j) terms.push_back("t:x" + std::to_string(j));
  return Design::parse(terms);
}

}  // namespace catemnar
