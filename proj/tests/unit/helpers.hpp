#pragma once

#include <optional>
#include <vector>

#include "catemnar/core.hpp"

namespace testutil {

using catemnar::Dataset;
using catemnar::Unit;
using catemnar::VariableKind;

// Unit with scalar x; a missing value is passed as std::nullopt.
inline Unit unit(std::optional<double> x, std::optional<double> t, std::optional<double> y) {
  Unit u;
  u.x = {x};
  u.rx = {static_cast<std::uint8_t>(x.has_value())};
  u.t = t;
  u.rt = t.has_value();
  u.y = y;
  u.ry = y.has_value();
  return u;
}

inline Dataset binary_dataset(std::vector<Unit> units) {
  Dataset d;
  d.x_kinds = {VariableKind::Binary};
  d.units = std::move(units);
  return d;
}

}  // namespace testutil
