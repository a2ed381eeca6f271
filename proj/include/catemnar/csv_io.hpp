#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "catemnar/core.hpp"

namespace catemnar {

/// Declared column kinds for CSV ingestion; kinds are never inferred.
struct DatasetSchema {
  std::vector<VariableKind> x_kinds;
  VariableKind t_kind = VariableKind::Binary;
  VariableKind y_kind = VariableKind::Binary;
};

/// Header `x1..xp,t,y,rx1..rxp,rt,ry`; missing values are empty fields.
/// Rows with an empty or non-binary indicator are rejected (ConfigError),
/// as are rows violating the value/indicator contract.
Dataset read_csv(std::istream& in, const DatasetSchema& schema);
Dataset read_csv_file(const std::string& path, const DatasetSchema& schema);

void write_csv(std::ostream& out, const Dataset& d);
void write_csv_file(const std::string& path, const Dataset& d);

std::string csv_header(std::size_t p);

}  // namespace catemnar
