#include "catemnar/csv_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace catemnar {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::optional<double> parse_value(const std::string& field, std::size_t line_no,
                                  const std::string& column) {
  const std::string s = trim(field);
  if (s.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("line " + std::to_string(line_no) + ": column " + column +
                      " has non-numeric value '" + s + "'");
  }
}

std::uint8_t parse_indicator(const std::string& field, std::size_t line_no,
                             const std::string& column) {
  const std::string s = trim(field);
  if (s == "1") return 1;
  if (s == "0") return 0;
  if (s.empty())
    throw ConfigError("line " + std::to_string(line_no) + ": indicator " + column +
                      " is missing");
  throw ConfigError("line " + std::to_string(line_no) + ": indicator " + column +
                    " must be 0 or 1, got '" + s + "'");
}

void put_value(std::ostream& out, const std::optional<double>& v) {
  if (!v) return;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", *v);
  out << buf;
}

}  // namespace

std::string csv_header(std::size_t p) {
  std::ostringstream os;
  for (std::size_t j = 0; j < p; ++j) os << "x" << j + 1 << ",";
  os << "t,y,";
  for (std::size_t j = 0; j < p; ++j) os << "rx" << j + 1 << ",";
  os << "rt,ry";
  return os.str();
}

Dataset read_csv(std::istream& in, const DatasetSchema& schema) {
  const std::size_t p = schema.x_kinds.size();
  Dataset d;
  d.x_kinds = schema.x_kinds;
  d.t_kind = schema.t_kind;
  d.y_kind = schema.y_kind;

  std::string line;
  if (!std::getline(in, line)) throw ConfigError("CSV is empty; header row is mandatory");
  auto header = split_fields(line);
  for (auto& h : header) h = trim(h);
  const auto expected = split_fields(csv_header(p));
  if (header != expected)
    throw ConfigError("CSV header mismatch: expected '" + csv_header(p) + "'");

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != expected.size())
      throw ConfigError("line " + std::to_string(line_no) + ": expected " +
                        std::to_string(expected.size()) + " fields, got " +
                        std::to_string(f.size()));
    Unit u;
    u.x.resize(p);
    u.rx.resize(p);
    for (std::size_t j = 0; j < p; ++j) {
      u.x[j] = parse_value(f[j], line_no, expected[j]);
      u.rx[j] = parse_indicator(f[p + 2 + j], line_no, expected[p + 2 + j]);
    }
    u.t = parse_value(f[p], line_no, "t");
    u.y = parse_value(f[p + 1], line_no, "y");
    u.rt = parse_indicator(f[2 * p + 2], line_no, "rt");
    u.ry = parse_indicator(f[2 * p + 3], line_no, "ry");
    d.units.push_back(std::move(u));
  }

  const auto violations = validate_dataset(d);
  if (!violations.empty()) {
    // data rows start at CSV line 2
    throw ConfigError("line " + std::to_string(violations.front().row + 2) + ": " +
                      violations.front().rule + " (" + std::to_string(violations.size()) +
                      " violation(s) total)");
  }
  return d;
}

Dataset read_csv_file(const std::string& path, const DatasetSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  return read_csv(in, schema);
}

void write_csv(std::ostream& out, const Dataset& d) {
  out << csv_header(d.p()) << "\n";
  for (const auto& u : d.units) {
    for (const auto& v : u.x) {
      put_value(out, v);
      out << ",";
    }
    put_value(out, u.t);
    out << ",";
    put_value(out, u.y);
    out << ",";
    for (auto r : u.rx) out << int(r) << ",";
    out << int(u.rt) << "," << int(u.ry) << "\n";
  }
}

void write_csv_file(const std::string& path, const Dataset& d) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  write_csv(out, d);
}

}  // namespace catemnar
