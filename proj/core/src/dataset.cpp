#include "spnc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "spnc/model_io.hpp"

namespace spnc {

namespace {

constexpr double kLogFloor = 1e-12;

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

std::string strip(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

Dataset load_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;

  Dataset data;
  if (!std::getline(in, line))
    throw ParseError(1, "empty input: missing CSV header");
  ++lineno;
  auto header = split_csv_line(line);
  if (header.empty()) throw ParseError(1, "empty CSV header");
  if (header.size() > PartialAssignment::kMaxVariables)
    throw ParseError(1, "more than 64 columns are not supported");
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string name = strip(header[i]);
    if (!is_valid_variable_name(name))
      throw ParseError(1, "invalid variable name '" + name + "' in column " +
                              std::to_string(i + 1));
    for (const auto& v : data.variables)
      if (v.name == name)
        throw ParseError(1, "duplicate variable name '" + name + "'");
    data.variables.push_back({static_cast<int>(i), name});
  }

  while (std::getline(in, line)) {
    ++lineno;
    if (strip(line).empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != data.variables.size())
      throw ParseError(lineno, "row has " + std::to_string(cells.size()) +
                                   " cells, expected " +
                                   std::to_string(data.variables.size()));
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const std::string cell = strip(cells[i]);
      if (cell == "1")
        bits |= std::uint64_t{1} << i;
      else if (cell != "0")
        throw ParseError(lineno, "non-binary token '" + cell + "' at column " +
                                     std::to_string(i + 1));
    }
    data.rows.push_back(bits);
  }
  return data;
}

Dataset load_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open data file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_csv(buf.str());
}

std::string to_csv(const Dataset& data) {
  std::ostringstream out;
  for (std::size_t i = 0; i < data.variables.size(); ++i) {
    if (i) out << ',';
    out << data.variables[i].name;
  }
  out << '\n';
  for (std::uint64_t bits : data.rows) {
    for (std::size_t i = 0; i < data.variables.size(); ++i) {
      if (i) out << ',';
      out << ((bits >> i) & 1);
    }
    out << '\n';
  }
  return out.str();
}

void save_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write data file '" + path + "'");
  out << to_csv(data);
}

Dataset align_dataset(const Dataset& data, const Circuit& circuit) {
  const std::size_t n = circuit.variables().size();
  if (data.variables.size() != n)
    throw std::invalid_argument("dataset has " + std::to_string(data.variables.size()) +
                                " variables, circuit has " + std::to_string(n));
  // column position of each circuit variable, by name
  std::vector<int> column(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const int col = [&] {
      for (const auto& v : data.variables)
        if (v.name == circuit.variables()[i].name) return v.index;
      return -1;
    }();
    if (col < 0)
      throw std::invalid_argument("dataset is missing variable '" +
                                  circuit.variables()[i].name + "'");
    column[i] = col;
  }

  Dataset out;
  out.variables = circuit.variables();
  out.rows.reserve(data.rows.size());
  bool identity = true;
  for (std::size_t i = 0; i < n; ++i) identity &= column[i] == static_cast<int>(i);
  if (identity) {
    out.rows = data.rows;
    return out;
  }
  for (std::uint64_t bits : data.rows) {
    std::uint64_t mapped = 0;
    for (std::size_t i = 0; i < n; ++i)
      if ((bits >> column[i]) & 1) mapped |= std::uint64_t{1} << i;
    out.rows.push_back(mapped);
  }
  return out;
}

std::vector<std::pair<std::uint64_t, std::size_t>> state_histogram(const Dataset& data) {
  std::map<std::uint64_t, std::size_t> counts;
  for (std::uint64_t bits : data.rows) ++counts[bits];
  return {counts.begin(), counts.end()};
}

double log_likelihood(const Circuit& circuit, const Dataset& data) {
  if (data.rows.empty()) throw std::invalid_argument("empty dataset");
  const Dataset aligned = align_dataset(data, circuit);
  const int n = circuit.num_variables();
  double total = 0.0;
  for (const auto& [state, count] : state_histogram(aligned)) {
    const double p = circuit.marginal(PartialAssignment::complete(state, n));
    total += static_cast<double>(count) * std::log(std::max(p, kLogFloor));
  }
  return total / static_cast<double>(data.rows.size());
}

}  // namespace spnc
