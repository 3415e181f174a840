#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spnc/assignment.hpp"
#include "spnc/circuit.hpp"

namespace spnc {

// Complete binary data: one bit per variable per row, variable i at bit i.
struct Dataset {
  std::vector<VariableId> variables;
  std::vector<std::uint64_t> rows;

  std::size_t size() const { return rows.size(); }
  PartialAssignment row(std::size_t i) const {
    return PartialAssignment::complete(rows.at(i), static_cast<int>(variables.size()));
  }
};

// CSV with a header of variable names and 0/1 cells. Rejects missing values,
// non-binary tokens and ragged rows; errors carry line and column numbers.
Dataset load_csv(const std::string& text);
Dataset load_csv_file(const std::string& path);
std::string to_csv(const Dataset& data);
void save_csv(const Dataset& data, const std::string& path);

// Copy of `data` with columns permuted to the circuit's variable order.
// The variable name sets must be equal.
Dataset align_dataset(const Dataset& data, const Circuit& circuit);

// Average log-likelihood (1/m) Σ log max(marginal(row), 1e-12). Accepts any
// column order; throws on an empty dataset or mismatched variable sets.
double log_likelihood(const Circuit& circuit, const Dataset& data);

// Per-state row counts, ascending by state bits. Complete binary rows make
// likelihood work proportional to distinct states rather than rows.
std::vector<std::pair<std::uint64_t, std::size_t>> state_histogram(const Dataset& data);

}  // namespace spnc
