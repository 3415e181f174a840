#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "spnc/assignment.hpp"
#include "spnc/circuit.hpp"
#include "spnc/constraints.hpp"
#include "spnc/dataset.hpp"

namespace spnc {

// Exhaustive probability table over n <= 20 binary variables; entry index
// encodes the assignment with variable i at bit i. This is the brute-force
// ground truth everything else is checked against.
struct JointTable {
  std::vector<VariableId> variables;
  std::vector<double> probs;

  int n() const { return static_cast<int>(variables.size()); }
  std::size_t states() const { return probs.size(); }
  double sum() const;
  void normalize();  // throws when the total mass is zero
  bool is_normalized(double tol = 1e-9) const;
};

JointTable make_table(std::vector<VariableId> variables, std::vector<double> probs);

// Normalized table read off the circuit, one marginal query per state.
JointTable enumerate_joint(const Circuit& circuit);

double table_marginal(const JointTable& table, const PartialAssignment& query);
double table_conditional(const JointTable& table, const PartialAssignment& target,
                         const PartialAssignment& evidence);

// Truncated-factorization intervention: the table over the remaining
// variables after externally forcing `intervened` to `value`, dividing by
// Pr(A=value | pa). Remaining variables are reindexed densely, names kept.
JointTable table_do(const JointTable& table, int intervened, bool value,
                    std::span<const int> parents);

struct ConstraintCheck {
  bool satisfied = false;
  double max_violation = 0.0;
};

// Direct check of the constraint's defining probabilistic equalities on the
// table; contexts with zero probability are skipped as vacuous.
ConstraintCheck check_constraint(const JointTable& table, const Constraint& constraint,
                                 double tol);

// m i.i.d. rows by inverse CDF over the table entries; deterministic per
// (table, m, seed).
Dataset sample_dataset(const JointTable& table, std::size_t m, std::uint64_t seed);

Circuit full_joint_circuit(const JointTable& table);

}  // namespace spnc
