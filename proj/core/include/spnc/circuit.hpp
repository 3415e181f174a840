#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "spnc/assignment.hpp"

namespace spnc {

enum class NodeKind { Sum, Product, Leaf };

using NodeId = std::uint32_t;

struct Node {
  NodeKind kind = NodeKind::Leaf;
  std::vector<NodeId> children;  // Sum / Product
  std::vector<double> weights;   // Sum, aligned with children
  int leaf_var = -1;             // Leaf
  bool leaf_positive = true;     // Leaf
};

struct Violation {
  NodeId node = 0;
  std::string property;  // "completeness", "decomposability", ...
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  std::string to_string() const;
};

struct ValueGrad {
  double value = 0.0;
  std::vector<double> gradient;  // one entry per sum edge, canonical order
};

// A sum-product network over binary variables. Nodes are appended with
// children already present, so node ids are a topological order; evaluation
// is a single left-to-right pass and differentiation a right-to-left pass.
//
// Structure is immutable once built; only the sum-edge weights may change.
// Concurrent read-only queries over a shared circuit are safe, weight
// updates need exclusive access.
class Circuit {
 public:
  Circuit() = default;
  explicit Circuit(std::vector<VariableId> variables);

  // Builders. Children must already exist; structural invariants beyond
  // referential integrity are reported by validate(), not enforced here.
  NodeId add_leaf(int var, bool positive);
  NodeId add_product(std::vector<NodeId> children);
  NodeId add_sum(std::vector<NodeId> children, std::vector<double> weights);
  void set_root(NodeId id);

  const std::vector<VariableId>& variables() const { return variables_; }
  int num_variables() const { return static_cast<int>(variables_.size()); }
  // Index of a variable name, -1 if unknown.
  int variable_index(const std::string& name) const;

  std::size_t node_count() const { return nodes_.size(); }
  const Node& node(NodeId id) const { return nodes_.at(id); }
  bool has_root() const { return has_root_; }
  NodeId root() const;
  std::uint64_t scope(NodeId id) const { return scopes_.at(id); }

  // Flat weight vector over all sum edges, ordered by ascending node id
  // then child position.
  std::size_t weight_count() const { return total_edges_; }
  std::vector<double> weights() const;
  void set_weights(std::span<const double> w);
  std::size_t edge_offset(NodeId sum_node) const { return edge_offsets_.at(sum_node); }

  ValidationReport validate() const;

  // Network polynomial at the indicator configuration induced by the
  // assignment; unmentioned variables have both indicators set to 1.
  double evaluate(const PartialAssignment& assignment) const;

  // Normalized queries: evaluate(query) / evaluate(∅).
  double marginal(const PartialAssignment& query) const;
  double conditional(const PartialAssignment& target,
                     const PartialAssignment& evidence) const;

  // dS(assignment)/dw per sum edge, by one forward and one backward pass.
  std::vector<double> gradient(const PartialAssignment& assignment) const;

  // marginal(query) together with its exact gradient w.r.t. the weights
  // (quotient rule over the query and ∅ evaluations).
  ValueGrad marginal_with_gradient(const PartialAssignment& query) const;

 private:
  void check_assignment(const PartialAssignment& a) const;
  void forward(const PartialAssignment& a, std::vector<double>& values) const;
  void backward(const std::vector<double>& values, std::vector<double>& grad) const;

  std::vector<VariableId> variables_;
  std::vector<Node> nodes_;
  std::vector<std::uint64_t> scopes_;       // cached at construction
  std::vector<std::size_t> edge_offsets_;   // per node, into the flat weight vector
  std::size_t total_edges_ = 0;
  NodeId root_ = 0;
  bool has_root_ = false;
};

// Canonical full-joint circuit: one root sum over all 2^n complete product
// terms, edge weight = table entry for that state (variable i is bit i).
// Limited to n <= 20.
Circuit full_joint_circuit(std::vector<VariableId> variables,
                           std::span<const double> table);

}  // namespace spnc
