#include "spnc/circuit.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>
#include <stdexcept>

namespace spnc {

bool is_valid_variable_name(const std::string& name) {
  if (name.empty()) return false;
  if (!std::isalpha(static_cast<unsigned char>(name[0])) && name[0] != '_')
    return false;
  for (char c : name)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
  return true;
}

std::string ValidationReport::to_string() const {
  if (violations.empty()) return "valid\n";
  std::ostringstream out;
  for (const auto& v : violations)
    out << "node " << v.node << ": " << v.property << " (" << v.detail << ")\n";
  return out.str();
}

Circuit::Circuit(std::vector<VariableId> variables) : variables_(std::move(variables)) {
  if (variables_.size() > PartialAssignment::kMaxVariables)
    throw std::invalid_argument("at most 64 variables are supported");
  for (std::size_t i = 0; i < variables_.size(); ++i) {
    if (variables_[i].index != static_cast<int>(i))
      throw std::invalid_argument("variable indices must be dense 0..n-1");
    if (!is_valid_variable_name(variables_[i].name))
      throw std::invalid_argument("invalid variable name '" + variables_[i].name + "'");
    for (std::size_t j = 0; j < i; ++j)
      if (variables_[j].name == variables_[i].name)
        throw std::invalid_argument("duplicate variable name '" + variables_[i].name + "'");
  }
}

int Circuit::variable_index(const std::string& name) const {
  for (const auto& v : variables_)
    if (v.name == name) return v.index;
  return -1;
}

NodeId Circuit::add_leaf(int var, bool positive) {
  if (var < 0 || var >= num_variables())
    throw std::invalid_argument("leaf variable index " + std::to_string(var) +
                                " out of range");
  Node n;
  n.kind = NodeKind::Leaf;
  n.leaf_var = var;
  n.leaf_positive = positive;
  nodes_.push_back(std::move(n));
  scopes_.push_back(std::uint64_t{1} << var);
  edge_offsets_.push_back(total_edges_);
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Circuit::add_product(std::vector<NodeId> children) {
  std::uint64_t scope = 0;
  for (NodeId c : children) {
    if (c >= nodes_.size())
      throw std::invalid_argument("product child " + std::to_string(c) + " does not exist");
    scope |= scopes_[c];
  }
  Node n;
  n.kind = NodeKind::Product;
  n.children = std::move(children);
  nodes_.push_back(std::move(n));
  scopes_.push_back(scope);
  edge_offsets_.push_back(total_edges_);
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Circuit::add_sum(std::vector<NodeId> children, std::vector<double> weights) {
  if (children.size() != weights.size())
    throw std::invalid_argument("sum node weight count does not match child count");
  std::uint64_t scope = 0;
  for (NodeId c : children) {
    if (c >= nodes_.size())
      throw std::invalid_argument("sum child " + std::to_string(c) + " does not exist");
    scope |= scopes_[c];
  }
  Node n;
  n.kind = NodeKind::Sum;
  n.children = std::move(children);
  n.weights = std::move(weights);
  const std::size_t edges = n.children.size();
  nodes_.push_back(std::move(n));
  scopes_.push_back(scope);
  edge_offsets_.push_back(total_edges_);
  total_edges_ += edges;
  return static_cast<NodeId>(nodes_.size() - 1);
}

void Circuit::set_root(NodeId id) {
  if (id >= nodes_.size())
    throw std::invalid_argument("root node " + std::to_string(id) + " does not exist");
  root_ = id;
  has_root_ = true;
}

NodeId Circuit::root() const {
  if (!has_root_) throw std::logic_error("circuit has no root");
  return root_;
}

std::vector<double> Circuit::weights() const {
  std::vector<double> out(total_edges_);
  for (const auto& n : nodes_) {
    if (n.kind != NodeKind::Sum) continue;
    const std::size_t off = edge_offsets_[&n - nodes_.data()];
    std::copy(n.weights.begin(), n.weights.end(), out.begin() + off);
  }
  return out;
}

void Circuit::set_weights(std::span<const double> w) {
  if (w.size() != total_edges_)
    throw std::invalid_argument("weight vector has size " + std::to_string(w.size()) +
                                ", circuit has " + std::to_string(total_edges_) +
                                " sum edges");
  for (auto& n : nodes_) {
    if (n.kind != NodeKind::Sum) continue;
    const std::size_t off = edge_offsets_[&n - nodes_.data()];
    std::copy(w.begin() + off, w.begin() + off + n.children.size(), n.weights.begin());
  }
}

ValidationReport Circuit::validate() const {
  ValidationReport report;
  auto flag = [&](NodeId id, const char* property, std::string detail) {
    report.violations.push_back({id, property, std::move(detail)});
  };

  if (!has_root_) {
    report.violations.push_back({0, "root", "no root declared"});
    return report;
  }

  // Reachability. Acyclicity holds by construction: children precede
  // parents in id order.
  std::vector<char> reachable(nodes_.size(), 0);
  reachable[root_] = 1;
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    if (!reachable[i]) continue;
    for (NodeId c : nodes_[i].children) reachable[c] = 1;
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (!reachable[i])
      flag(static_cast<NodeId>(i), "reachability", "node not reachable from root");

  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    const NodeId id = static_cast<NodeId>(i);
    switch (n.kind) {
      case NodeKind::Leaf:
        if (n.leaf_var < 0 || n.leaf_var >= num_variables())
          flag(id, "leaf", "leaf variable out of range");
        break;
      case NodeKind::Sum: {
        if (n.children.empty())
          flag(id, "arity", "sum node has no children");
        if (n.weights.size() != n.children.size())
          flag(id, "weights", "weight count does not match child count");
        for (std::size_t j = 0; j < n.weights.size(); ++j)
          if (!(n.weights[j] >= 0.0))
            flag(id, "weight-nonnegativity",
                 "weight " + std::to_string(j) + " is " + std::to_string(n.weights[j]));
        // completeness: all children share one scope
        for (std::size_t j = 1; j < n.children.size(); ++j)
          if (scopes_[n.children[j]] != scopes_[n.children[0]]) {
            flag(id, "completeness", "children have differing scopes");
            break;
          }
        break;
      }
      case NodeKind::Product: {
        if (n.children.size() < 2)
          flag(id, "arity", "product node has fewer than 2 children");
        std::uint64_t seen = 0;
        for (NodeId c : n.children) {
          if (seen & scopes_[c]) {
            flag(id, "decomposability", "children have overlapping scopes");
            break;
          }
          seen |= scopes_[c];
        }
        break;
      }
    }
  }
  return report;
}

void Circuit::check_assignment(const PartialAssignment& a) const {
  if (a.max_index() >= num_variables()) {
    const int bad = a.max_index();
    throw std::invalid_argument("assignment references unknown variable index " +
                                std::to_string(bad) + " (circuit has " +
                                std::to_string(num_variables()) + " variables)");
  }
}

void Circuit::forward(const PartialAssignment& a, std::vector<double>& values) const {
  values.resize(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    switch (n.kind) {
      case NodeKind::Leaf: {
        if (!a.contains(n.leaf_var)) {
          values[i] = 1.0;  // marginalized: both indicators active
        } else {
          const bool v = a.value(n.leaf_var);
          values[i] = (v == n.leaf_positive) ? 1.0 : 0.0;
        }
        break;
      }
      case NodeKind::Product: {
        double p = 1.0;
        for (NodeId c : n.children) p *= values[c];
        values[i] = p;
        break;
      }
      case NodeKind::Sum: {
        double s = 0.0;
        for (std::size_t j = 0; j < n.children.size(); ++j)
          s += n.weights[j] * values[n.children[j]];
        values[i] = s;
        break;
      }
    }
  }
}

double Circuit::evaluate(const PartialAssignment& assignment) const {
  check_assignment(assignment);
  const NodeId r = root();
  std::vector<double> values;
  forward(assignment, values);
  return values[r];
}

double Circuit::marginal(const PartialAssignment& query) const {
  const double z = evaluate(PartialAssignment{});
  if (z == 0.0)
    throw std::runtime_error("degenerate circuit: evaluate(empty) is zero");
  return evaluate(query) / z;
}

double Circuit::conditional(const PartialAssignment& target,
                            const PartialAssignment& evidence) const {
  if (!target.disjoint_with(evidence))
    throw std::invalid_argument("conditional: target and evidence overlap");
  const double pe = marginal(evidence);
  if (pe == 0.0)
    throw std::runtime_error("conditional: evidence has probability zero");
  return marginal(target.union_with(evidence)) / pe;
}

void Circuit::backward(const std::vector<double>& values, std::vector<double>& grad) const {
  grad.assign(total_edges_, 0.0);
  std::vector<double> adjoint(nodes_.size(), 0.0);
  adjoint[root_] = 1.0;
  std::vector<double> partials;  // prefix/suffix scratch for product nodes
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    const double a = adjoint[i];
    if (a == 0.0) continue;
    const Node& n = nodes_[i];
    if (n.kind == NodeKind::Sum) {
      const std::size_t off = edge_offsets_[i];
      for (std::size_t j = 0; j < n.children.size(); ++j) {
        grad[off + j] += a * values[n.children[j]];
        adjoint[n.children[j]] += a * n.weights[j];
      }
    } else if (n.kind == NodeKind::Product) {
      const std::size_t k = n.children.size();
      partials.assign(k + 1, 1.0);
      for (std::size_t j = k; j-- > 0;)
        partials[j] = partials[j + 1] * values[n.children[j]];  // suffix products
      double prefix = 1.0;
      for (std::size_t j = 0; j < k; ++j) {
        adjoint[n.children[j]] += a * prefix * partials[j + 1];
        prefix *= values[n.children[j]];
      }
    }
  }
}

std::vector<double> Circuit::gradient(const PartialAssignment& assignment) const {
  check_assignment(assignment);
  (void)root();
  std::vector<double> values;
  forward(assignment, values);
  std::vector<double> grad;
  backward(values, grad);
  return grad;
}

ValueGrad Circuit::marginal_with_gradient(const PartialAssignment& query) const {
  const double z = evaluate(PartialAssignment{});
  if (z == 0.0)
    throw std::runtime_error("degenerate circuit: evaluate(empty) is zero");
  const std::vector<double> gz = gradient(PartialAssignment{});
  const double vq = evaluate(query);
  std::vector<double> gq = gradient(query);

  ValueGrad out;
  out.value = vq / z;
  out.gradient.resize(total_edges_);
  for (std::size_t i = 0; i < total_edges_; ++i)
    out.gradient[i] = (gq[i] * z - vq * gz[i]) / (z * z);
  return out;
}

Circuit full_joint_circuit(std::vector<VariableId> variables,
                           std::span<const double> table) {
  const std::size_t n = variables.size();
  if (n > 20)
    throw std::invalid_argument("full-joint circuit limited to 20 variables, got " +
                                std::to_string(n));
  const std::size_t states = std::size_t{1} << n;
  if (table.size() != states)
    throw std::invalid_argument("table size " + std::to_string(table.size()) +
                                " does not match 2^" + std::to_string(n));
  for (double t : table)
    if (!(t >= 0.0))
      throw std::invalid_argument("table entries must be non-negative");

  if (n == 0) throw std::invalid_argument("full-joint circuit needs at least one variable");

  Circuit c(std::move(variables));
  // Leaves var-major: 2i is the positive indicator of variable i, 2i+1 the
  // negative one.
  for (std::size_t i = 0; i < n; ++i) {
    c.add_leaf(static_cast<int>(i), true);
    c.add_leaf(static_cast<int>(i), false);
  }
  std::vector<NodeId> terms(states);
  std::vector<NodeId> kids(n);
  for (std::size_t s = 0; s < states; ++s) {
    for (std::size_t i = 0; i < n; ++i)
      kids[i] = static_cast<NodeId>(2 * i + (((s >> i) & 1) ? 0 : 1));
    // A complete product over a single variable is just the literal itself.
    terms[s] = (n == 1) ? kids[0] : c.add_product(std::vector<NodeId>(kids));
  }
  const NodeId root =
      c.add_sum(std::move(terms), std::vector<double>(table.begin(), table.end()));
  c.set_root(root);
  return c;
}

}  // namespace spnc
