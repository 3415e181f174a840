#pragma once

// Shared fixtures and independent oracles for the test suites. The finite
// difference helpers deliberately use only Circuit::evaluate /
// residual_values so they stay independent of the analytic gradient paths
// they are used to check.

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "spnc/circuit.hpp"
#include "spnc/constraints.hpp"
#include "spnc/oracle.hpp"
#include "spnc/rng.hpp"

namespace spnc::test {

inline std::vector<VariableId> vars(int n) {
  std::vector<VariableId> out;
  for (int i = 0; i < n; ++i) out.push_back({i, "X" + std::to_string(i + 1)});
  return out;
}

inline PartialAssignment asgn(std::initializer_list<std::pair<int, int>> pairs) {
  PartialAssignment a;
  for (const auto& [var, val] : pairs) a.set(var, val != 0);
  return a;
}

// Dependent pair over (X1, X2): Pr(0,0)=0.4, Pr(0,1)=0.1, Pr(1,0)=0.1,
// Pr(1,1)=0.4.
inline JointTable pair_table() {
  return make_table(vars(2), {0.4, 0.1, 0.1, 0.4});
}

inline Circuit pair_circuit() { return full_joint_circuit(pair_table()); }

// Markov chain X1 -> X2 with Pr(X1=1)=0.6, Pr(X2=1|X1=1)=0.9,
// Pr(X2=1|X1=0)=0.2.
inline JointTable chain_table() {
  return make_table(vars(2), {0.32, 0.06, 0.08, 0.54});
}

// 3-variable table in the canonical-polynomial parameter order
// theta[k] = Pr of the k-th complete term: (1,1,1), (0,1,1), (1,0,1),
// (0,0,1), (1,0,0), (0,1,0), (1,1,0), (0,0,0).
inline JointTable theta_table(const std::array<double, 8>& theta) {
  static constexpr int kPattern[8][3] = {{1, 1, 1}, {0, 1, 1}, {1, 0, 1}, {0, 0, 1},
                                         {1, 0, 0}, {0, 1, 0}, {1, 1, 0}, {0, 0, 0}};
  std::vector<double> probs(8, 0.0);
  for (int k = 0; k < 8; ++k) {
    const std::size_t s = static_cast<std::size_t>(kPattern[k][0]) |
                          (static_cast<std::size_t>(kPattern[k][1]) << 1) |
                          (static_cast<std::size_t>(kPattern[k][2]) << 2);
    probs[s] = theta[k];
  }
  return make_table(vars(3), std::move(probs));
}

inline std::array<double, 8> fixed_theta() {
  return {0.08, 0.05, 0.07, 0.10, 0.20, 0.15, 0.12, 0.23};
}

inline JointTable random_table(int n, Rng& rng) {
  std::vector<double> probs(std::size_t{1} << n);
  for (double& p : probs) p = 0.05 + rng.next_double();
  JointTable t = make_table(vars(n), std::move(probs));
  t.normalize();
  return t;
}

// Naive-Bayes style mixture: root sum over k components, each a product of
// per-variable Bernoulli sum nodes. Exercises hierarchical sum nodes.
inline Circuit naive_bayes_circuit(int n, int k, Rng& rng) {
  Circuit c(vars(n));
  std::vector<NodeId> pos(n), neg(n);
  for (int i = 0; i < n; ++i) {
    pos[i] = c.add_leaf(i, true);
    neg[i] = c.add_leaf(i, false);
  }
  std::vector<NodeId> components;
  for (int j = 0; j < k; ++j) {
    std::vector<NodeId> factors;
    for (int i = 0; i < n; ++i) {
      const double p = 0.1 + 0.8 * rng.next_double();
      factors.push_back(c.add_sum({pos[i], neg[i]}, {p, 1.0 - p}));
    }
    components.push_back(n == 1 ? factors[0] : c.add_product(std::move(factors)));
  }
  std::vector<double> mix(k);
  double total = 0.0;
  for (double& w : mix) {
    w = 0.1 + rng.next_double();
    total += w;
  }
  for (double& w : mix) w /= total;
  c.set_root(c.add_sum(std::move(components), std::move(mix)));
  return c;
}

// Central finite differences of evaluate() w.r.t. the flat weight vector.
inline std::vector<double> fd_gradient(const Circuit& circuit,
                                       const PartialAssignment& assignment,
                                       double h = 1e-6) {
  Circuit probe = circuit;
  const std::vector<double> base = circuit.weights();
  std::vector<double> grad(base.size());
  std::vector<double> w = base;
  for (std::size_t j = 0; j < base.size(); ++j) {
    w[j] = base[j] + h;
    probe.set_weights(w);
    const double up = probe.evaluate(assignment);
    w[j] = base[j] - h;
    probe.set_weights(w);
    const double down = probe.evaluate(assignment);
    w[j] = base[j];
    grad[j] = (up - down) / (2.0 * h);
  }
  return grad;
}

// Central finite differences of marginal().
inline std::vector<double> fd_marginal_gradient(const Circuit& circuit,
                                                const PartialAssignment& query,
                                                double h = 1e-6) {
  Circuit probe = circuit;
  const std::vector<double> base = circuit.weights();
  std::vector<double> grad(base.size());
  std::vector<double> w = base;
  for (std::size_t j = 0; j < base.size(); ++j) {
    w[j] = base[j] + h;
    probe.set_weights(w);
    const double up = probe.marginal(query);
    w[j] = base[j] - h;
    probe.set_weights(w);
    const double down = probe.marginal(query);
    w[j] = base[j];
    grad[j] = (up - down) / (2.0 * h);
  }
  return grad;
}

// Central finite differences of residual_values(); rows in system order.
inline std::vector<std::vector<double>> fd_residual_jacobian(
    const ResidualSystem& system, const Circuit& circuit, double h = 1e-6) {
  Circuit probe = circuit;
  const std::vector<double> base = circuit.weights();
  std::vector<std::vector<double>> rows(system.size(),
                                        std::vector<double>(base.size()));
  std::vector<double> w = base;
  for (std::size_t j = 0; j < base.size(); ++j) {
    w[j] = base[j] + h;
    probe.set_weights(w);
    const std::vector<double> up = residual_values(system, probe);
    w[j] = base[j] - h;
    probe.set_weights(w);
    const std::vector<double> down = residual_values(system, probe);
    w[j] = base[j];
    for (std::size_t r = 0; r < system.size(); ++r)
      rows[r][j] = (up[r] - down[r]) / (2.0 * h);
  }
  return rows;
}

// Normwise relative error: ||a-b||_inf / max(1, ||b||_inf). Entrywise
// relative error is meaningless for exact-zero gradient entries.
inline double rel_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0, scale = 1.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max(scale, std::abs(b[i]));
  }
  return diff / scale;
}

}  // namespace spnc::test
