#pragma once

#include <string>
#include <vector>

#include "spnc/circuit.hpp"
#include "spnc/oracle.hpp"
#include "spnc/rng.hpp"

namespace spnc::bench {

inline std::vector<VariableId> vars(int n) {
  std::vector<VariableId> out;
  for (int i = 0; i < n; ++i) out.push_back({i, "X" + std::to_string(i + 1)});
  return out;
}

inline JointTable random_table(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> probs(std::size_t{1} << n);
  for (double& p : probs) p = 0.05 + rng.next_double();
  JointTable t = make_table(vars(n), std::move(probs));
  t.normalize();
  return t;
}

inline Circuit mixture_circuit(int n, int k, std::uint64_t seed) {
  Rng rng(seed);
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
    components.push_back(c.add_product(std::move(factors)));
  }
  std::vector<double> mix(k, 1.0 / k);
  c.set_root(c.add_sum(std::move(components), std::move(mix)));
  return c;
}

}  // namespace spnc::bench
