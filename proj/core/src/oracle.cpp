#include "spnc/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "spnc/rng.hpp"

namespace spnc {

namespace {

void check_table(const JointTable& table) {
  if (table.variables.size() > 20)
    throw std::invalid_argument("joint tables are limited to 20 variables");
  if (table.probs.size() != (std::size_t{1} << table.variables.size()))
    throw std::invalid_argument("table size does not match 2^n");
}

std::uint64_t var_bit(int var) { return std::uint64_t{1} << var; }

}  // namespace

double JointTable::sum() const {
  double s = 0.0;
  for (double p : probs) s += p;
  return s;
}

void JointTable::normalize() {
  const double s = sum();
  if (s == 0.0) throw std::runtime_error("cannot normalize a zero-mass table");
  for (double& p : probs) p /= s;
}

bool JointTable::is_normalized(double tol) const { return std::abs(sum() - 1.0) <= tol; }

JointTable make_table(std::vector<VariableId> variables, std::vector<double> probs) {
  JointTable t{std::move(variables), std::move(probs)};
  check_table(t);
  for (double p : t.probs)
    if (!(p >= 0.0)) throw std::invalid_argument("table entries must be non-negative");
  return t;
}

JointTable enumerate_joint(const Circuit& circuit) {
  const int n = circuit.num_variables();
  if (n > 20)
    throw std::invalid_argument("enumerate_joint is limited to 20 variables, got " +
                                std::to_string(n));
  JointTable table;
  table.variables = circuit.variables();
  table.probs.resize(std::size_t{1} << n);
  for (std::size_t s = 0; s < table.probs.size(); ++s)
    table.probs[s] = circuit.marginal(PartialAssignment::complete(s, n));
  return table;
}

double table_marginal(const JointTable& table, const PartialAssignment& query) {
  check_table(table);
  if (query.max_index() >= table.n())
    throw std::invalid_argument("query references a variable outside the table");
  double sum = 0.0;
  const std::uint64_t mask = query.mask();
  const std::uint64_t bits = query.bits();
  for (std::size_t s = 0; s < table.probs.size(); ++s)
    if ((s & mask) == bits) sum += table.probs[s];
  return sum;
}

double table_conditional(const JointTable& table, const PartialAssignment& target,
                         const PartialAssignment& evidence) {
  if (!target.disjoint_with(evidence))
    throw std::invalid_argument("table_conditional: target and evidence overlap");
  const double pe = table_marginal(table, evidence);
  if (pe == 0.0) throw std::runtime_error("table_conditional: evidence has probability zero");
  return table_marginal(table, target.union_with(evidence)) / pe;
}

JointTable table_do(const JointTable& table, int intervened, bool value,
                    std::span<const int> parents) {
  check_table(table);
  if (intervened < 0 || intervened >= table.n())
    throw std::invalid_argument("intervened variable outside the table");
  std::uint64_t parent_mask = 0;
  for (int p : parents) {
    if (p < 0 || p >= table.n())
      throw std::invalid_argument("parent variable outside the table");
    if (p == intervened)
      throw std::invalid_argument("parents must exclude the intervened variable");
    parent_mask |= var_bit(p);
  }

  JointTable out;
  for (const auto& v : table.variables)
    if (v.index != intervened)
      out.variables.push_back({static_cast<int>(out.variables.size()), v.name});

  const int n = table.n();
  const std::size_t rem_states = std::size_t{1} << (n - 1);
  out.probs.resize(rem_states);

  PartialAssignment a;
  a.set(intervened, value);

  double total = 0.0;
  for (std::size_t r = 0; r < rem_states; ++r) {
    // expand remaining-variable bits back into the original index space
    PartialAssignment rest;
    std::size_t bit = 0;
    for (int i = 0; i < n; ++i) {
      if (i == intervened) continue;
      rest.set(i, (r >> bit) & 1);
      ++bit;
    }
    const PartialAssignment pa = rest.restrict_to(parent_mask);
    const double pa_mass = table_marginal(table, pa);
    double p = 0.0;
    if (pa_mass > 0.0) {
      const double joint_av = table_marginal(table, pa.union_with(a));
      if (joint_av == 0.0)
        throw std::runtime_error(
            "table_do: Pr(A=" + std::string(value ? "1" : "0") +
            " | pa) is zero on a positive-mass parent configuration");
      p = table_marginal(table, rest.union_with(a)) / (joint_av / pa_mass);
    }
    out.probs[r] = p;
    total += p;
  }

  if (std::abs(total - 1.0) > 1e-9)
    throw std::runtime_error("table_do: interventional mass " + std::to_string(total) +
                             " is not 1; input table is not normalized");
  for (double& p : out.probs) p /= total;
  return out;
}

namespace {

// Map a partial assignment over original indices onto the reduced index
// space of a do-table (original variable `dropped` removed).
PartialAssignment reindex_without(const PartialAssignment& a, int dropped) {
  PartialAssignment out;
  for (int i : a.keys()) {
    if (i == dropped) throw std::logic_error("assignment mentions the dropped variable");
    out.set(i < dropped ? i : i - 1, a.value(i));
  }
  return out;
}

ConstraintCheck check_conditional(const JointTable& table, const ConditionalEquality& c) {
  ConstraintCheck out{true, 0.0};
  auto visit_context = [&](const PartialAssignment& ctx) {
    PartialAssignment a1 = ctx, a0 = ctx;
    a1.set(c.attribute, true);
    a0.set(c.attribute, false);
    if (table_marginal(table, a1) == 0.0 || table_marginal(table, a0) == 0.0)
      return;  // conditioning on an impossible event: vacuous
    for (bool y : {true, false}) {
      PartialAssignment t;
      t.set(c.target, y);
      const double d = std::abs(table_conditional(table, t, a1) -
                                table_conditional(table, t, a0));
      out.max_violation = std::max(out.max_violation, d);
    }
  };

  if (c.condition_on_rest) {
    std::vector<int> rest;
    for (int i = 0; i < table.n(); ++i)
      if (i != c.target && i != c.attribute) rest.push_back(i);
    const std::size_t states = std::size_t{1} << rest.size();
    for (std::size_t v = 0; v < states; ++v) {
      PartialAssignment ctx;
      for (std::size_t j = 0; j < rest.size(); ++j) ctx.set(rest[j], (v >> j) & 1);
      visit_context(ctx);
    }
  } else {
    visit_context(c.context);
  }
  return out;
}

ConstraintCheck check_independence(const JointTable& table, const Independence& c) {
  ConstraintCheck out{true, 0.0};
  auto visit_context = [&](const PartialAssignment& g) {
    const double pg = g.empty() ? 1.0 : table_marginal(table, g);
    if (pg == 0.0) return;
    for (int a = 1; a >= 0; --a) {
      for (int b = 1; b >= 0; --b) {
        PartialAssignment pa, pb;
        pa.set(c.left, a);
        pb.set(c.right, b);
        const double joint = table_marginal(table, pa.union_with(pb).union_with(g)) / pg;
        const double ma = table_marginal(table, pa.union_with(g)) / pg;
        const double mb = table_marginal(table, pb.union_with(g)) / pg;
        out.max_violation = std::max(out.max_violation, std::abs(joint - ma * mb));
      }
    }
  };

  if (!c.given_set.empty()) {
    const std::size_t states = std::size_t{1} << c.given_set.size();
    for (std::size_t v = 0; v < states; ++v) {
      PartialAssignment g;
      for (std::size_t j = 0; j < c.given_set.size(); ++j)
        g.set(c.given_set[j], (v >> j) & 1);
      visit_context(g);
    }
  } else {
    visit_context(c.given_context);
  }
  return out;
}

ConstraintCheck check_interventional(const JointTable& table,
                                     const InterventionalEquality& c) {
  std::vector<int> targets = c.targets;
  if (targets.empty()) {
    for (int i = 0; i < table.n(); ++i)
      if (i != c.intervened) targets.push_back(i);
  }
  const JointTable do0 = table_do(table, c.intervened, false, c.parents);
  const JointTable do1 = table_do(table, c.intervened, true, c.parents);

  ConstraintCheck out{true, 0.0};
  const std::size_t states = std::uint64_t{1} << targets.size();
  for (std::size_t v = 0; v < states; ++v) {
    PartialAssignment t;
    for (std::size_t j = 0; j < targets.size(); ++j) t.set(targets[j], (v >> j) & 1);
    const PartialAssignment reduced = reindex_without(t, c.intervened);
    const double d =
        std::abs(table_marginal(do0, reduced) - table_marginal(do1, reduced));
    out.max_violation = std::max(out.max_violation, d);
  }
  return out;
}

}  // namespace

ConstraintCheck check_constraint(const JointTable& table, const Constraint& constraint,
                                 double tol) {
  check_table(table);
  ConstraintCheck out = std::visit(
      [&](const auto& c) -> ConstraintCheck {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, ConditionalEquality>)
          return check_conditional(table, c);
        else if constexpr (std::is_same_v<T, InterventionalEquality>)
          return check_interventional(table, c);
        else
          return check_independence(table, c);
      },
      constraint);
  out.satisfied = out.max_violation <= tol;
  return out;
}

Dataset sample_dataset(const JointTable& table, std::size_t m, std::uint64_t seed) {
  check_table(table);
  if (m < 1) throw std::invalid_argument("sample_dataset needs m >= 1");
  if (!table.is_normalized())
    throw std::invalid_argument("sample_dataset needs a normalized table");

  std::vector<double> cdf(table.probs.size());
  double acc = 0.0;
  for (std::size_t s = 0; s < table.probs.size(); ++s) {
    acc += table.probs[s];
    cdf[s] = acc;
  }
  cdf.back() = std::max(cdf.back(), 1.0);  // guard the last bucket against rounding

  Dataset data;
  data.variables = table.variables;
  data.rows.reserve(m);
  Rng rng(seed);
  for (std::size_t i = 0; i < m; ++i) {
    const double u = rng.next_double();
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    data.rows.push_back(static_cast<std::uint64_t>(it - cdf.begin()));
  }
  return data;
}

Circuit full_joint_circuit(const JointTable& table) {
  check_table(table);
  return full_joint_circuit(table.variables, table.probs);
}

}  // namespace spnc
