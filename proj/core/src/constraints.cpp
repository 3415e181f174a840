#include "spnc/constraints.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "spnc/model_io.hpp"

namespace spnc {

namespace {

constexpr int kMaxEnumerationVars = 16;

void check_var(int var, const Circuit& circuit, const char* role) {
  if (var < 0 || var >= circuit.num_variables())
    throw std::invalid_argument(std::string(role) + " variable index " +
                                std::to_string(var) + " not in circuit");
}

std::string assignment_text(const PartialAssignment& a, const Circuit& circuit) {
  std::string out;
  for (int i : a.keys()) {
    if (!out.empty()) out += ',';
    out += circuit.variables()[i].name;
    out += '=';
    out += a.value(i) ? '1' : '0';
  }
  return out;
}

// Visit all assignments of `vars` (ascending indices expected) with value 1
// before value 0, lexicographic by position: (1,..,1) first, (0,..,0) last.
template <typename F>
void enumerate_assignments(std::span<const int> vars, F&& visit) {
  const std::size_t k = vars.size();
  const std::uint64_t states = std::uint64_t{1} << k;
  for (std::uint64_t v = states; v-- > 0;) {
    PartialAssignment a;
    for (std::size_t j = 0; j < k; ++j)
      a.set(vars[j], (v >> (k - 1 - j)) & 1);
    visit(a);
  }
}

// Factors that are identically 1 (the empty query) are dropped so the
// unnormalized residual matches the coefficient equations.
ResidualTerm make_term(double sign, std::initializer_list<PartialAssignment> factors) {
  ResidualTerm t;
  t.sign = sign;
  for (const auto& f : factors)
    if (!f.empty()) t.factors.push_back(f);
  if (t.factors.empty())
    throw std::logic_error("residual term with no non-trivial factor");
  return t;
}

std::vector<int> sorted_unique(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

void ResidualSystem::append(const ResidualSystem& other) {
  const std::size_t shift =
      provenance.empty() ? 0 : provenance.back().constraint_index + 1;
  residuals.insert(residuals.end(), other.residuals.begin(), other.residuals.end());
  for (ResidualProvenance p : other.provenance) {
    p.constraint_index += shift;
    provenance.push_back(std::move(p));
  }
}

std::string describe(const Constraint& constraint, const Circuit& circuit) {
  const auto name = [&](int i) { return circuit.variables().at(i).name; };
  std::ostringstream out;
  if (const auto* c = std::get_if<ConditionalEquality>(&constraint)) {
    out << "conditional-eq " << name(c->target) << " wrt " << name(c->attribute);
    if (!c->context.empty()) out << " context " << assignment_text(c->context, circuit);
    if (c->condition_on_rest) out << " on-rest";
  } else if (const auto* c = std::get_if<InterventionalEquality>(&constraint)) {
    out << "interventional-eq " << name(c->intervened) << " parents";
    for (int p : c->parents) out << ' ' << name(p);
    if (!c->targets.empty()) {
      out << " targets";
      for (int t : c->targets) out << ' ' << name(t);
    }
  } else {
    const auto& ind = std::get<Independence>(constraint);
    out << "independence " << name(ind.left) << ' ' << name(ind.right);
    if (!ind.given_set.empty()) {
      out << " given";
      for (int g : ind.given_set) out << ' ' << name(g);
    } else if (!ind.given_context.empty()) {
      out << " context " << assignment_text(ind.given_context, circuit);
    }
  }
  return out.str();
}

ResidualSystem compile_conditional(const ConditionalEquality& c, const Circuit& circuit) {
  check_var(c.target, circuit, "target");
  check_var(c.attribute, circuit, "attribute");
  if (c.target == c.attribute)
    throw std::invalid_argument("conditional-eq: target and attribute must differ");
  if (c.context.contains(c.target) || c.context.contains(c.attribute))
    throw std::invalid_argument("conditional-eq: context must not mention target or attribute");
  if (c.context.max_index() >= circuit.num_variables())
    throw std::invalid_argument("conditional-eq: context references unknown variable");
  if (c.condition_on_rest && !c.context.empty())
    throw std::invalid_argument("conditional-eq: on-rest excludes an explicit context");

  std::vector<int> rest;
  if (c.condition_on_rest) {
    for (int i = 0; i < circuit.num_variables(); ++i)
      if (i != c.target && i != c.attribute) rest.push_back(i);
    if (rest.size() > kMaxEnumerationVars)
      throw std::invalid_argument("conditional-eq on-rest would enumerate " +
                                  std::to_string(rest.size()) + " variables (cap 16)");
  }

  ResidualSystem system;
  auto emit = [&](const PartialAssignment& ctx) {
    PartialAssignment a1, a0;
    a1.set(c.attribute, true);
    a0.set(c.attribute, false);
    const PartialAssignment ctx_a1 = ctx.union_with(a1);
    const PartialAssignment ctx_a0 = ctx.union_with(a0);
    for (bool y : {true, false}) {
      PartialAssignment ty;
      ty.set(c.target, y);
      Residual r;
      r.push_back(make_term(+1.0, {ty.union_with(ctx_a1), ctx_a0}));
      r.push_back(make_term(-1.0, {ty.union_with(ctx_a0), ctx_a1}));
      system.residuals.push_back(std::move(r));
      std::string label = std::string("y=") + (y ? '1' : '0');
      if (!ctx.empty()) label += " | " + assignment_text(ctx, circuit);
      system.provenance.push_back({0, label, false});
    }
  };

  if (c.condition_on_rest)
    enumerate_assignments(rest, emit);
  else
    emit(c.context);
  return system;
}

ResidualSystem compile_interventional(const InterventionalEquality& c, const Circuit& circuit) {
  check_var(c.intervened, circuit, "intervened");
  const std::vector<int> parents = sorted_unique(c.parents);
  for (int p : parents) {
    check_var(p, circuit, "parent");
    if (p == c.intervened)
      throw std::invalid_argument("interventional-eq: intervened variable cannot be its own parent");
  }
  std::vector<int> targets = sorted_unique(c.targets);
  if (targets.empty()) {
    for (int i = 0; i < circuit.num_variables(); ++i)
      if (i != c.intervened) targets.push_back(i);
  }
  for (int t : targets) {
    check_var(t, circuit, "target");
    if (t == c.intervened)
      throw std::invalid_argument("interventional-eq: targets must exclude the intervened variable");
  }
  if (!std::includes(targets.begin(), targets.end(), parents.begin(), parents.end()))
    throw std::invalid_argument(
        "interventional-eq: targets must contain the parent set (the divisor "
        "Pr(A|pa) is undefined otherwise)");
  if (targets.size() > kMaxEnumerationVars)
    throw std::invalid_argument("interventional-eq would enumerate " +
                                std::to_string(targets.size()) + " targets (cap 16)");

  std::uint64_t parent_mask = 0;
  for (int p : parents) parent_mask |= std::uint64_t{1} << p;

  PartialAssignment a1, a0;
  a1.set(c.intervened, true);
  a0.set(c.intervened, false);

  ResidualSystem system;
  enumerate_assignments(targets, [&](const PartialAssignment& t) {
    const PartialAssignment pa = t.restrict_to(parent_mask);
    Residual r;
    r.push_back(make_term(+1.0, {t.union_with(a0), pa.union_with(a1)}));
    r.push_back(make_term(-1.0, {t.union_with(a1), pa.union_with(a0)}));
    system.residuals.push_back(std::move(r));
    system.provenance.push_back({0, "t: " + assignment_text(t, circuit), true});
  });
  return system;
}

ResidualSystem compile_independence(const Independence& c, const Circuit& circuit) {
  check_var(c.left, circuit, "left");
  check_var(c.right, circuit, "right");
  if (c.left == c.right)
    throw std::invalid_argument("independence: left and right must differ");
  if (!c.given_set.empty() && !c.given_context.empty())
    throw std::invalid_argument("independence: given set and context are mutually exclusive");
  if (c.given_context.contains(c.left) || c.given_context.contains(c.right))
    throw std::invalid_argument("independence: context must not mention left or right");
  if (c.given_context.max_index() >= circuit.num_variables())
    throw std::invalid_argument("independence: context references unknown variable");

  std::vector<int> given = sorted_unique(c.given_set);
  for (int g : given) {
    check_var(g, circuit, "given");
    if (g == c.left || g == c.right)
      throw std::invalid_argument("independence: given set must not mention left or right");
  }
  if (given.size() > kMaxEnumerationVars)
    throw std::invalid_argument("independence would enumerate " +
                                std::to_string(given.size()) + " given variables (cap 16)");

  ResidualSystem system;
  auto emit = [&](const PartialAssignment& g) {
    const int pair[2] = {c.left, c.right};
    enumerate_assignments(pair, [&](const PartialAssignment& ab) {
      PartialAssignment left_a, right_b;
      left_a.set(c.left, ab.value(c.left));
      right_b.set(c.right, ab.value(c.right));
      Residual r;
      r.push_back(make_term(+1.0, {ab.union_with(g), g}));
      r.push_back(make_term(-1.0, {left_a.union_with(g), right_b.union_with(g)}));
      system.residuals.push_back(std::move(r));
      std::string label = assignment_text(ab, circuit);
      if (!g.empty()) label += " | " + assignment_text(g, circuit);
      system.provenance.push_back({0, label, false});
    });
  };

  if (!given.empty())
    enumerate_assignments(given, emit);
  else
    emit(c.given_context);
  return system;
}

ResidualSystem compile(std::span<const Constraint> constraints, const Circuit& circuit) {
  ResidualSystem system;
  for (std::size_t i = 0; i < constraints.size(); ++i) {
    ResidualSystem one = std::visit(
        [&](const auto& c) -> ResidualSystem {
          using T = std::decay_t<decltype(c)>;
          if constexpr (std::is_same_v<T, ConditionalEquality>)
            return compile_conditional(c, circuit);
          else if constexpr (std::is_same_v<T, InterventionalEquality>)
            return compile_interventional(c, circuit);
          else
            return compile_independence(c, circuit);
        },
        constraints[i]);
    const std::string desc = describe(constraints[i], circuit);
    for (auto& p : one.provenance) {
      p.constraint_index = i;
      p.description = desc + " [" + p.description + "]";
    }
    system.residuals.insert(system.residuals.end(), one.residuals.begin(),
                            one.residuals.end());
    system.provenance.insert(system.provenance.end(), one.provenance.begin(),
                             one.provenance.end());
  }
  return system;
}

namespace {

// Evaluate all residuals against one value-per-factor map.
std::vector<double> combine(const ResidualSystem& system,
                            const std::unordered_map<PartialAssignment, double,
                                                     PartialAssignmentHash>& factor_value) {
  std::vector<double> out;
  out.reserve(system.residuals.size());
  for (const auto& residual : system.residuals) {
    double sum = 0.0;
    for (const auto& term : residual) {
      double prod = term.sign;
      for (const auto& f : term.factors) prod *= factor_value.at(f);
      sum += prod;
    }
    out.push_back(sum);
  }
  return out;
}

template <typename Eval>
std::vector<double> evaluate_residuals(const ResidualSystem& system, Eval&& eval) {
  std::unordered_map<PartialAssignment, double, PartialAssignmentHash> factor_value;
  for (const auto& residual : system.residuals)
    for (const auto& term : residual)
      for (const auto& f : term.factors)
        if (!factor_value.count(f)) factor_value.emplace(f, eval(f));
  return combine(system, factor_value);
}

}  // namespace

std::vector<double> residual_values(const ResidualSystem& system, const Circuit& circuit) {
  return evaluate_residuals(
      system, [&](const PartialAssignment& f) { return circuit.marginal(f); });
}

std::vector<double> residual_values_unnormalized(const ResidualSystem& system,
                                                 const Circuit& circuit) {
  return evaluate_residuals(
      system, [&](const PartialAssignment& f) { return circuit.evaluate(f); });
}

Jacobian residual_jacobian(const ResidualSystem& system, const Circuit& circuit) {
  // One value/gradient query per distinct factor.
  std::unordered_map<PartialAssignment, ValueGrad, PartialAssignmentHash> factor_vg;
  for (const auto& residual : system.residuals)
    for (const auto& term : residual)
      for (const auto& f : term.factors)
        if (!factor_vg.count(f)) factor_vg.emplace(f, circuit.marginal_with_gradient(f));

  Jacobian jac;
  jac.rows = system.residuals.size();
  jac.cols = circuit.weight_count();
  jac.data.assign(jac.rows * jac.cols, 0.0);

  for (std::size_t r = 0; r < system.residuals.size(); ++r) {
    for (const auto& term : system.residuals[r]) {
      if (term.factors.size() == 1) {
        const auto& vg = factor_vg.at(term.factors[0]);
        for (std::size_t j = 0; j < jac.cols; ++j)
          jac.at(r, j) += term.sign * vg.gradient[j];
      } else {
        const auto& vg1 = factor_vg.at(term.factors[0]);
        const auto& vg2 = factor_vg.at(term.factors[1]);
        for (std::size_t j = 0; j < jac.cols; ++j)
          jac.at(r, j) += term.sign * (vg1.gradient[j] * vg2.value +
                                       vg1.value * vg2.gradient[j]);
      }
    }
  }
  return jac;
}

int degree_probe(const ResidualSystem& system, const Circuit& circuit,
                 std::span<const double> direction) {
  if (direction.size() != circuit.weight_count())
    throw std::invalid_argument("direction length does not match circuit weight count");
  bool nonzero = false;
  for (double d : direction) nonzero |= d != 0.0;
  if (!nonzero) throw std::invalid_argument("degree probe needs a non-zero direction");

  const std::vector<double> base = circuit.weights();
  Circuit probe = circuit;

  // Residual values at t = 0, 1, 2, 3.
  std::array<std::vector<double>, 4> samples;
  std::vector<double> shifted(base.size());
  for (int t = 0; t < 4; ++t) {
    for (std::size_t i = 0; i < base.size(); ++i)
      shifted[i] = base[i] + static_cast<double>(t) * direction[i];
    probe.set_weights(shifted);
    samples[t] = residual_values_unnormalized(system, probe);
  }

  constexpr double kCoefficientTol = 1e-9;
  int degree = 0;
  for (std::size_t r = 0; r < system.residuals.size(); ++r) {
    // Newton forward differences on the unit-spaced samples.
    const double d1 = samples[1][r] - samples[0][r];
    const double d2 = samples[2][r] - 2 * samples[1][r] + samples[0][r];
    const double d3 = samples[3][r] - 3 * samples[2][r] + 3 * samples[1][r] - samples[0][r];
    int deg = 0;
    if (std::abs(d3) / 6.0 > kCoefficientTol)
      deg = 3;
    else if (std::abs(d2) / 2.0 > kCoefficientTol)
      deg = 2;
    else if (std::abs(d1) > kCoefficientTol)
      deg = 1;
    degree = std::max(degree, deg);
  }
  return degree;
}

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> tokens;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) {
    if (tok[0] == '#') break;
    tokens.push_back(tok);
  }
  return tokens;
}

int resolve_var(const std::string& name, const Circuit& circuit, int lineno) {
  // Variable lists may be comma separated; tolerate a trailing comma.
  std::string clean = name;
  if (!clean.empty() && clean.back() == ',') clean.pop_back();
  const int idx = circuit.variable_index(clean);
  if (idx < 0) throw ParseError(lineno, "unknown variable '" + clean + "'");
  return idx;
}

// "<var>=<0|1>" tokens until a keyword or end.
PartialAssignment parse_context_tokens(const std::vector<std::string>& tokens,
                                       std::size_t& i, const Circuit& circuit,
                                       int lineno) {
  PartialAssignment ctx;
  bool any = false;
  while (i < tokens.size() && tokens[i].find('=') != std::string::npos) {
    const auto eq = tokens[i].find('=');
    const int var = resolve_var(tokens[i].substr(0, eq), circuit, lineno);
    const std::string val = tokens[i].substr(eq + 1);
    if (val != "0" && val != "1")
      throw ParseError(lineno, "context value must be 0 or 1 in '" + tokens[i] + "'");
    if (ctx.contains(var))
      throw ParseError(lineno, "duplicate context variable in '" + tokens[i] + "'");
    ctx.set(var, val == "1");
    ++i;
    any = true;
  }
  if (!any) throw ParseError(lineno, "expected <var>=<0|1> after 'context'");
  return ctx;
}

}  // namespace

std::vector<Constraint> parse_constraints(const std::string& text, const Circuit& circuit) {
  std::vector<Constraint> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    const std::string& kind = tokens[0];

    if (kind == "independence") {
      if (tokens.size() < 3)
        throw ParseError(lineno, "expected 'independence <left> <right> ...'");
      Independence c;
      c.left = resolve_var(tokens[1], circuit, lineno);
      c.right = resolve_var(tokens[2], circuit, lineno);
      std::size_t i = 3;
      if (i < tokens.size()) {
        if (tokens[i] == "given") {
          for (++i; i < tokens.size(); ++i)
            c.given_set.push_back(resolve_var(tokens[i], circuit, lineno));
          if (c.given_set.empty())
            throw ParseError(lineno, "expected variables after 'given'");
        } else if (tokens[i] == "context") {
          ++i;
          c.given_context = parse_context_tokens(tokens, i, circuit, lineno);
          if (i != tokens.size())
            throw ParseError(lineno, "unexpected token '" + tokens[i] + "'");
        } else {
          throw ParseError(lineno, "unexpected token '" + tokens[i] + "'");
        }
      }
      out.emplace_back(std::move(c));
    } else if (kind == "conditional-eq") {
      if (tokens.size() < 4 || tokens[2] != "wrt")
        throw ParseError(lineno, "expected 'conditional-eq <target> wrt <attribute> ...'");
      ConditionalEquality c;
      c.target = resolve_var(tokens[1], circuit, lineno);
      c.attribute = resolve_var(tokens[3], circuit, lineno);
      std::size_t i = 4;
      while (i < tokens.size()) {
        if (tokens[i] == "context") {
          ++i;
          c.context = parse_context_tokens(tokens, i, circuit, lineno);
        } else if (tokens[i] == "on-rest") {
          c.condition_on_rest = true;
          ++i;
        } else {
          throw ParseError(lineno, "unexpected token '" + tokens[i] + "'");
        }
      }
      out.emplace_back(std::move(c));
    } else if (kind == "interventional-eq") {
      if (tokens.size() < 3 || tokens[2] != "parents")
        throw ParseError(lineno, "expected 'interventional-eq <intervened> parents ...'");
      InterventionalEquality c;
      c.intervened = resolve_var(tokens[1], circuit, lineno);
      std::size_t i = 3;
      while (i < tokens.size() && tokens[i] != "targets")
        c.parents.push_back(resolve_var(tokens[i++], circuit, lineno));
      if (i < tokens.size()) {  // "targets"
        for (++i; i < tokens.size(); ++i)
          c.targets.push_back(resolve_var(tokens[i], circuit, lineno));
        if (c.targets.empty())
          throw ParseError(lineno, "expected variables after 'targets'");
      }
      out.emplace_back(std::move(c));
    } else {
      throw ParseError(lineno, "unknown constraint kind '" + kind + "'");
    }
  }
  return out;
}

std::vector<Constraint> load_constraints(const std::string& path, const Circuit& circuit) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open constraints file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_constraints(buf.str(), circuit);
}

std::string format_residual(const Residual& residual, const Circuit& circuit) {
  std::ostringstream out;
  bool first_term = true;
  for (const auto& term : residual) {
    if (!first_term) out << ' ';
    first_term = false;
    out << (term.sign >= 0 ? '+' : '-');
    bool first_factor = true;
    for (const auto& f : term.factors) {
      if (!first_factor) out << '*';
      first_factor = false;
      out << "P(" << assignment_text(f, circuit) << ')';
    }
  }
  return out.str();
}

}  // namespace spnc
