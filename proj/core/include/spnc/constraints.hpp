#pragma once

#include <span>
#include <string>
#include <variant>
#include <vector>

#include "spnc/assignment.hpp"
#include "spnc/circuit.hpp"

namespace spnc {

// Pr(Y | A=1, ctx) = Pr(Y | A=0, ctx). With condition_on_rest the equality
// is required for every complete assignment of the remaining variables and
// the context must be empty.
struct ConditionalEquality {
  int target = 0;     // Y
  int attribute = 0;  // A
  PartialAssignment context;
  bool condition_on_rest = false;
};

// Pr(T | do(A=0)) = Pr(T | do(A=1)) for the declared parent set of A, with
// variables outside `targets` marginalized. `targets` must contain the
// parents; empty means "all variables except A" (resolved at compile time).
struct InterventionalEquality {
  int intervened = 0;  // A
  std::vector<int> parents;
  std::vector<int> targets;
};

// Marginal, conditional-set, or context-specific independence of two
// variables. At most one of given_set / given_context is non-empty.
struct Independence {
  int left = 0;
  int right = 0;
  std::vector<int> given_set;
  PartialAssignment given_context;
};

using Constraint = std::variant<ConditionalEquality, InterventionalEquality, Independence>;

std::string describe(const Constraint& constraint, const Circuit& circuit);

// One signed product of at most two normalized marginal queries.
struct ResidualTerm {
  double sign = 1.0;  // +1 or -1
  std::vector<PartialAssignment> factors;
};

// A residual is a signed sum of such products; its zero set encodes one
// probabilistic equality in cross-multiplied, division-free form.
using Residual = std::vector<ResidualTerm>;

struct ResidualProvenance {
  std::size_t constraint_index = 0;
  std::string description;
  // Interventional constraints assume no unobserved confounders.
  bool closed_world_assumed = false;
};

struct ResidualSystem {
  std::vector<Residual> residuals;
  std::vector<ResidualProvenance> provenance;

  std::size_t size() const { return residuals.size(); }
  void append(const ResidualSystem& other);
};

// Compilers. All referenced variables must exist in the circuit; value
// tuples are enumerated with value 1 before value 0, lexicographically by
// variable position, so e.g. independence cases come out as
// (1,1), (1,0), (0,1), (0,0).
ResidualSystem compile_conditional(const ConditionalEquality& c, const Circuit& circuit);
ResidualSystem compile_interventional(const InterventionalEquality& c, const Circuit& circuit);
ResidualSystem compile_independence(const Independence& c, const Circuit& circuit);
ResidualSystem compile(std::span<const Constraint> constraints, const Circuit& circuit);

// residual_i = Σ_terms sign · Π_factors marginal(factor).
std::vector<double> residual_values(const ResidualSystem& system, const Circuit& circuit);

// Same sums with unnormalized evaluations (no division by evaluate(∅));
// this is the polynomial form the degree claims are stated for.
std::vector<double> residual_values_unnormalized(const ResidualSystem& system,
                                                 const Circuit& circuit);

// Dense residual × weight matrix.
struct Jacobian {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }
};

// Exact product-rule differentiation of every residual w.r.t. the flat
// weight vector, via per-factor value/gradient queries.
Jacobian residual_jacobian(const ResidualSystem& system, const Circuit& circuit);

// Degree of the unnormalized residual polynomials along w + t·direction,
// from a 4-point interpolation (coefficients below 1e-9 treated as zero).
// Returns the maximum over residuals, in 0..3.
int degree_probe(const ResidualSystem& system, const Circuit& circuit,
                 std::span<const double> direction);

// Constraint text format, one constraint per line, '#' comments:
//   independence <left> <right>
//   independence <left> <right> given <v1> <v2> ...
//   independence <left> <right> context <v>=<0|1> ...
//   conditional-eq <target> wrt <attribute> [context <v>=<0|1> ...] [on-rest]
//   interventional-eq <intervened> parents <v1> ... [targets <v1> ...]
std::vector<Constraint> parse_constraints(const std::string& text, const Circuit& circuit);
std::vector<Constraint> load_constraints(const std::string& path, const Circuit& circuit);

// "+P(X1=1,X2=1) -P(X1=1)*P(X2=1)"
std::string format_residual(const Residual& residual, const Circuit& circuit);

}  // namespace spnc
