#pragma once

#include <string>

#include "spnc/circuit.hpp"

namespace spnc {

// Probability query expressions:
//   P(<asgn>)
//   P(<asgn> | <asgn>)
//   P(<asgn> | do(<var>=<0|1>) ; parents=<v1,v2,...>)
// where <asgn> is a comma-separated list of <var>=<0|1>. Interventional
// queries go through the truncated-factorization do-formula with the
// declared parent set.
struct QueryExpr {
  enum class Kind { Marginal, Conditional, Interventional };
  Kind kind = Kind::Marginal;
  PartialAssignment target;
  PartialAssignment evidence;    // conditional only
  int intervened = -1;           // interventional only
  bool intervened_value = false;
  std::vector<int> parents;
};

QueryExpr parse_query(const std::string& text, const Circuit& circuit);
double eval_query(const Circuit& circuit, const QueryExpr& query);

// Probability rendering used by the CLI: 12 significant digits, fixed
// notation (e.g. 0.500000000000).
std::string format_probability(double p);

}  // namespace spnc
