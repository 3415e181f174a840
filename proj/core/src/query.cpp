#include "spnc/query.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "spnc/oracle.hpp"

namespace spnc {

namespace {

struct Cursor {
  const std::string& text;
  std::size_t pos = 0;

  void skip_ws() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  }
  bool eat(char c) {
    skip_ws();
    if (pos < text.size() && text[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }
  bool eat_word(const char* w) {
    skip_ws();
    const std::size_t len = std::char_traits<char>::length(w);
    if (text.compare(pos, len, w) == 0) {
      pos += len;
      return true;
    }
    return false;
  }
  char peek() {
    skip_ws();
    return pos < text.size() ? text[pos] : '\0';
  }
  [[noreturn]] void fail(const std::string& why) const {
    throw std::invalid_argument("query error at position " + std::to_string(pos) + ": " + why);
  }
  std::string identifier() {
    skip_ws();
    std::size_t start = pos;
    while (pos < text.size() &&
           (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_'))
      ++pos;
    if (pos == start) fail("expected a variable name");
    return text.substr(start, pos - start);
  }
};

int resolve(const std::string& name, const Circuit& circuit, Cursor& cur) {
  const int idx = circuit.variable_index(name);
  if (idx < 0) cur.fail("unknown variable '" + name + "'");
  return idx;
}

// <var>=<0|1> pairs separated by commas
PartialAssignment parse_assignment(Cursor& cur, const Circuit& circuit) {
  PartialAssignment out;
  while (true) {
    const std::string name = cur.identifier();
    const int var = resolve(name, circuit, cur);
    if (!cur.eat('=')) cur.fail("expected '=' after '" + name + "'");
    const char v = cur.peek();
    if (v != '0' && v != '1') cur.fail("expected 0 or 1 for '" + name + "'");
    ++cur.pos;
    if (out.contains(var)) cur.fail("variable '" + name + "' assigned twice");
    out.set(var, v == '1');
    if (!cur.eat(',')) break;
  }
  return out;
}

}  // namespace

QueryExpr parse_query(const std::string& text, const Circuit& circuit) {
  Cursor cur{text};
  if (!cur.eat('P')) cur.fail("expected 'P('");
  if (!cur.eat('(')) cur.fail("expected '(' after P");

  QueryExpr q;
  q.target = parse_assignment(cur, circuit);

  if (cur.eat('|')) {
    // "do(" introduces an intervention; a variable that merely starts with
    // "do" falls through to the conditional branch.
    const std::size_t mark = cur.pos;
    const bool is_do = cur.eat_word("do") && cur.peek() == '(';
    if (!is_do) cur.pos = mark;
    if (is_do) {
      q.kind = QueryExpr::Kind::Interventional;
      if (!cur.eat('(')) cur.fail("expected '(' after do");
      const std::string name = cur.identifier();
      q.intervened = resolve(name, circuit, cur);
      if (!cur.eat('=')) cur.fail("expected '=' in do(...)");
      const char v = cur.peek();
      if (v != '0' && v != '1') cur.fail("expected 0 or 1 in do(...)");
      ++cur.pos;
      q.intervened_value = v == '1';
      if (!cur.eat(')')) cur.fail("expected ')' after do(...)");
      if (!cur.eat(';')) cur.fail("expected '; parents=...' after do(...)");
      if (!cur.eat_word("parents")) cur.fail("expected 'parents=' after ';'");
      if (!cur.eat('=')) cur.fail("expected '=' after 'parents'");
      while (true) {
        q.parents.push_back(resolve(cur.identifier(), circuit, cur));
        if (!cur.eat(',')) break;
      }
      if (q.target.contains(q.intervened))
        cur.fail("target must not mention the intervened variable");
      for (int p : q.parents)
        if (p == q.intervened) cur.fail("parents must exclude the intervened variable");
    } else {
      q.kind = QueryExpr::Kind::Conditional;
      q.evidence = parse_assignment(cur, circuit);
      if (!q.target.disjoint_with(q.evidence))
        cur.fail("target and evidence overlap");
    }
  }

  if (!cur.eat(')')) cur.fail("expected closing ')'");
  cur.skip_ws();
  if (cur.pos != cur.text.size()) cur.fail("trailing input");
  return q;
}

double eval_query(const Circuit& circuit, const QueryExpr& query) {
  switch (query.kind) {
    case QueryExpr::Kind::Marginal:
      return circuit.marginal(query.target);
    case QueryExpr::Kind::Conditional:
      return circuit.conditional(query.target, query.evidence);
    case QueryExpr::Kind::Interventional: {
      // do-formula by enumeration; desk scale keeps this exact
      const JointTable table = enumerate_joint(circuit);
      const JointTable post =
          table_do(table, query.intervened, query.intervened_value, query.parents);
      PartialAssignment reduced;
      for (int i : query.target.keys())
        reduced.set(i < query.intervened ? i : i - 1, query.target.value(i));
      return table_marginal(post, reduced);
    }
  }
  throw std::logic_error("unreachable");
}

std::string format_probability(double p) {
  int decimals = 12;
  if (p > 0.0) {
    const int exponent = static_cast<int>(std::floor(std::log10(p)));
    decimals = 11 - exponent;          // 12 significant digits, fixed notation
    decimals = std::max(decimals, 0);
    decimals = std::min(decimals, 30);
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, p);
  return buf;
}

}  // namespace spnc
