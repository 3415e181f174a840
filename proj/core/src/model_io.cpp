#include "spnc/model_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace spnc {

namespace {

std::string format_weight(double w) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", w);
  return buf;
}

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> tokens;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) {
    if (tok[0] == '#') break;  // comment until end of line
    tokens.push_back(tok);
  }
  return tokens;
}

long parse_nonneg_int(const std::string& tok, int line, const char* what) {
  std::size_t pos = 0;
  long v = 0;
  try {
    v = std::stol(tok, &pos);
  } catch (const std::exception&) {
    throw ParseError(line, std::string("expected ") + what + ", got '" + tok + "'");
  }
  if (pos != tok.size() || v < 0)
    throw ParseError(line, std::string("expected non-negative ") + what + ", got '" + tok + "'");
  return v;
}

double parse_weight(const std::string& tok, int line) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(tok, &pos);
  } catch (const std::exception&) {
    throw ParseError(line, "malformed weight '" + tok + "'");
  }
  if (pos != tok.size())
    throw ParseError(line, "malformed weight '" + tok + "'");
  if (!(v >= 0.0))
    throw ParseError(line, "negative weight " + tok);
  return v;
}

}  // namespace

std::string serialize(const Circuit& circuit) {
  std::ostringstream out;
  out << "spn 1\n";
  for (const auto& v : circuit.variables())
    out << "var " << v.index << ' ' << v.name << '\n';
  for (NodeId id = 0; id < circuit.node_count(); ++id) {
    const Node& n = circuit.node(id);
    switch (n.kind) {
      case NodeKind::Leaf:
        out << "leaf " << id << ' ' << circuit.variables()[n.leaf_var].name << ' '
            << (n.leaf_positive ? '+' : '-') << '\n';
        break;
      case NodeKind::Product:
        out << "prod " << id;
        for (NodeId c : n.children) out << ' ' << c;
        out << '\n';
        break;
      case NodeKind::Sum:
        out << "sum " << id;
        for (std::size_t j = 0; j < n.children.size(); ++j)
          out << ' ' << n.children[j] << ':' << format_weight(n.weights[j]);
        out << '\n';
        break;
    }
  }
  out << "root " << circuit.root() << '\n';
  return out.str();
}

Circuit deserialize(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;

  bool saw_header = false;
  std::vector<VariableId> variables;
  bool saw_node = false;

  // External node ids may be sparse; map them onto dense builder ids.
  std::unordered_map<long, NodeId> id_map;
  Circuit circuit;
  bool circuit_started = false;
  bool saw_root = false;

  auto resolve_child = [&](const std::string& tok, int ln) {
    const long ext = parse_nonneg_int(tok, ln, "child id");
    auto it = id_map.find(ext);
    if (it == id_map.end())
      throw ParseError(ln, "child id " + std::to_string(ext) +
                               " has not been declared");
    return it->second;
  };
  auto declare = [&](long ext, NodeId internal, int ln) {
    if (!id_map.emplace(ext, internal).second)
      throw ParseError(ln, "duplicate node id " + std::to_string(ext));
  };
  auto ensure_circuit = [&]() {
    if (!circuit_started) {
      circuit = Circuit(variables);
      circuit_started = true;
    }
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto tokens = tokenize(line);
    if (tokens.empty()) continue;
    const std::string& kw = tokens[0];

    if (!saw_header) {
      if (kw != "spn" || tokens.size() != 2 || tokens[1] != "1")
        throw ParseError(lineno, "expected format header 'spn 1'");
      saw_header = true;
      continue;
    }

    if (kw == "var") {
      if (saw_node) throw ParseError(lineno, "var lines must precede node lines");
      if (tokens.size() != 3) throw ParseError(lineno, "expected 'var <index> <name>'");
      const long idx = parse_nonneg_int(tokens[1], lineno, "variable index");
      if (idx != static_cast<long>(variables.size()))
        throw ParseError(lineno, "variable indices must be ascending from 0, got " +
                                     std::to_string(idx));
      if (!is_valid_variable_name(tokens[2]))
        throw ParseError(lineno, "invalid variable name '" + tokens[2] + "'");
      for (const auto& v : variables)
        if (v.name == tokens[2])
          throw ParseError(lineno, "duplicate variable name '" + tokens[2] + "'");
      variables.push_back({static_cast<int>(idx), tokens[2]});
    } else if (kw == "leaf") {
      saw_node = true;
      ensure_circuit();
      if (tokens.size() != 4)
        throw ParseError(lineno, "expected 'leaf <id> <var-name> <+|->'");
      const long ext = parse_nonneg_int(tokens[1], lineno, "node id");
      const int var = circuit.variable_index(tokens[2]);
      if (var < 0) throw ParseError(lineno, "unknown variable '" + tokens[2] + "'");
      if (tokens[3] != "+" && tokens[3] != "-")
        throw ParseError(lineno, "leaf polarity must be '+' or '-', got '" + tokens[3] + "'");
      declare(ext, circuit.add_leaf(var, tokens[3] == "+"), lineno);
    } else if (kw == "prod") {
      saw_node = true;
      ensure_circuit();
      if (tokens.size() < 2) throw ParseError(lineno, "expected 'prod <id> <children...>'");
      const long ext = parse_nonneg_int(tokens[1], lineno, "node id");
      std::vector<NodeId> children;
      for (std::size_t i = 2; i < tokens.size(); ++i)
        children.push_back(resolve_child(tokens[i], lineno));
      declare(ext, circuit.add_product(std::move(children)), lineno);
    } else if (kw == "sum") {
      saw_node = true;
      ensure_circuit();
      if (tokens.size() < 2) throw ParseError(lineno, "expected 'sum <id> <child:weight...>'");
      const long ext = parse_nonneg_int(tokens[1], lineno, "node id");
      std::vector<NodeId> children;
      std::vector<double> weights;
      for (std::size_t i = 2; i < tokens.size(); ++i) {
        const auto colon = tokens[i].find(':');
        if (colon == std::string::npos)
          throw ParseError(lineno, "expected <child-id>:<weight>, got '" + tokens[i] + "'");
        children.push_back(resolve_child(tokens[i].substr(0, colon), lineno));
        weights.push_back(parse_weight(tokens[i].substr(colon + 1), lineno));
      }
      declare(ext, circuit.add_sum(std::move(children), std::move(weights)), lineno);
    } else if (kw == "root") {
      ensure_circuit();
      if (tokens.size() != 2) throw ParseError(lineno, "expected 'root <id>'");
      circuit.set_root(resolve_child(tokens[1], lineno));
      saw_root = true;
    } else {
      throw ParseError(lineno, "unknown directive '" + kw + "'");
    }
  }

  if (!saw_header) throw ParseError(lineno == 0 ? 1 : lineno, "empty model: missing 'spn 1' header");
  if (!saw_root) throw ParseError(lineno, "missing 'root' line");
  return circuit;
}

Circuit load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize(buf.str());
}

void save_model(const Circuit& circuit, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write model file '" + path + "'");
  out << serialize(circuit);
}

}  // namespace spnc
