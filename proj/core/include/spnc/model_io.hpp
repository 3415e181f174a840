#pragma once

#include <stdexcept>
#include <string>

#include "spnc/circuit.hpp"

namespace spnc {

// Parse failure with the 1-based line it occurred on.
class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& cause)
      : std::runtime_error("line " + std::to_string(line) + ": " + cause),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// Line-oriented model text format, version "spn 1":
//   spn 1
//   var <index> <name>
//   leaf <id> <var-name> <+|->
//   prod <id> <child-id> <child-id> ...
//   sum <id> <child-id>:<weight> ...
//   root <id>
// '#' starts a comment; children must be declared before parents. Weights
// are written with 17 significant digits so a round trip is bit-exact.
std::string serialize(const Circuit& circuit);
Circuit deserialize(const std::string& text);

Circuit load_model(const std::string& path);
void save_model(const Circuit& circuit, const std::string& path);

}  // namespace spnc
