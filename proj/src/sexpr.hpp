#pragma once

// Minimal s-expression reader shared by the core-term parser and the Church
// frontend. Atoms keep their source location for error reporting.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tracelam/errors.hpp"

namespace tracelam::sexpr {

struct Node {
  bool is_atom = false;
  std::string atom;
  std::vector<Node> items;
  int line = 0;
  int col = 0;
};

// Parses a whole source buffer into a sequence of top-level nodes.
// Comments run from ';' to end of line. Throws ParseError.
std::vector<Node> read_all(std::string_view src);

// Parses exactly one top-level node; trailing content is an error.
Node read_one(std::string_view src);

// Numeric atoms: full-string strtod plus the spellings inf/-inf/nan/-nan.
std::optional<double> parse_number(const std::string& atom);

}  // namespace tracelam::sexpr
