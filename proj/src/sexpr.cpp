#include "sexpr.hpp"

#include <cctype>
#include <cstdlib>

namespace tracelam::sexpr {

namespace {

struct Cursor {
  std::string_view src;
  std::size_t pos = 0;
  int line = 1;
  int col = 1;

  bool done() const { return pos >= src.size(); }
  char peek() const { return src[pos]; }
  char pop() {
    char c = src[pos++];
    if (c == '\n') {
      line++;
      col = 1;
    } else {
      col++;
    }
    return c;
  }
  void skip_space_and_comments() {
    while (!done()) {
      char c = peek();
      if (std::isspace(static_cast<unsigned char>(c))) {
        pop();
      } else if (c == ';') {
        while (!done() && peek() != '\n') pop();
      } else {
        break;
      }
    }
  }
};

bool atom_char(char c) {
  return !std::isspace(static_cast<unsigned char>(c)) && c != '(' && c != ')' &&
         c != ';';
}

Node read_node(Cursor& cur) {
  cur.skip_space_and_comments();
  if (cur.done()) throw ParseError("unexpected end of input", cur.line, cur.col);
  int line = cur.line;
  int col = cur.col;
  char c = cur.peek();
  if (c == '(') {
    cur.pop();
    Node list;
    list.line = line;
    list.col = col;
    for (;;) {
      cur.skip_space_and_comments();
      if (cur.done())
        throw ParseError("unbalanced '(': missing ')'", line, col);
      if (cur.peek() == ')') {
        cur.pop();
        return list;
      }
      list.items.push_back(read_node(cur));
    }
  }
  if (c == ')') throw ParseError("unexpected ')'", line, col);
  Node atom;
  atom.is_atom = true;
  atom.line = line;
  atom.col = col;
  while (!cur.done() && atom_char(cur.peek())) atom.atom.push_back(cur.pop());
  return atom;
}

}  // namespace

std::vector<Node> read_all(std::string_view src) {
  Cursor cur{src};
  std::vector<Node> out;
  for (;;) {
    cur.skip_space_and_comments();
    if (cur.done()) return out;
    out.push_back(read_node(cur));
  }
}

Node read_one(std::string_view src) {
  Cursor cur{src};
  Node n = read_node(cur);
  cur.skip_space_and_comments();
  if (!cur.done())
    throw ParseError("trailing content after expression", cur.line, cur.col);
  return n;
}

std::optional<double> parse_number(const std::string& atom) {
  if (atom.empty()) return std::nullopt;
  if (atom == "inf") return std::strtod("inf", nullptr);
  if (atom == "-inf") return -std::strtod("inf", nullptr);
  if (atom == "nan" || atom == "-nan") return std::strtod("nan", nullptr);
  const char* begin = atom.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end != begin + atom.size()) return std::nullopt;
  return v;
}

}  // namespace tracelam::sexpr
