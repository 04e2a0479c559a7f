#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "tracelam/symbol.hpp"

namespace tracelam {

struct Term;
using TermPtr = std::shared_ptr<const Term>;

struct ConstV {
  double v;
};
struct VarV {
  Symbol name;
};
struct LamV {
  Symbol param;
  TermPtr body;
};

// Value: constant, variable, or abstraction.
using Value = std::variant<ConstV, VarV, LamV>;

struct AppT {
  TermPtr fn;
  TermPtr arg;
};
// Draw, Prim, If and Score take values in argument positions; this is a
// restriction of the term grammar, not a runtime check.
struct DrawT {
  Symbol dist;
  std::vector<Value> args;
};
struct PrimT {
  Symbol prim;
  std::vector<Value> args;
};
struct IfT {
  Value cond;
  TermPtr then_branch;
  TermPtr else_branch;
};
struct ScoreT {
  Value arg;
};
struct FailT {};

// Immutable term; subterms are shared freely. var_mask is a lossy hash-set
// of every variable occurring in the subtree (bound or free), used to prune
// substitution; absence of a bit proves absence of the variable.
struct Term {
  std::variant<Value, AppT, DrawT, PrimT, IfT, ScoreT, FailT> node;
  std::uint64_t var_mask = 0;
};

constexpr std::uint64_t var_bit(Symbol name) {
  return std::uint64_t{1} << (name & 63u);
}

TermPtr mk_const(double v);
TermPtr mk_var(Symbol name);
TermPtr mk_lam(Symbol param, TermPtr body);
TermPtr mk_app(TermPtr fn, TermPtr arg);
TermPtr mk_draw(Symbol dist, std::vector<Value> args);
TermPtr mk_prim(Symbol prim, std::vector<Value> args);
TermPtr mk_if(Value cond, TermPtr then_branch, TermPtr else_branch);
TermPtr mk_score(Value arg);
TermPtr mk_fail();
TermPtr value_term(const Value& v);

const Value* as_value(const Term& t);
bool is_value(const Term& t);
bool is_fail(const Term& t);

// A value or the exception fail.
struct GenValue {
  std::optional<Value> val;  // nullopt means fail
  bool is_fail() const { return !val.has_value(); }
  static GenValue fail() { return GenValue{}; }
  static GenValue of(Value v) { return GenValue{std::move(v)}; }
};

std::optional<GenValue> as_gen_value(const Term& t);

// Structural equality. Constants compare bitwise, so NaN equals NaN and
// -0.0 differs from 0.0; this keeps equality a congruence for printing.
bool value_equal(const Value& a, const Value& b);
bool term_equal(const Term& a, const Term& b);
bool gen_value_equal(const GenValue& a, const GenValue& b);

bool is_closed(const Term& t);
bool occurs_free(const Term& t, Symbol name);
std::vector<Symbol> free_vars(const Term& t);

// Capture-avoiding substitution of val for free occurrences of name.
// Unchanged subtrees are shared with the input.
TermPtr subst(const TermPtr& body, Symbol name, const Value& val);

// Substitution of a value known to be closed: capture is impossible, so the
// free-variable scan of val is skipped. Evaluation of closed programs only
// ever substitutes closed values.
TermPtr subst_closed(const TermPtr& body, Symbol name, const Value& val);

// Evaluation contexts E ::= [.] | E M | (\x.M) E, stored outermost-first.
struct CtxFrame {
  enum class Kind { AppL, AppR };
  Kind kind;
  TermPtr arg;  // AppL: [.] arg
  LamV fn;      // AppR: fn [.]
};
struct EvalContext {
  std::vector<CtxFrame> frames;
  bool is_hole() const { return frames.empty(); }
};

EvalContext compose(const EvalContext& outer, const EvalContext& inner);
TermPtr plug(const EvalContext& ctx, TermPtr m);

// True iff the closed term matches one of the five erroneous redex forms.
bool is_erroneous(const Term& t);

struct Decomposed {
  EvalContext ctx;
  TermPtr redex;
};
using DecomposeResult = std::variant<GenValue, Decomposed>;

// Unique decomposition of a closed term into a generalized value or an
// evaluation context around a redex. Throws OpenTermError on open terms.
DecomposeResult decompose(const TermPtr& term);

// Canonical debug format, round-trip stable through parse_term.
std::string print_term(const Term& t);
std::string print_value(const Value& v);
std::string print_gen_value(const GenValue& g);
TermPtr parse_term(std::string_view src);

}  // namespace tracelam
