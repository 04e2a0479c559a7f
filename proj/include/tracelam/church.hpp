#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tracelam/ast.hpp"
#include "tracelam/builtins.hpp"

namespace tracelam {

// Surface expression of the Church-subset frontend.
struct SurfaceExpr {
  enum class Kind { Const, Var, PrimCall, DistCall, If, Lambda, App, Score };
  Kind kind = Kind::Const;
  double num = 0.0;                   // Const
  std::string name;                   // Var
  Symbol id = 0;                      // PrimCall / DistCall
  std::vector<std::string> params;    // Lambda
  std::vector<SurfaceExpr> children;  // args, if-parts, app items, body
  int line = 0;
  int col = 0;
};

// (query d1 ... dn e_out e_cond)
struct Query {
  std::vector<std::pair<std::string, SurfaceExpr>> defines;
  SurfaceExpr output;
  SurfaceExpr condition;
};

// Reads a whole .church source: one query s-expression.
// Sugar handled here: `and` (multiadic, nested ifs), `(define (f x...) e)`,
// unary minus `(- e)` as `(- 0 e)`, literals true/false as 1/0.
Query parse_query(std::string_view source,
                  const Registry& reg = default_registry());

// Translates a closed surface expression (no free identifiers).
TermPtr translate_expr(const SurfaceExpr& e,
                       const Registry& reg = default_registry());

// Translates a query to a closed core term: defines become lets (recursive
// function defines go through the call-by-value fixpoint combinator), then
// the condition is evaluated and gates the output against fail.
TermPtr translate_query(const Query& q,
                        const Registry& reg = default_registry());

// fix x.M: the call-by-value fixpoint combinator applied to \x.M.
// (fix x.M) V reduces to M{fix x.M/x} V in four pure steps.
TermPtr mk_fix(Symbol self, TermPtr body);

// Loads and translates a model file: ".church" sources go through the
// frontend, anything else is parsed as a core term.
TermPtr load_model(const std::string& path,
                   const Registry& reg = default_registry());

}  // namespace tracelam
