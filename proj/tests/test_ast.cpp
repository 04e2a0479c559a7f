#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "tracelam/ast.hpp"
#include "tracelam/errors.hpp"
#include "tracelam/termgen.hpp"

using namespace tracelam;

namespace {

Symbol sym(const char* s) { return intern(s); }

TermPtr identity(const char* v = "x") {
  return mk_lam(sym(v), mk_var(sym(v)));
}

}  // namespace

TEST_CASE("subst hits free variables") {
  TermPtr t = subst(mk_var(sym("x")), sym("x"), ConstV{3.0});
  CHECK(term_equal(*t, *mk_const(3.0)));
}

TEST_CASE("subst respects shadowing") {
  TermPtr lam = identity();
  TermPtr t = subst(lam, sym("x"), ConstV{3.0});
  CHECK(term_equal(*t, *lam));
  CHECK(t == lam);  // untouched subtree is shared
}

TEST_CASE("subst is structural") {
  TermPtr body = mk_app(mk_var(sym("x")), mk_var(sym("y")));
  Value z = LamV{sym("z"), mk_var(sym("z"))};
  TermPtr t = subst(body, sym("x"), z);
  TermPtr expected = mk_app(value_term(z), mk_var(sym("y")));
  CHECK(term_equal(*t, *expected));
}

TEST_CASE("subst avoids capture") {
  // (\y. x) with x := y  must not capture the substituted y
  TermPtr body = mk_lam(sym("y"), mk_var(sym("x")));
  TermPtr t = subst(body, sym("x"), VarV{sym("y")});
  const LamV& lam = std::get<LamV>(*as_value(*t));
  CHECK(lam.param != sym("y"));
  CHECK(term_equal(*lam.body, *mk_var(sym("y"))));
}

TEST_CASE("decompose of a value is the value") {
  DecomposeResult d = decompose(mk_const(5.0));
  REQUIRE(std::holds_alternative<GenValue>(d));
  CHECK(gen_value_equal(std::get<GenValue>(d), GenValue::of(ConstV{5.0})));
}

TEST_CASE("decompose finds the inner beta redex") {
  // ((\x.x) 1) 2  decomposes as  [.] 2  around  (\x.x) 1
  TermPtr inner = mk_app(identity(), mk_const(1.0));
  TermPtr t = mk_app(inner, mk_const(2.0));
  DecomposeResult d = decompose(t);
  REQUIRE(std::holds_alternative<Decomposed>(d));
  const Decomposed& dec = std::get<Decomposed>(d);
  CHECK(dec.ctx.frames.size() == 1);
  CHECK(dec.ctx.frames[0].kind == CtxFrame::Kind::AppL);
  CHECK(term_equal(*dec.redex, *inner));
  // replugging restores the input
  CHECK(term_equal(*plug(dec.ctx, dec.redex), *t));
}

TEST_CASE("decompose classifies a constant application as erroneous") {
  TermPtr t = mk_app(mk_const(3.0), identity());
  DecomposeResult d = decompose(t);
  REQUIRE(std::holds_alternative<Decomposed>(d));
  const Decomposed& dec = std::get<Decomposed>(d);
  CHECK(dec.ctx.is_hole());
  CHECK(is_erroneous(*dec.redex));
}

TEST_CASE("decompose rejects open terms") {
  CHECK_THROWS_AS(decompose(mk_var(sym("x"))), OpenTermError);
  CHECK_THROWS_AS(decompose(mk_app(mk_var(sym("f")), mk_const(1.0))),
                  OpenTermError);
}

TEST_CASE("fail under a proper context is the fail redex") {
  TermPtr t = mk_app(mk_fail(), mk_const(1.0));
  DecomposeResult d = decompose(t);
  REQUIRE(std::holds_alternative<Decomposed>(d));
  const Decomposed& dec = std::get<Decomposed>(d);
  CHECK(!dec.ctx.is_hole());
  CHECK(is_fail(*dec.redex));
}

TEST_CASE("erroneous redex forms") {
  CHECK(is_erroneous(*mk_app(mk_const(3.0), mk_const(4.0))));
  CHECK(is_erroneous(*mk_draw(sym("rnd"), {})) == false);
  CHECK(is_erroneous(*mk_draw(sym("gaussian"),
                              {Value{LamV{sym("x"), mk_var(sym("x"))}},
                               Value{ConstV{1.0}}})));
  CHECK(is_erroneous(
      *mk_prim(sym("+"), {Value{ConstV{1.0}},
                          Value{LamV{sym("x"), mk_var(sym("x"))}}})));
  CHECK(is_erroneous(*mk_if(ConstV{0.5}, mk_const(1.0), mk_const(2.0))));
  CHECK(!is_erroneous(*mk_if(ConstV{1.0}, mk_const(1.0), mk_const(2.0))));
  CHECK(!is_erroneous(*mk_if(ConstV{0.0}, mk_const(1.0), mk_const(2.0))));

  CHECK(!is_erroneous(*mk_score(ConstV{0.5})));
  CHECK(!is_erroneous(*mk_score(ConstV{1.0})));
  CHECK(is_erroneous(*mk_score(ConstV{2.0})));
  CHECK(is_erroneous(*mk_score(ConstV{0.0})));
  CHECK(is_erroneous(*mk_score(ConstV{-0.5})));
  CHECK(is_erroneous(*mk_score(ConstV{std::nan("")})));
  CHECK(is_erroneous(*mk_score(Value{LamV{sym("x"), mk_var(sym("x"))}})));
}

TEST_CASE("context composition matches nested plugging") {
  Rng rng(7);
  int checked = 0;
  for (int i = 0; i < 4000 && checked < 60; i++) {
    TermPtr t = gen_closed_term(rng, 6);
    DecomposeResult d = decompose(t);
    if (!std::holds_alternative<Decomposed>(d)) continue;
    const Decomposed& dec = std::get<Decomposed>(d);
    if (dec.ctx.frames.size() < 2) continue;
    checked++;
    EvalContext outer{std::vector<CtxFrame>(
        dec.ctx.frames.begin(), dec.ctx.frames.begin() + 1)};
    EvalContext inner{std::vector<CtxFrame>(dec.ctx.frames.begin() + 1,
                                            dec.ctx.frames.end())};
    TermPtr nested = plug(outer, plug(inner, dec.redex));
    TermPtr composed = plug(compose(outer, inner), dec.redex);
    CHECK(term_equal(*nested, *composed));
  }
  CHECK(checked > 10);
}

TEST_CASE("decomposition round-trips on generated terms") {
  Rng rng(11);
  for (int i = 0; i < 500; i++) {
    TermPtr t = gen_closed_term(rng, 6);
    DecomposeResult d1 = decompose(t);
    DecomposeResult d2 = decompose(t);
    if (std::holds_alternative<GenValue>(d1)) {
      CHECK(std::holds_alternative<GenValue>(d2));
      continue;
    }
    const Decomposed& a = std::get<Decomposed>(d1);
    const Decomposed& b = std::get<Decomposed>(d2);
    CHECK(term_equal(*plug(a.ctx, a.redex), *t));
    // repeated calls agree
    CHECK(a.ctx.frames.size() == b.ctx.frames.size());
    CHECK(term_equal(*a.redex, *b.redex));
  }
}

TEST_CASE("subst commutes with plugging into closed contexts") {
  Rng rng(13);
  Symbol x = sym("hole_var");
  int checked = 0;
  for (int i = 0; i < 400 && checked < 80; i++) {
    TermPtr t = gen_closed_term(rng, 5);
    DecomposeResult d = decompose(t);
    if (!std::holds_alternative<Decomposed>(d)) continue;
    const Decomposed& dec = std::get<Decomposed>(d);
    checked++;
    TermPtr open = mk_app(mk_var(x), mk_const(1.0));
    Value v = LamV{sym("z"), mk_var(sym("z"))};
    TermPtr lhs = subst(plug(dec.ctx, open), x, v);
    TermPtr rhs = plug(dec.ctx, subst(open, x, v));
    CHECK(term_equal(*lhs, *rhs));
  }
  CHECK(checked > 10);
}

TEST_CASE("printer and parser round-trip") {
  Rng rng(17);
  for (int i = 0; i < 400; i++) {
    TermPtr t = gen_closed_term(rng, 6);
    TermPtr back = parse_term(print_term(*t));
    CHECK(term_equal(*t, *back));
  }
}

TEST_CASE("printer round-trips special constants") {
  for (double v : {0.0, -0.0, 1.0 / 3.0, 1e-300, -1e300,
                   std::numeric_limits<double>::infinity(),
                   -std::numeric_limits<double>::infinity(),
                   std::nan("")}) {
    TermPtr t = mk_const(v);
    TermPtr back = parse_term(print_term(*t));
    CHECK(term_equal(*t, *back));
  }
}

TEST_CASE("parse_term reports malformed input") {
  CHECK_THROWS_AS(parse_term("(lambda (x)"), ParseError);
  CHECK_THROWS_AS(parse_term("(draw nosuch)"), ParseError);
  CHECK_THROWS_AS(parse_term("(prim + 1)"), ParseError);
  CHECK_THROWS_AS(parse_term("(if (f 1) 2 3)"), ParseError);  // non-value cond
}
