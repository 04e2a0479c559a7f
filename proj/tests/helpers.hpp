#pragma once

// shared helpers for the test suites

#include <string>

#include "tracelam/ast.hpp"
#include "tracelam/church.hpp"

namespace tracelam::testing {

inline std::string model_path(const char* name) {
  return std::string(TRACELAM_MODELS_DIR) + "/" + name;
}

inline TermPtr load(const char* name) { return load_model(model_path(name)); }

inline TermPtr let_in(Symbol x, TermPtr bound, TermPtr body) {
  return mk_app(mk_lam(x, std::move(body)), std::move(bound));
}

// score(c); K  desugared as  (\_. K) score(c)
inline TermPtr seq(TermPtr first, TermPtr second) {
  return mk_app(mk_lam(intern("_seq"), std::move(second)), std::move(first));
}

// let v = rnd() < p in if v then K else fail
inline TermPtr flip_guard(double p, TermPtr then_term) {
  Symbol u = intern("_u");
  Symbol v = intern("_v");
  TermPtr cmp = let_in(
      u, mk_draw(intern("rnd"), {}),
      mk_prim(intern("<"), {Value{VarV{u}}, Value{ConstV{p}}}));
  return let_in(v, std::move(cmp),
                mk_if(VarV{v}, std::move(then_term), mk_fail()));
}

// a small discrete program: 1 w.p. 1/2, 2 w.p. 1/4, 3 w.p. 1/4
inline TermPtr discrete_k() {
  Symbol a = intern("_a");
  Symbol b = intern("_b");
  Symbol ka = intern("_ka");
  Symbol kb = intern("_kb");
  TermPtr first = let_in(
      a, mk_draw(intern("rnd"), {}),
      mk_prim(intern("<"), {Value{VarV{a}}, Value{ConstV{0.5}}}));
  TermPtr second = let_in(
      b, mk_draw(intern("rnd"), {}),
      mk_prim(intern("<"), {Value{VarV{b}}, Value{ConstV{0.5}}}));
  TermPtr inner =
      let_in(kb, std::move(second),
             mk_if(VarV{kb}, mk_const(2.0), mk_const(3.0)));
  return let_in(ka, std::move(first),
                mk_if(VarV{ka}, mk_const(1.0), std::move(inner)));
}

}  // namespace tracelam::testing
