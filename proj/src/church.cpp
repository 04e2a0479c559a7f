#include "tracelam/church.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "tracelam/errors.hpp"
#include "sexpr.hpp"

namespace tracelam {

namespace {

bool reserved_word(const std::string& s) {
  return s == "query" || s == "define" || s == "lambda" || s == "if" ||
         s == "and" || s == "score" || s == "mem" || s == "true" ||
         s == "false" || s == "fail";
}

// Defines and parameters may shadow builtin primitive and distribution
// names (the regression model defines its own sqr and flip); reserved
// syntax words and the fresh-variable namespace stay off limits.
void check_bindable(const std::string& name, int line, int col) {
  if (name.empty() || reserved_word(name))
    throw ParseError("'" + name + "' cannot be bound", line, col);
  if (name[0] == '%')
    throw ParseError("identifiers starting with '%' are reserved", line, col);
}

struct SurfaceParser {
  const Registry& reg;
  std::vector<std::string> scope;

  bool in_scope(const std::string& name) const {
    return std::find(scope.begin(), scope.end(), name) != scope.end();
  }

  SurfaceExpr expr(const sexpr::Node& n) {
    SurfaceExpr e;
    e.line = n.line;
    e.col = n.col;
    if (n.is_atom) {
      if (auto num = sexpr::parse_number(n.atom)) {
        e.kind = SurfaceExpr::Kind::Const;
        e.num = *num;
        return e;
      }
      if (n.atom == "true" || n.atom == "false") {
        e.kind = SurfaceExpr::Kind::Const;
        e.num = n.atom == "true" ? 1.0 : 0.0;
        return e;
      }
      if (n.atom[0] == '%')
        throw ParseError("identifiers starting with '%' are reserved", n.line,
                         n.col);
      if (n.atom == "define" || n.atom == "query" || n.atom == "lambda")
        throw ParseError("misplaced '" + n.atom + "'", n.line, n.col);
      e.kind = SurfaceExpr::Kind::Var;
      e.name = n.atom;
      return e;
    }
    if (n.items.empty())
      throw ParseError("empty application", n.line, n.col);
    const sexpr::Node& head = n.items[0];
    if (head.is_atom) {
      const std::string& h = head.atom;
      if (h == "if") {
        if (n.items.size() != 4)
          throw ParseError("if expects 3 operands", n.line, n.col);
        e.kind = SurfaceExpr::Kind::If;
        for (std::size_t i = 1; i < 4; i++) e.children.push_back(expr(n.items[i]));
        return e;
      }
      if (h == "and") return expand_and(n, 1);
      if (h == "lambda") {
        if (n.items.size() != 3)
          throw ParseError("lambda expects a parameter list and a body", n.line,
                           n.col);
        e.kind = SurfaceExpr::Kind::Lambda;
        const sexpr::Node& params = n.items[1];
        if (params.is_atom) {
          check_bindable(params.atom, params.line, params.col);
          e.params.push_back(params.atom);
        } else {
          for (const sexpr::Node& p : params.items) {
            if (!p.is_atom)
              throw ParseError("lambda parameter must be an identifier", p.line,
                               p.col);
            check_bindable(p.atom, p.line, p.col);
            if (std::find(e.params.begin(), e.params.end(), p.atom) !=
                e.params.end())
              throw ParseError("duplicate parameter '" + p.atom + "'", p.line,
                               p.col);
            e.params.push_back(p.atom);
          }
        }
        for (const std::string& p : e.params) scope.push_back(p);
        e.children.push_back(expr(n.items[2]));
        for (std::size_t i = 0; i < e.params.size(); i++) scope.pop_back();
        return e;
      }
      if (h == "score") {
        if (n.items.size() != 2)
          throw ParseError("score expects 1 operand", n.line, n.col);
        e.kind = SurfaceExpr::Kind::Score;
        e.children.push_back(expr(n.items[1]));
        return e;
      }
      if (h == "define" || h == "query")
        throw ParseError("misplaced '" + h + "'", n.line, n.col);
      Symbol id = intern(h);
      if (const PrimSpec* p = in_scope(h) ? nullptr : reg.find_prim(id)) {
        // unary minus sugar: (- e) is (- 0 e)
        if (h == "-" && n.items.size() == 2) {
          e.kind = SurfaceExpr::Kind::PrimCall;
          e.id = id;
          SurfaceExpr zero;
          zero.kind = SurfaceExpr::Kind::Const;
          zero.num = 0.0;
          zero.line = n.line;
          zero.col = n.col;
          e.children.push_back(zero);
          e.children.push_back(expr(n.items[1]));
          return e;
        }
        if (n.items.size() - 1 != p->arity)
          throw ParseError("primitive '" + h + "' expects " +
                               std::to_string(p->arity) + " arguments",
                           n.line, n.col);
        e.kind = SurfaceExpr::Kind::PrimCall;
        e.id = id;
        for (std::size_t i = 1; i < n.items.size(); i++)
          e.children.push_back(expr(n.items[i]));
        return e;
      }
      if (const DistSpec* d = in_scope(h) ? nullptr : reg.find_dist(id)) {
        if (n.items.size() - 1 != d->arity)
          throw ParseError("distribution '" + h + "' expects " +
                               std::to_string(d->arity) + " arguments",
                           n.line, n.col);
        e.kind = SurfaceExpr::Kind::DistCall;
        e.id = id;
        for (std::size_t i = 1; i < n.items.size(); i++)
          e.children.push_back(expr(n.items[i]));
        return e;
      }
    }
    e.kind = SurfaceExpr::Kind::App;
    for (const sexpr::Node& item : n.items) e.children.push_back(expr(item));
    return e;
  }

  // (and) = true, (and e) = e, (and e1 e2 ...) = (if e1 (and e2 ...) false)
  SurfaceExpr expand_and(const sexpr::Node& n, std::size_t from) {
    if (from == n.items.size()) {
      SurfaceExpr t;
      t.kind = SurfaceExpr::Kind::Const;
      t.num = 1.0;
      t.line = n.line;
      t.col = n.col;
      return t;
    }
    if (from == n.items.size() - 1) return expr(n.items[from]);
    SurfaceExpr e;
    e.kind = SurfaceExpr::Kind::If;
    e.line = n.items[from].line;
    e.col = n.items[from].col;
    e.children.push_back(expr(n.items[from]));
    e.children.push_back(expand_and(n, from + 1));
    SurfaceExpr f;
    f.kind = SurfaceExpr::Kind::Const;
    f.num = 0.0;
    e.children.push_back(f);
    return e;
  }

  std::pair<std::string, SurfaceExpr> define(const sexpr::Node& n) {
    if (n.items.size() != 3)
      throw ParseError("define expects a name and one expression", n.line,
                       n.col);
    const sexpr::Node& target = n.items[1];
    if (target.is_atom) {
      check_bindable(target.atom, target.line, target.col);
      scope.push_back(target.atom);
      return {target.atom, expr(n.items[2])};
    }
    // (define (f x...) e) = (define f (lambda (x...) e))
    if (target.items.empty() || !target.items[0].is_atom)
      throw ParseError("malformed define head", target.line, target.col);
    const std::string& fname = target.items[0].atom;
    check_bindable(fname, target.items[0].line, target.items[0].col);
    scope.push_back(fname);
    SurfaceExpr lam;
    lam.kind = SurfaceExpr::Kind::Lambda;
    lam.line = n.line;
    lam.col = n.col;
    for (std::size_t i = 1; i < target.items.size(); i++) {
      const sexpr::Node& p = target.items[i];
      if (!p.is_atom)
        throw ParseError("lambda parameter must be an identifier", p.line,
                         p.col);
      check_bindable(p.atom, p.line, p.col);
      if (std::find(lam.params.begin(), lam.params.end(), p.atom) !=
          lam.params.end())
        throw ParseError("duplicate parameter '" + p.atom + "'", p.line, p.col);
      lam.params.push_back(p.atom);
    }
    for (const std::string& p : lam.params) scope.push_back(p);
    lam.children.push_back(expr(n.items[2]));
    for (std::size_t i = 0; i < lam.params.size(); i++) scope.pop_back();
    return {fname, lam};
  }
};

bool is_define(const sexpr::Node& n) {
  return !n.is_atom && !n.items.empty() && n.items[0].is_atom &&
         n.items[0].atom == "define";
}

}  // namespace

Query parse_query(std::string_view source, const Registry& reg) {
  sexpr::Node top = sexpr::read_one(source);
  if (top.is_atom || top.items.empty() || !top.items[0].is_atom ||
      top.items[0].atom != "query")
    throw ParseError("expected a (query ...) form", top.line, top.col);

  SurfaceParser parser{reg, {}};
  Query q;
  std::size_t i = 1;
  while (i < top.items.size() && is_define(top.items[i]))
    q.defines.push_back(parser.define(top.items[i++]));
  for (const auto& [name, unused] : q.defines) {
    std::size_t count = 0;
    for (const auto& [other, u2] : q.defines)
      if (other == name) count++;
    if (count > 1)
      throw ParseError("duplicate define '" + name + "'", top.line, top.col);
  }
  if (top.items.size() - i != 2)
    throw ParseError(
        "query expects defines followed by an output and a condition",
        top.line, top.col);
  q.output = parser.expr(top.items[i]);
  q.condition = parser.expr(top.items[i + 1]);
  return q;
}

namespace {

// Translation to the core calculus. Fresh let variables are drawn from the
// reserved % namespace, so the freshness side conditions hold by
// construction; the counter restarts per top-level translation to keep
// emitted terms reproducible.
struct Translator {
  const Registry& reg;
  std::vector<std::string> scope;
  std::uint64_t fresh_counter = 0;

  Symbol fresh() { return intern("%" + std::to_string(fresh_counter++)); }

  bool in_scope(const std::string& name) const {
    return std::find(scope.begin(), scope.end(), name) != scope.end();
  }

  static TermPtr let_in(Symbol x, TermPtr bound, TermPtr body) {
    return mk_app(mk_lam(x, std::move(body)), std::move(bound));
  }

  TermPtr call_chain(const SurfaceExpr& e, bool is_dist) {
    // let x1 = e1 in ... let xn = en in op(x1, ..., xn)
    std::vector<Symbol> xs;
    xs.reserve(e.children.size());
    for (std::size_t i = 0; i < e.children.size(); i++) xs.push_back(fresh());
    std::vector<Value> args;
    args.reserve(xs.size());
    for (Symbol x : xs) args.push_back(VarV{x});
    TermPtr body = is_dist ? mk_draw(e.id, std::move(args))
                           : mk_prim(e.id, std::move(args));
    for (std::size_t i = e.children.size(); i-- > 0;)
      body = let_in(xs[i], expr(e.children[i]), std::move(body));
    return body;
  }

  TermPtr expr(const SurfaceExpr& e) {
    switch (e.kind) {
      case SurfaceExpr::Kind::Const:
        return mk_const(e.num);
      case SurfaceExpr::Kind::Var:
        if (e.name == "mem")
          throw TranslateError("mem is not supported");
        if (!in_scope(e.name))
          throw TranslateError("unbound identifier '" + e.name + "'");
        return mk_var(intern(e.name));
      case SurfaceExpr::Kind::PrimCall:
        return call_chain(e, false);
      case SurfaceExpr::Kind::DistCall:
        return call_chain(e, true);
      case SurfaceExpr::Kind::If: {
        Symbol x = fresh();
        TermPtr cond = expr(e.children[0]);
        TermPtr body =
            mk_if(VarV{x}, expr(e.children[1]), expr(e.children[2]));
        return let_in(x, std::move(cond), std::move(body));
      }
      case SurfaceExpr::Kind::Score: {
        Symbol x = fresh();
        TermPtr arg = expr(e.children[0]);
        return let_in(x, std::move(arg), mk_score(VarV{x}));
      }
      case SurfaceExpr::Kind::Lambda: {
        if (e.params.empty()) {
          // a zero-parameter lambda binds a dummy
          return mk_lam(fresh(), expr(e.children[0]));
        }
        for (const std::string& p : e.params) scope.push_back(p);
        TermPtr body = expr(e.children[0]);
        for (std::size_t i = 0; i < e.params.size(); i++) scope.pop_back();
        for (std::size_t i = e.params.size(); i-- > 0;)
          body = mk_lam(intern(e.params[i]), std::move(body));
        return body;
      }
      case SurfaceExpr::Kind::App: {
        // (f) is application to the literal 0; longer spines left-associate
        if (e.children.size() == 1)
          return mk_app(expr(e.children[0]), mk_const(0.0));
        TermPtr acc = expr(e.children[0]);
        for (std::size_t i = 1; i < e.children.size(); i++)
          acc = mk_app(std::move(acc), expr(e.children[i]));
        return acc;
      }
    }
    throw TranslateError("unreachable surface expression kind");
  }
};

}  // namespace

TermPtr mk_fix(Symbol self, TermPtr body) {
  // fix x.M = \y. N N (\x.M) y   with   N = \z.\w. w (\y. ((z z) w) y)
  // The inner binder of N reuses y so that unfolding reproduces fix x.M
  // syntactically, not just up to renaming.
  Symbol y = intern("%fy");
  Symbol z = intern("%fz");
  Symbol w = intern("%fw");
  TermPtr zz = mk_app(mk_var(z), mk_var(z));
  TermPtr inner = mk_lam(y, mk_app(mk_app(std::move(zz), mk_var(w)), mk_var(y)));
  TermPtr n_fix = mk_lam(z, mk_lam(w, mk_app(mk_var(w), std::move(inner))));
  TermPtr applied =
      mk_app(mk_app(mk_app(n_fix, n_fix), mk_lam(self, std::move(body))),
             mk_var(y));
  return mk_lam(y, std::move(applied));
}

TermPtr translate_expr(const SurfaceExpr& e, const Registry& reg) {
  Translator tr{reg, {}, 0};
  return tr.expr(e);
}

TermPtr translate_query(const Query& q, const Registry& reg) {
  Translator tr{reg, {}, 0};

  std::vector<std::pair<std::string, TermPtr>> bound;
  bound.reserve(q.defines.size());
  for (const auto& [name, e] : q.defines) {
    tr.scope.push_back(name);  // a define sees itself, for recursion
    TermPtr core = tr.expr(e);
    const Value* v = as_value(*core);
    if (v != nullptr && std::holds_alternative<LamV>(*v)) {
      bound.emplace_back(name, mk_fix(intern(name), core));
    } else {
      // A non-function define is evaluated in place; a self-reference would
      // need a value that does not exist yet.
      if (occurs_free(*core, intern(name)))
        throw TranslateError("define '" + name +
                             "' refers to itself but is not a function");
      bound.emplace_back(name, core);
    }
  }

  Symbol b = tr.fresh();
  TermPtr cond = tr.expr(q.condition);
  TermPtr out = tr.expr(q.output);
  TermPtr body =
      Translator::let_in(b, std::move(cond),
                         mk_if(VarV{b}, std::move(out), mk_fail()));
  for (std::size_t i = bound.size(); i-- > 0;)
    body = Translator::let_in(intern(bound[i].first),
                              std::move(bound[i].second), std::move(body));
  return body;
}

TermPtr load_model(const std::string& path, const Registry& reg) {
  std::ifstream in(path);
  if (!in)
    throw Error("cannot open model file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  std::string src = ss.str();
  bool church = path.size() >= 7 && path.substr(path.size() - 7) == ".church";
  TermPtr term = church ? translate_query(parse_query(src, reg), reg)
                        : parse_term(src);
  if (!is_closed(*term))
    throw TranslateError("model '" + path + "' is not a closed term");
  return term;
}

}  // namespace tracelam
