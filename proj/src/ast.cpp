#include "tracelam/ast.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstdio>

#include "tracelam/builtins.hpp"
#include "tracelam/errors.hpp"
#include "sexpr.hpp"

namespace tracelam {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

bool bits_equal(double a, double b) {
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

// Thread-local slab allocator for term nodes, the hottest allocation site in
// evaluation. Slabs are never returned to the system, so a block freed on one
// thread may be handed out again by another.
struct FreeBlock {
  FreeBlock* next;
};

template <std::size_t Size>
struct NodeSlab {
  static thread_local FreeBlock* freelist;
  static thread_local char* bump;
  static thread_local char* bump_end;

  static void* get() {
    if (freelist != nullptr) {
      FreeBlock* b = freelist;
      freelist = b->next;
      return b;
    }
    if (bump == bump_end) {
      constexpr std::size_t slab_bytes = Size * 1024;
      bump = static_cast<char*>(::operator new(slab_bytes));
      bump_end = bump + slab_bytes;
    }
    void* out = bump;
    bump += Size;
    return out;
  }

  static void put(void* p) {
    FreeBlock* b = static_cast<FreeBlock*>(p);
    b->next = freelist;
    freelist = b;
  }
};

template <std::size_t Size>
thread_local FreeBlock* NodeSlab<Size>::freelist = nullptr;
template <std::size_t Size>
thread_local char* NodeSlab<Size>::bump = nullptr;
template <std::size_t Size>
thread_local char* NodeSlab<Size>::bump_end = nullptr;

template <class T>
struct PoolAllocator {
  using value_type = T;
  PoolAllocator() = default;
  template <class U>
  PoolAllocator(const PoolAllocator<U>&) {}

  static constexpr std::size_t block_size() {
    constexpr std::size_t align = alignof(std::max_align_t);
    return (sizeof(T) + align - 1) / align * align;
  }

  T* allocate(std::size_t n) {
    if (n != 1)
      return static_cast<T*>(::operator new(n * sizeof(T)));
    return static_cast<T*>(NodeSlab<block_size()>::get());
  }
  void deallocate(T* p, std::size_t n) {
    if (n != 1) {
      ::operator delete(p);
      return;
    }
    NodeSlab<block_size()>::put(p);
  }
  template <class U>
  bool operator==(const PoolAllocator<U>&) const {
    return true;
  }
};

TermPtr alloc_term(Term&& t) {
  return std::allocate_shared<const Term>(PoolAllocator<const Term>{},
                                          std::move(t));
}

}  // namespace

namespace {

std::uint64_t value_var_mask(const Value& v) {
  return std::visit(
      overloaded{[](const ConstV&) -> std::uint64_t { return 0; },
                 [](const VarV& x) { return var_bit(x.name); },
                 [](const LamV& l) {
                   return var_bit(l.param) | l.body->var_mask;
                 }},
      v);
}

std::uint64_t values_var_mask(const std::vector<Value>& vs) {
  std::uint64_t m = 0;
  for (const Value& v : vs) m |= value_var_mask(v);
  return m;
}

}  // namespace

TermPtr mk_const(double v) {
  // 0 and 1 are the booleans
  static const TermPtr zero =
      alloc_term(Term{Value{ConstV{0.0}}, 0});
  static const TermPtr one =
      alloc_term(Term{Value{ConstV{1.0}}, 0});
  if (bits_equal(v, 0.0)) return zero;
  if (bits_equal(v, 1.0)) return one;
  return alloc_term(Term{Value{ConstV{v}}, 0});
}
TermPtr mk_var(Symbol name) {
  return alloc_term(Term{Value{VarV{name}}, var_bit(name)});
}
TermPtr mk_lam(Symbol param, TermPtr body) {
  std::uint64_t m = var_bit(param) | body->var_mask;
  return std::make_shared<const Term>(
      Term{Value{LamV{param, std::move(body)}}, m});
}
TermPtr mk_app(TermPtr fn, TermPtr arg) {
  std::uint64_t m = fn->var_mask | arg->var_mask;
  return std::make_shared<const Term>(
      Term{AppT{std::move(fn), std::move(arg)}, m});
}
TermPtr mk_draw(Symbol dist, std::vector<Value> args) {
  std::uint64_t m = values_var_mask(args);
  return alloc_term(Term{DrawT{dist, std::move(args)}, m});
}
TermPtr mk_prim(Symbol prim, std::vector<Value> args) {
  std::uint64_t m = values_var_mask(args);
  return alloc_term(Term{PrimT{prim, std::move(args)}, m});
}
TermPtr mk_if(Value cond, TermPtr then_branch, TermPtr else_branch) {
  std::uint64_t m = value_var_mask(cond) | then_branch->var_mask |
                    else_branch->var_mask;
  return std::make_shared<const Term>(
      Term{IfT{std::move(cond), std::move(then_branch), std::move(else_branch)},
           m});
}
TermPtr mk_score(Value arg) {
  std::uint64_t m = value_var_mask(arg);
  return alloc_term(Term{ScoreT{std::move(arg)}, m});
}
TermPtr mk_fail() {
  static const TermPtr fail = alloc_term(Term{FailT{}, 0});
  return fail;
}
TermPtr value_term(const Value& v) {
  return alloc_term(Term{v, value_var_mask(v)});
}

const Value* as_value(const Term& t) { return std::get_if<Value>(&t.node); }
bool is_value(const Term& t) { return as_value(t) != nullptr; }
bool is_fail(const Term& t) { return std::holds_alternative<FailT>(t.node); }

std::optional<GenValue> as_gen_value(const Term& t) {
  if (const Value* v = as_value(t)) return GenValue::of(*v);
  if (is_fail(t)) return GenValue::fail();
  return std::nullopt;
}

bool value_equal(const Value& a, const Value& b) {
  if (a.index() != b.index()) return false;
  return std::visit(
      overloaded{
          [&](const ConstV& c) { return bits_equal(c.v, std::get<ConstV>(b).v); },
          [&](const VarV& x) { return x.name == std::get<VarV>(b).name; },
          [&](const LamV& l) {
            const LamV& m = std::get<LamV>(b);
            return l.param == m.param && term_equal(*l.body, *m.body);
          }},
      a);
}

bool term_equal(const Term& a, const Term& b) {
  if (&a == &b) return true;
  if (a.node.index() != b.node.index()) return false;
  return std::visit(
      overloaded{
          [&](const Value& v) { return value_equal(v, std::get<Value>(b.node)); },
          [&](const AppT& x) {
            const AppT& y = std::get<AppT>(b.node);
            return term_equal(*x.fn, *y.fn) && term_equal(*x.arg, *y.arg);
          },
          [&](const DrawT& x) {
            const DrawT& y = std::get<DrawT>(b.node);
            if (x.dist != y.dist || x.args.size() != y.args.size()) return false;
            for (std::size_t i = 0; i < x.args.size(); i++)
              if (!value_equal(x.args[i], y.args[i])) return false;
            return true;
          },
          [&](const PrimT& x) {
            const PrimT& y = std::get<PrimT>(b.node);
            if (x.prim != y.prim || x.args.size() != y.args.size()) return false;
            for (std::size_t i = 0; i < x.args.size(); i++)
              if (!value_equal(x.args[i], y.args[i])) return false;
            return true;
          },
          [&](const IfT& x) {
            const IfT& y = std::get<IfT>(b.node);
            return value_equal(x.cond, y.cond) &&
                   term_equal(*x.then_branch, *y.then_branch) &&
                   term_equal(*x.else_branch, *y.else_branch);
          },
          [&](const ScoreT& x) {
            return value_equal(x.arg, std::get<ScoreT>(b.node).arg);
          },
          [&](const FailT&) { return true; }},
      a.node);
}

bool gen_value_equal(const GenValue& a, const GenValue& b) {
  if (a.is_fail() != b.is_fail()) return false;
  if (a.is_fail()) return true;
  return value_equal(*a.val, *b.val);
}

namespace {

void collect_free(const Term& t, std::vector<Symbol>& bound,
                  std::vector<Symbol>& out);

void collect_free_value(const Value& v, std::vector<Symbol>& bound,
                        std::vector<Symbol>& out) {
  std::visit(overloaded{[](const ConstV&) {},
                        [&](const VarV& x) {
                          if (std::find(bound.begin(), bound.end(), x.name) ==
                              bound.end())
                            out.push_back(x.name);
                        },
                        [&](const LamV& l) {
                          bound.push_back(l.param);
                          collect_free(*l.body, bound, out);
                          bound.pop_back();
                        }},
             v);
}

void collect_free(const Term& t, std::vector<Symbol>& bound,
                  std::vector<Symbol>& out) {
  std::visit(overloaded{[&](const Value& v) { collect_free_value(v, bound, out); },
                        [&](const AppT& a) {
                          collect_free(*a.fn, bound, out);
                          collect_free(*a.arg, bound, out);
                        },
                        [&](const DrawT& d) {
                          for (const Value& v : d.args)
                            collect_free_value(v, bound, out);
                        },
                        [&](const PrimT& p) {
                          for (const Value& v : p.args)
                            collect_free_value(v, bound, out);
                        },
                        [&](const IfT& i) {
                          collect_free_value(i.cond, bound, out);
                          collect_free(*i.then_branch, bound, out);
                          collect_free(*i.else_branch, bound, out);
                        },
                        [&](const ScoreT& s) {
                          collect_free_value(s.arg, bound, out);
                        },
                        [](const FailT&) {}},
             t.node);
}

}  // namespace

std::vector<Symbol> free_vars(const Term& t) {
  std::vector<Symbol> bound;
  std::vector<Symbol> out;
  collect_free(t, bound, out);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

bool is_closed(const Term& t) { return free_vars(t).empty(); }

bool occurs_free(const Term& t, Symbol name) {
  std::vector<Symbol> fv = free_vars(t);
  return std::find(fv.begin(), fv.end(), name) != fv.end();
}

namespace {

// Substitution core. Returns the original pointer when nothing changed so
// untouched subtrees stay shared.
struct Subst {
  Symbol name;
  const Value& val;
  const std::vector<Symbol>& val_free;

  TermPtr term(const TermPtr& t) {
    if ((t->var_mask & var_bit(name)) == 0) return t;  // name cannot occur
    const Term& node = *t;
    return std::visit(
        overloaded{
            [&](const Value& v) -> TermPtr {
              bool changed = false;
              Value v2 = value(v, changed);
              return changed ? value_term(v2) : t;
            },
            [&](const AppT& a) -> TermPtr {
              TermPtr fn = term(a.fn);
              TermPtr arg = term(a.arg);
              if (fn == a.fn && arg == a.arg) return t;
              return mk_app(std::move(fn), std::move(arg));
            },
            [&](const DrawT& d) -> TermPtr {
              bool changed = false;
              std::vector<Value> args = values(d.args, changed);
              return changed ? mk_draw(d.dist, std::move(args)) : t;
            },
            [&](const PrimT& p) -> TermPtr {
              bool changed = false;
              std::vector<Value> args = values(p.args, changed);
              return changed ? mk_prim(p.prim, std::move(args)) : t;
            },
            [&](const IfT& i) -> TermPtr {
              bool changed = false;
              Value cond = value(i.cond, changed);
              TermPtr th = term(i.then_branch);
              TermPtr el = term(i.else_branch);
              if (!changed && th == i.then_branch && el == i.else_branch)
                return t;
              return mk_if(std::move(cond), std::move(th), std::move(el));
            },
            [&](const ScoreT& s) -> TermPtr {
              bool changed = false;
              Value arg = value(s.arg, changed);
              return changed ? mk_score(std::move(arg)) : t;
            },
            [&](const FailT&) -> TermPtr { return t; }},
        node.node);
  }

  std::vector<Value> values(const std::vector<Value>& vs, bool& changed) {
    std::vector<Value> out;
    out.reserve(vs.size());
    for (const Value& v : vs) out.push_back(value(v, changed));
    return out;
  }

  Value value(const Value& v, bool& changed) {
    return std::visit(
        overloaded{
            [&](const ConstV& c) -> Value { return c; },
            [&](const VarV& x) -> Value {
              if (x.name == name) {
                changed = true;
                return val;
              }
              return x;
            },
            [&](const LamV& l) -> Value {
              if (l.param == name) return l;  // shadowed
              if (std::find(val_free.begin(), val_free.end(), l.param) !=
                  val_free.end()) {
                // binder would capture a free variable of val: rename first
                Symbol q = fresh_runtime_name();
                TermPtr renamed = subst(l.body, l.param, Value{VarV{q}});
                TermPtr body = term(renamed);
                changed = true;
                return LamV{q, std::move(body)};
              }
              TermPtr body = term(l.body);
              if (body == l.body) return l;
              changed = true;
              return LamV{l.param, std::move(body)};
            }},
        v);
  }
};

}  // namespace

TermPtr subst(const TermPtr& body, Symbol name, const Value& val) {
  std::vector<Symbol> val_free;
  {
    std::vector<Symbol> bound;
    collect_free_value(val, bound, val_free);
  }
  Subst s{name, val, val_free};
  return s.term(body);
}

TermPtr subst_closed(const TermPtr& body, Symbol name, const Value& val) {
  static const std::vector<Symbol> no_free;
  Subst s{name, val, no_free};
  return s.term(body);
}

EvalContext compose(const EvalContext& outer, const EvalContext& inner) {
  EvalContext out;
  out.frames.reserve(outer.frames.size() + inner.frames.size());
  out.frames.insert(out.frames.end(), outer.frames.begin(), outer.frames.end());
  out.frames.insert(out.frames.end(), inner.frames.begin(), inner.frames.end());
  return out;
}

TermPtr plug(const EvalContext& ctx, TermPtr m) {
  for (auto it = ctx.frames.rbegin(); it != ctx.frames.rend(); ++it) {
    if (it->kind == CtxFrame::Kind::AppL) {
      m = mk_app(std::move(m), it->arg);
    } else {
      m = mk_app(value_term(Value{it->fn}), std::move(m));
    }
  }
  return m;
}

namespace {

bool value_is_lam(const Value& v) { return std::holds_alternative<LamV>(v); }

bool const_is_bool(const Value& v) {
  const ConstV* c = std::get_if<ConstV>(&v);
  return c != nullptr && (c->v == 0.0 || c->v == 1.0);
}

bool any_lam_arg(const std::vector<Value>& args) {
  return std::any_of(args.begin(), args.end(), value_is_lam);
}

}  // namespace

bool is_erroneous(const Term& t) {
  return std::visit(
      overloaded{
          [](const Value&) { return false; },
          [](const AppT& a) {
            const Value* fn = as_value(*a.fn);
            return fn != nullptr && std::holds_alternative<ConstV>(*fn);
          },
          [](const DrawT& d) { return any_lam_arg(d.args); },
          [](const PrimT& p) { return any_lam_arg(p.args); },
          [](const IfT& i) {
            if (std::holds_alternative<VarV>(i.cond)) return false;  // open
            return !const_is_bool(i.cond);
          },
          [](const ScoreT& s) {
            if (const ConstV* c = std::get_if<ConstV>(&s.arg))
              return !(c->v > 0.0 && c->v <= 1.0);
            return std::holds_alternative<LamV>(s.arg);
          },
          [](const FailT&) { return false; }},
      t.node);
}

namespace {

// term is closed and not a generalized value
void decompose_inner(const TermPtr& t, std::vector<CtxFrame>& frames,
                     TermPtr& redex) {
  const Term& node = *t;
  if (const AppT* a = std::get_if<AppT>(&node.node)) {
    if (is_fail(*a->fn)) {
      frames.push_back(CtxFrame{CtxFrame::Kind::AppL, a->arg, {}});
      redex = a->fn;
      return;
    }
    if (const Value* fn = as_value(*a->fn)) {
      if (std::holds_alternative<ConstV>(*fn)) {
        redex = t;  // erroneous: c M
        return;
      }
      const LamV& lam = std::get<LamV>(*fn);
      if (is_value(*a->arg)) {
        redex = t;  // beta
        return;
      }
      frames.push_back(CtxFrame{CtxFrame::Kind::AppR, nullptr, lam});
      if (is_fail(*a->arg)) {
        redex = a->arg;
        return;
      }
      decompose_inner(a->arg, frames, redex);
      return;
    }
    frames.push_back(CtxFrame{CtxFrame::Kind::AppL, a->arg, {}});
    decompose_inner(a->fn, frames, redex);
    return;
  }
  // Draw, Prim, If, Score: a redex (possibly erroneous) at the hole
  redex = t;
}

}  // namespace

DecomposeResult decompose(const TermPtr& term) {
  if (!is_closed(*term))
    throw OpenTermError("decompose: term has free variables");
  if (auto g = as_gen_value(*term)) return *g;
  Decomposed d;
  decompose_inner(term, d.ctx.frames, d.redex);
  return d;
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void print_term_rec(const Term& t, std::string& out);

void print_value_rec(const Value& v, std::string& out) {
  std::visit(overloaded{[&](const ConstV& c) { out += fmt_double(c.v); },
                        [&](const VarV& x) { out += symbol_name(x.name); },
                        [&](const LamV& l) {
                          out += "(lambda (";
                          out += symbol_name(l.param);
                          out += ") ";
                          print_term_rec(*l.body, out);
                          out += ")";
                        }},
             v);
}

void print_args(const std::vector<Value>& args, std::string& out) {
  for (const Value& v : args) {
    out += " ";
    print_value_rec(v, out);
  }
}

void print_term_rec(const Term& t, std::string& out) {
  std::visit(overloaded{[&](const Value& v) { print_value_rec(v, out); },
                        [&](const AppT& a) {
                          out += "(";
                          print_term_rec(*a.fn, out);
                          out += " ";
                          print_term_rec(*a.arg, out);
                          out += ")";
                        },
                        [&](const DrawT& d) {
                          out += "(draw ";
                          out += symbol_name(d.dist);
                          print_args(d.args, out);
                          out += ")";
                        },
                        [&](const PrimT& p) {
                          out += "(prim ";
                          out += symbol_name(p.prim);
                          print_args(p.args, out);
                          out += ")";
                        },
                        [&](const IfT& i) {
                          out += "(if ";
                          print_value_rec(i.cond, out);
                          out += " ";
                          print_term_rec(*i.then_branch, out);
                          out += " ";
                          print_term_rec(*i.else_branch, out);
                          out += ")";
                        },
                        [&](const ScoreT& s) {
                          out += "(score ";
                          print_value_rec(s.arg, out);
                          out += ")";
                        },
                        [&](const FailT&) { out += "fail"; }},
             t.node);
}

}  // namespace

std::string print_term(const Term& t) {
  std::string out;
  print_term_rec(t, out);
  return out;
}

std::string print_value(const Value& v) {
  std::string out;
  print_value_rec(v, out);
  return out;
}

std::string print_gen_value(const GenValue& g) {
  return g.is_fail() ? "fail" : print_value(*g.val);
}

namespace {

bool reserved_core_word(const std::string& s) {
  return s == "lambda" || s == "draw" || s == "prim" || s == "if" ||
         s == "score" || s == "fail";
}

TermPtr term_of_sexpr(const sexpr::Node& n);

Value value_of_sexpr(const sexpr::Node& n) {
  TermPtr t = term_of_sexpr(n);
  const Value* v = as_value(*t);
  if (v == nullptr)
    throw ParseError("expected a value in argument position", n.line, n.col);
  return *v;
}

std::vector<Value> values_of(const sexpr::Node& n, std::size_t from) {
  std::vector<Value> out;
  for (std::size_t i = from; i < n.items.size(); i++)
    out.push_back(value_of_sexpr(n.items[i]));
  return out;
}

const sexpr::Node& expect_item(const sexpr::Node& n, std::size_t i,
                               const char* what) {
  if (i >= n.items.size())
    throw ParseError(std::string("missing ") + what, n.line, n.col);
  return n.items[i];
}

TermPtr term_of_sexpr(const sexpr::Node& n) {
  if (n.is_atom) {
    if (auto num = sexpr::parse_number(n.atom)) return mk_const(*num);
    if (n.atom == "fail") return mk_fail();
    if (reserved_core_word(n.atom))
      throw ParseError("reserved word '" + n.atom + "' used as a variable",
                       n.line, n.col);
    return mk_var(intern(n.atom));
  }
  if (n.items.empty()) throw ParseError("empty list", n.line, n.col);
  const sexpr::Node& head = n.items[0];
  if (head.is_atom) {
    const std::string& h = head.atom;
    if (h == "lambda") {
      const sexpr::Node& params = expect_item(n, 1, "parameter list");
      if (params.is_atom || params.items.size() != 1 ||
          !params.items[0].is_atom)
        throw ParseError("lambda expects a single-parameter list", n.line,
                         n.col);
      if (n.items.size() != 3)
        throw ParseError("lambda expects exactly one body", n.line, n.col);
      return mk_lam(intern(params.items[0].atom), term_of_sexpr(n.items[2]));
    }
    if (h == "draw" || h == "prim") {
      const sexpr::Node& name = expect_item(n, 1, "identifier");
      if (!name.is_atom)
        throw ParseError("expected an identifier", name.line, name.col);
      Symbol id = intern(name.atom);
      std::vector<Value> args = values_of(n, 2);
      const Registry& reg = default_registry();
      if (h == "draw") {
        const DistSpec* d = reg.find_dist(id);
        if (d == nullptr)
          throw ParseError("unknown distribution '" + name.atom + "'",
                           name.line, name.col);
        if (args.size() != d->arity)
          throw ParseError("distribution '" + name.atom + "' expects " +
                               std::to_string(d->arity) + " arguments",
                           n.line, n.col);
        return mk_draw(id, std::move(args));
      }
      const PrimSpec* p = reg.find_prim(id);
      if (p == nullptr)
        throw ParseError("unknown primitive '" + name.atom + "'", name.line,
                         name.col);
      if (args.size() != p->arity)
        throw ParseError("primitive '" + name.atom + "' expects " +
                             std::to_string(p->arity) + " arguments",
                         n.line, n.col);
      return mk_prim(id, std::move(args));
    }
    if (h == "if") {
      if (n.items.size() != 4)
        throw ParseError("if expects 3 operands", n.line, n.col);
      return mk_if(value_of_sexpr(n.items[1]), term_of_sexpr(n.items[2]),
                   term_of_sexpr(n.items[3]));
    }
    if (h == "score") {
      if (n.items.size() != 2)
        throw ParseError("score expects 1 operand", n.line, n.col);
      return mk_score(value_of_sexpr(n.items[1]));
    }
  }
  // application; longer lists associate to the left
  if (n.items.size() < 2)
    throw ParseError("application expects at least 2 terms", n.line, n.col);
  TermPtr acc = term_of_sexpr(n.items[0]);
  for (std::size_t i = 1; i < n.items.size(); i++)
    acc = mk_app(std::move(acc), term_of_sexpr(n.items[i]));
  return acc;
}

}  // namespace

TermPtr parse_term(std::string_view src) {
  return term_of_sexpr(sexpr::read_one(src));
}

}  // namespace tracelam
