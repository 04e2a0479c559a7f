#include "tracelam/termgen.hpp"

#include <array>

namespace tracelam {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

struct Gen {
  Rng& rng;
  std::vector<Symbol> env;
  int lam_counter = 0;

  double uniform() { return std::uniform_real_distribution<double>(0, 1)(rng); }
  int pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); }

  double const_palette() {
    static constexpr std::array<double, 9> palette = {0.0, 1.0,  0.5, 0.3, 2.0,
                                                      -1.0, 1.5, 0.25, 3.0};
    return palette[static_cast<std::size_t>(pick(palette.size()))];
  }

  Symbol fresh_var() { return intern("g" + std::to_string(lam_counter++)); }

  Value gen_value(int depth) {
    double r = uniform();
    if (!env.empty() && r < 0.35) return VarV{env[static_cast<std::size_t>(pick(static_cast<int>(env.size())))]};
    if (depth > 0 && r >= 0.85) {
      Symbol x = fresh_var();
      env.push_back(x);
      TermPtr body = gen_term(depth - 1);
      env.pop_back();
      return LamV{x, std::move(body)};
    }
    return ConstV{const_palette()};
  }

  // biased toward 0/1 so if-scrutinees are mostly well-formed
  Value gen_bool_value(int depth) {
    double r = uniform();
    if (r < 0.4) return ConstV{1.0};
    if (r < 0.8) return ConstV{0.0};
    return gen_value(depth);
  }

  Value gen_score_value(int depth) {
    double r = uniform();
    if (r < 0.35) return ConstV{0.5};
    if (r < 0.55) return ConstV{1.0};
    if (r < 0.7) return ConstV{0.25};
    if (r < 0.8) return ConstV{2.0};  // erroneous
    if (r < 0.88) return ConstV{0.0};  // erroneous
    return gen_value(depth);
  }

  TermPtr gen_term(int depth) {
    if (depth <= 0) return value_term(gen_value(0));
    switch (pick(16)) {
      case 0:
      case 1:
        return value_term(gen_value(depth));
      case 2:
      case 3:
      case 4: {  // application of a lambda to a value: a beta redex
        Symbol x = fresh_var();
        env.push_back(x);
        TermPtr body = gen_term(depth - 1);
        env.pop_back();
        Value arg = gen_value(depth - 1);
        return mk_app(mk_lam(x, std::move(body)), value_term(arg));
      }
      case 5:
      case 6:  // free-form application
        return mk_app(gen_term(depth - 1), gen_term(depth - 1));
      case 7:
      case 8: {
        if (uniform() < 0.6) return mk_draw(intern("rnd"), {});
        std::vector<Value> args;
        args.push_back(uniform() < 0.85 ? Value{ConstV{const_palette()}}
                                        : gen_value(depth - 1));
        args.push_back(uniform() < 0.85 ? Value{ConstV{1.0}}
                                        : gen_value(depth - 1));
        return mk_draw(intern("gaussian"), std::move(args));
      }
      case 9:
      case 10: {
        static const std::array<const char*, 8> prims = {"+", "-", "*", "<",
                                                         ">", "=", "exp", "sqr"};
        const char* name = prims[static_cast<std::size_t>(pick(prims.size()))];
        const PrimSpec& spec = default_registry().prim(intern(name));
        std::vector<Value> args;
        for (std::size_t i = 0; i < spec.arity; i++)
          args.push_back(uniform() < 0.9 ? Value{ConstV{const_palette()}}
                                         : gen_value(depth - 1));
        return mk_prim(spec.id, std::move(args));
      }
      case 11:
      case 12:
        return mk_if(gen_bool_value(depth - 1), gen_term(depth - 1),
                     gen_term(depth - 1));
      case 13:
        return mk_score(gen_score_value(depth - 1));
      case 14: {  // lambda value
        Symbol x = fresh_var();
        env.push_back(x);
        TermPtr body = gen_term(depth - 1);
        env.pop_back();
        return mk_lam(x, std::move(body));
      }
      default:
        return uniform() < 0.5 ? mk_fail() : value_term(gen_value(depth));
    }
  }
};

void count_draws(const Term& t, std::size_t& n);

void count_draws_value(const Value& v, std::size_t& n) {
  if (const LamV* l = std::get_if<LamV>(&v)) count_draws(*l->body, n);
}

void count_draws(const Term& t, std::size_t& n) {
  std::visit(overloaded{[&](const Value& v) { count_draws_value(v, n); },
                        [&](const AppT& a) {
                          count_draws(*a.fn, n);
                          count_draws(*a.arg, n);
                        },
                        [&](const DrawT& d) {
                          n++;
                          for (const Value& v : d.args) count_draws_value(v, n);
                        },
                        [&](const PrimT& p) {
                          for (const Value& v : p.args) count_draws_value(v, n);
                        },
                        [&](const IfT& i) {
                          count_draws_value(i.cond, n);
                          count_draws(*i.then_branch, n);
                          count_draws(*i.else_branch, n);
                        },
                        [&](const ScoreT& s) { count_draws_value(s.arg, n); },
                        [](const FailT&) {}},
             t.node);
}

}  // namespace

TermPtr gen_closed_term(Rng& rng, int max_depth) {
  Gen g{rng, {}, 0};
  return g.gen_term(max_depth);
}

std::size_t count_draw_sites(const Term& t) {
  std::size_t n = 0;
  count_draws(t, n);
  return n;
}

Trace gen_trace(const Term& t, Rng& rng) {
  std::size_t sites = count_draw_sites(t);
  std::uniform_int_distribution<int> len_jitter(-1, 2);
  int len = static_cast<int>(sites) + len_jitter(rng);
  if (len < 0) len = 0;
  Trace trace;
  trace.reserve(static_cast<std::size_t>(len));
  std::uniform_real_distribution<double> unit(0, 1);
  std::normal_distribution<double> wide(0.0, 1.5);
  for (int i = 0; i < len; i++) {
    double r = unit(rng);
    if (r < 0.55) {
      trace.push_back(unit(rng));
    } else if (r < 0.85) {
      trace.push_back(wide(rng));
    } else {
      static constexpr std::array<double, 4> off = {1.5, -0.25, 7.0, -3.0};
      trace.push_back(off[static_cast<std::size_t>(
          std::uniform_int_distribution<int>(0, 3)(rng))]);
    }
  }
  return trace;
}

}  // namespace tracelam
