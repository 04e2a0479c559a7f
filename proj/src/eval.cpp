#include "tracelam/eval.hpp"

#include <cassert>
#include <cmath>
#include <ostream>

#include "tracelam/errors.hpp"

namespace tracelam {

Trace concat(const Trace& a, const Trace& b) {
  Trace out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

Weight Weight::from_linear(double v) {
  if (!(v >= 0.0))
    throw Error("weight must be nonnegative");
  return from_log(v == 0.0 ? kNegInf : std::log(v));
}

double Weight::linear() const { return log_ == kNegInf ? 0.0 : std::exp(log_); }

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::vector<double> const_args(const std::vector<Value>& args) {
  std::vector<double> out;
  out.reserve(args.size());
  for (const Value& v : args) out.push_back(std::get<ConstV>(v).v);
  return out;
}

// fixed-size scratch for builtin arities; falls back for exotic registries
struct ArgBuf {
  double buf[8];
  std::vector<double> overflow;
  std::span<const double> fill(const std::vector<Value>& args) {
    if (args.size() <= 8) {
      for (std::size_t i = 0; i < args.size(); i++)
        buf[i] = std::get<ConstV>(args[i]).v;
      return {buf, args.size()};
    }
    overflow = const_args(args);
    return overflow;
  }
};

bool any_lam(const std::vector<Value>& args) {
  for (const Value& v : args)
    if (std::holds_alternative<LamV>(v)) return true;
  return false;
}

[[noreturn]] void open_term() {
  throw OpenTermError("free variable reached in evaluation position");
}

// ---------------------------------------------------------------------------
// Reference small-step path: decompose, contract one redex, plug back.
// ---------------------------------------------------------------------------

enum class RedexKind { Beta, Prim, IfTrue, IfFalse, Fail, Erroneous, Draw, Score };

RedexKind classify_redex(const Term& r) {
  if (is_erroneous(r)) return RedexKind::Erroneous;
  return std::visit(
      overloaded{[](const Value&) -> RedexKind { open_term(); },
                 [](const AppT&) { return RedexKind::Beta; },
                 [](const DrawT&) { return RedexKind::Draw; },
                 [](const PrimT&) { return RedexKind::Prim; },
                 [](const IfT& i) {
                   return std::get<ConstV>(i.cond).v == 1.0 ? RedexKind::IfTrue
                                                            : RedexKind::IfFalse;
                 },
                 [](const ScoreT&) { return RedexKind::Score; },
                 [](const FailT&) { return RedexKind::Fail; }},
      r.node);
}

// Beta, if and erroneous contractions; Prim is handled by the callers since
// it needs the registry.
TermPtr contract_det(const Term& r, RedexKind kind) {
  switch (kind) {
    case RedexKind::Beta: {
      const AppT& a = std::get<AppT>(r.node);
      const LamV& lam = std::get<LamV>(*as_value(*a.fn));
      return subst_closed(lam.body, lam.param, *as_value(*a.arg));
    }
    case RedexKind::IfTrue:
      return std::get<IfT>(r.node).then_branch;
    case RedexKind::IfFalse:
      return std::get<IfT>(r.node).else_branch;
    case RedexKind::Erroneous:
      return mk_fail();
    default:
      assert(false);
      return mk_fail();
  }
}

}  // namespace

StepResult det_step(const MachineState& state, const Registry& reg) {
  DecomposeResult d = decompose(state.term);
  if (std::holds_alternative<GenValue>(d)) return StepError::GeneralizedValue;
  const Decomposed& dec = std::get<Decomposed>(d);
  RedexKind kind = classify_redex(*dec.redex);
  switch (kind) {
    case RedexKind::Draw:
    case RedexKind::Score:
      return StepError::NoDetRedex;
    case RedexKind::Fail:
      // E[fail] -> fail with E proper (guaranteed by decompose)
      return MachineState{mk_fail(), state.weight, state.remaining};
    case RedexKind::Prim: {
      const PrimT& p = std::get<PrimT>(dec.redex->node);
      std::vector<double> args = const_args(p.args);
      TermPtr res = mk_const(reg.prim(p.prim).interp(args));
      return MachineState{plug(dec.ctx, res), state.weight, state.remaining};
    }
    default:
      return MachineState{plug(dec.ctx, contract_det(*dec.redex, kind)),
                          state.weight, state.remaining};
  }
}

StepResult small_step(const MachineState& state, const Registry& reg) {
  DecomposeResult d = decompose(state.term);
  if (std::holds_alternative<GenValue>(d)) return StepError::GeneralizedValue;
  const Decomposed& dec = std::get<Decomposed>(d);
  RedexKind kind = classify_redex(*dec.redex);
  switch (kind) {
    case RedexKind::Score: {
      const ScoreT& s = std::get<ScoreT>(dec.redex->node);
      double c = std::get<ConstV>(s.arg).v;  // in (0,1], else erroneous
      return MachineState{plug(dec.ctx, mk_const(1.0)),
                          state.weight * Weight::from_linear(c),
                          state.remaining};
    }
    case RedexKind::Draw: {
      if (state.remaining.empty()) return StepError::TraceExhausted;
      const DrawT& dr = std::get<DrawT>(dec.redex->node);
      std::vector<double> params = const_args(dr.args);
      double c = state.remaining.front();
      Trace rest(state.remaining.begin() + 1, state.remaining.end());
      double lp = reg.dist(dr.dist).log_pdf(params, c);
      if (lp > kNegInf) {
        return MachineState{plug(dec.ctx, mk_const(c)),
                            state.weight * Weight::from_log(lp),
                            std::move(rest)};
      }
      return MachineState{plug(dec.ctx, mk_fail()), Weight::zero(),
                          std::move(rest)};
    }
    case RedexKind::Fail:
      return MachineState{mk_fail(), state.weight, state.remaining};
    case RedexKind::Prim: {
      const PrimT& p = std::get<PrimT>(dec.redex->node);
      std::vector<double> args = const_args(p.args);
      TermPtr res = mk_const(reg.prim(p.prim).interp(args));
      return MachineState{plug(dec.ctx, res), state.weight, state.remaining};
    }
    default:
      return MachineState{plug(dec.ctx, contract_det(*dec.redex, kind)),
                          state.weight, state.remaining};
  }
}

RunOutcome run_small_step(const TermPtr& term, const Trace& trace,
                          std::uint64_t fuel, const Registry& reg) {
  MachineState st{term, Weight::one(), trace};
  RunOutcome out;
  for (;;) {
    if (auto g = as_gen_value(*st.term)) {
      out.result = *g;
      out.weight = st.weight;
      out.status =
          st.remaining.empty() ? RunStatus::Completed : RunStatus::TraceMismatch;
      return out;
    }
    if (out.steps >= fuel) {
      out.weight = st.weight;
      out.status = RunStatus::FuelExhausted;
      return out;
    }
    StepResult r = small_step(st, reg);
    if (std::holds_alternative<StepError>(r)) {
      // only TraceExhausted is reachable here
      out.weight = st.weight;
      out.status = RunStatus::TraceMismatch;
      return out;
    }
    st = std::move(std::get<MachineState>(r));
    out.steps++;
  }
}

// ---------------------------------------------------------------------------
// Machine path: a focused evaluator with an explicit continuation stack.
// One Machine::step() application corresponds to exactly one small-step rule,
// so fuel means the same thing on both evaluation paths.
// ---------------------------------------------------------------------------

namespace {

struct Frame {
  bool fn_side;  // true: [.] arg   false: fn [.]
  TermPtr arg;
  LamV fn;
};

struct Machine {
  const Registry& reg;
  TermPtr control;
  std::vector<Frame> stack;

  double logw = 0.0;
  double logw_tail = 0.0;
  double log_score = 0.0;
  double log_score_tail = 0.0;  // scores after the split-th consumption
  double log_score_last = 0.0;  // scores since the most recent consumption
  std::uint64_t steps = 0;

  std::span<const double> trace;
  std::size_t pos = 0;       // prefix elements consumed
  std::size_t split = 0;     // consumptions after which factors count as tail
  Rng* rng = nullptr;        // when set, draw fresh once the prefix runs out
  Trace extension;

  Machine(const Registry& r, TermPtr term, std::span<const double> tr,
          std::size_t split_at, Rng* forward)
      : reg(r), control(std::move(term)), trace(tr), split(split_at),
        rng(forward) {}

  bool terminal() const {
    return stack.empty() && (is_value(*control) || is_fail(*control));
  }

  std::size_t consumed_total() const { return pos + extension.size(); }

  // tail holds the factors applied strictly after the split-th consumption:
  // a draw of element k (1-based) belongs to the tail iff k > split, a score
  // belongs to the tail iff at least split elements were consumed before it
  void add_factor(double lf, bool tail) {
    logw += lf;
    if (tail) logw_tail += lf;
  }

  void set_zero_weight(bool tail) {
    logw = kNegInf;
    if (tail) logw_tail = kNegInf;
  }

  enum class Outcome { Stepped, Blocked };

  // Applies exactly one reduction rule, doing any refocusing for free.
  Outcome step() {
    for (;;) {
      const Term& t = *control;
      if (const Value* v = as_value(t)) {
        assert(!stack.empty());
        Frame& f = stack.back();
        if (f.fn_side) {
          if (std::holds_alternative<ConstV>(*v)) {
            // erroneous redex c M
            stack.pop_back();
            control = mk_fail();
            steps++;
            return Outcome::Stepped;
          }
          if (std::holds_alternative<VarV>(*v)) open_term();
          const LamV lam = std::get<LamV>(*v);
          TermPtr arg = f.arg;
          if (const Value* av = as_value(*arg)) {
            stack.pop_back();
            control = subst_closed(lam.body, lam.param, *av);
            steps++;
            return Outcome::Stepped;
          }
          // switch focus to the argument
          f.fn_side = false;
          f.fn = lam;
          f.arg = nullptr;
          control = std::move(arg);
          continue;
        }
        // argument evaluated: beta
        const LamV lam = f.fn;
        stack.pop_back();
        control = subst_closed(lam.body, lam.param, *v);
        steps++;
        return Outcome::Stepped;
      }
      if (const AppT* a = std::get_if<AppT>(&t.node)) {
        stack.push_back(Frame{true, a->arg, {}});
        control = a->fn;
        continue;
      }
      if (is_fail(t)) {
        // E[fail] -> fail, E proper
        assert(!stack.empty());
        stack.clear();
        steps++;
        return Outcome::Stepped;
      }
      if (const DrawT* d = std::get_if<DrawT>(&t.node)) {
        if (any_lam(d->args)) {
          control = mk_fail();
          steps++;
          return Outcome::Stepped;
        }
        ArgBuf scratch;
        std::span<const double> params = scratch.fill(d->args);
        const DistSpec& spec = reg.dist(d->dist);
        double c;
        bool fresh = false;
        if (pos < trace.size()) {
          c = trace[pos];
        } else if (rng != nullptr) {
          fresh = true;
          try {
            c = spec.sample(params, *rng);
          } catch (const InvalidParamsError&) {
            c = 0.0;  // density below is 0, so the run fails here
          }
        } else {
          return Outcome::Blocked;
        }
        double lp = spec.log_pdf(params, c);
        bool tail = consumed_total() >= split;
        if (fresh)
          extension.push_back(c);
        else
          pos++;
        log_score_last = 0.0;
        if (lp > kNegInf) {
          add_factor(lp, tail);
          control = mk_const(c);
        } else {
          set_zero_weight(tail);
          control = mk_fail();
        }
        steps++;
        return Outcome::Stepped;
      }
      if (const PrimT* p = std::get_if<PrimT>(&t.node)) {
        if (any_lam(p->args)) {
          control = mk_fail();
          steps++;
          return Outcome::Stepped;
        }
        ArgBuf scratch;
        control = mk_const(reg.prim(p->prim).interp(scratch.fill(p->args)));
        steps++;
        return Outcome::Stepped;
      }
      if (const IfT* i = std::get_if<IfT>(&t.node)) {
        const ConstV* c = std::get_if<ConstV>(&i->cond);
        if (c != nullptr && c->v == 1.0) {
          control = i->then_branch;
        } else if (c != nullptr && c->v == 0.0) {
          control = i->else_branch;
        } else {
          control = mk_fail();  // erroneous scrutinee
        }
        steps++;
        return Outcome::Stepped;
      }
      const ScoreT& s = std::get<ScoreT>(t.node);
      const ConstV* c = std::get_if<ConstV>(&s.arg);
      if (c != nullptr && c->v > 0.0 && c->v <= 1.0) {
        double lc = std::log(c->v);
        bool tail = consumed_total() >= split;
        add_factor(lc, tail);
        log_score += lc;
        if (tail) log_score_tail += lc;
        log_score_last += lc;
        control = mk_const(1.0);
      } else {
        control = mk_fail();  // erroneous score argument
      }
      steps++;
      return Outcome::Stepped;
    }
  }

  GenValue result() const {
    auto g = as_gen_value(*control);
    assert(g.has_value());
    return *g;
  }

  TermPtr reconstitute() const {
    TermPtr t = control;
    for (auto it = stack.rbegin(); it != stack.rend(); ++it) {
      if (it->fn_side)
        t = mk_app(t, it->arg);
      else
        t = mk_app(value_term(Value{it->fn}), t);
    }
    return t;
  }
};

enum class DriveEnd { Terminal, Blocked, Fuel };

DriveEnd drive(Machine& m, std::uint64_t fuel) {
  for (;;) {
    if (m.terminal()) return DriveEnd::Terminal;
    if (m.steps >= fuel) return DriveEnd::Fuel;
    if (m.step() == Machine::Outcome::Blocked) return DriveEnd::Blocked;
  }
}

}  // namespace

RunOutcome eval_big(const TermPtr& term, const Trace& trace, std::uint64_t fuel,
                    const Registry& reg) {
  Machine m(reg, term, trace, 0, nullptr);
  DriveEnd end = drive(m, fuel);
  RunOutcome out;
  out.weight = Weight::from_log(m.logw);
  out.steps = m.steps;
  switch (end) {
    case DriveEnd::Terminal:
      out.result = m.result();
      out.status = m.pos == trace.size() ? RunStatus::Completed
                                         : RunStatus::TraceMismatch;
      break;
    case DriveEnd::Blocked:
      out.status = RunStatus::TraceMismatch;
      break;
    case DriveEnd::Fuel:
      out.status = RunStatus::FuelExhausted;
      break;
  }
  return out;
}

PevalResult peval(const TermPtr& term, std::span<const double> trace,
                  std::uint64_t fuel, const Registry& reg) {
  if (trace.empty()) return PevalResult{term};
  Machine m(reg, term, trace, 0, nullptr);
  for (;;) {
    if (m.terminal()) return PevalResult{mk_fail()};
    if (m.steps >= fuel) return PevalResult{mk_fail(), true};
    std::size_t before = m.pos;
    Machine::Outcome o = m.step();
    assert(o != Machine::Outcome::Blocked);
    (void)o;
    if (m.pos == trace.size() && before < trace.size())
      return PevalResult{m.reconstitute()};
  }
}

TraceDensity trace_density(const TermPtr& term, std::span<const double> trace,
                           std::uint64_t fuel, const Registry& reg) {
  Machine m(reg, term, trace, 0, nullptr);
  DriveEnd end = drive(m, fuel);
  if (end == DriveEnd::Terminal && m.pos == trace.size())
    return TraceDensity{m.logw, m.result()};
  return TraceDensity{kNegInf, GenValue::fail()};
}

double log_weight_value(const TraceDensity& d) {
  return d.result.is_fail() ? kNegInf : d.log_weight;
}

SplitRun run_split(const TermPtr& term, std::span<const double> trace,
                   std::size_t split, std::uint64_t fuel, const Registry& reg) {
  Machine m(reg, term, trace, split, nullptr);
  DriveEnd end = drive(m, fuel);
  SplitRun out;
  out.log_weight = m.logw;
  out.log_weight_tail = m.logw_tail;
  out.consumed = m.pos;
  out.steps = m.steps;
  switch (end) {
    case DriveEnd::Terminal:
      out.result = m.result();
      out.status = m.pos == trace.size() ? RunStatus::Completed
                                         : RunStatus::TraceMismatch;
      break;
    case DriveEnd::Blocked:
      out.status = RunStatus::TraceMismatch;
      break;
    case DriveEnd::Fuel:
      out.status = RunStatus::FuelExhausted;
      break;
  }
  return out;
}

HybridRun run_hybrid(const TermPtr& term, std::span<const double> prefix,
                     Rng& rng, std::uint64_t fuel, const Registry& reg) {
  Machine m(reg, term, prefix, prefix.size(), &rng);
  DriveEnd end = drive(m, fuel);
  assert(end != DriveEnd::Blocked);
  HybridRun out;
  out.log_weight = m.logw;
  out.log_weight_tail = m.logw_tail;
  out.log_score = m.log_score;
  out.log_score_tail = m.log_score_tail;
  out.log_score_last = m.log_score_last;
  out.consumed = m.pos;
  out.extension = std::move(m.extension);
  out.steps = m.steps;
  if (end == DriveEnd::Terminal) {
    out.result = m.result();
    out.status = RunStatus::Completed;
  } else {
    out.status = RunStatus::FuelExhausted;
  }
  return out;
}

ForwardResult forward_sample(const TermPtr& term, Rng& rng, std::uint64_t fuel,
                             const Registry& reg) {
  HybridRun run = run_hybrid(term, {}, rng, fuel, reg);
  ForwardResult out;
  out.trace = std::move(run.extension);
  out.log_score = run.log_score;
  out.outcome.result = run.result;
  out.outcome.weight = Weight::from_log(run.log_weight);
  out.outcome.status = run.status;
  out.outcome.steps = run.steps;
  return out;
}

TermPtr pre_reduce(const TermPtr& term, std::uint64_t fuel,
                   const Registry& reg) {
  MachineState st{term, Weight::one(), {}};
  for (std::uint64_t i = 0; i < fuel; i++) {
    StepResult r = det_step(st, reg);
    if (std::holds_alternative<StepError>(r)) break;
    st = std::move(std::get<MachineState>(r));
  }
  return st.term;
}

void log_reduction_steps(const TermPtr& term, const Trace& trace,
                         std::ostream& os, std::uint64_t fuel,
                         const Registry& reg) {
  auto emit = [&os](std::uint64_t step, const MachineState& st) {
    os << "{\"step\":" << step << ",\"term\":\"";
    for (char c : print_term(*st.term)) {
      if (c == '"' || c == '\\') os << '\\';
      os << c;
    }
    os << "\",\"log_weight\":" << st.weight.log() << ",\"remaining\":[";
    for (std::size_t i = 0; i < st.remaining.size(); i++) {
      if (i > 0) os << ",";
      os << st.remaining[i];
    }
    os << "]}\n";
  };
  MachineState st{term, Weight::one(), trace};
  std::uint64_t step = 0;
  emit(step, st);
  while (step < fuel) {
    if (as_gen_value(*st.term)) return;
    StepResult r = small_step(st, reg);
    if (std::holds_alternative<StepError>(r)) return;
    st = std::move(std::get<MachineState>(r));
    emit(++step, st);
  }
}

}  // namespace tracelam
