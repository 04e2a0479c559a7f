#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>

#include "tracelam/eval.hpp"
#include "tracelam/errors.hpp"
#include "tracelam/termgen.hpp"
#include "helpers.hpp"

using namespace tracelam;
using namespace tracelam::testing;

namespace {

Symbol sym(const char* s) { return intern(s); }

TermPtr identity() { return mk_lam(sym("x"), mk_var(sym("x"))); }

bool outcomes_agree(const RunOutcome& a, const RunOutcome& b) {
  if (a.status != b.status) return false;
  if (!gen_value_equal(a.result, b.result)) return false;
  double la = a.weight.log();
  double lb = b.weight.log();
  if (la == lb) return true;
  return std::fabs(la - lb) <= 1e-12 * std::max(1.0, std::fabs(la));
}

}  // namespace

TEST_CASE("det_step performs beta reduction") {
  MachineState st{mk_app(identity(), mk_const(5.0)), Weight::one(), {0.3}};
  StepResult r = det_step(st);
  REQUIRE(std::holds_alternative<MachineState>(r));
  const MachineState& next = std::get<MachineState>(r);
  CHECK(term_equal(*next.term, *mk_const(5.0)));
  CHECK(next.weight.log() == 0.0);
  CHECK(next.remaining == Trace{0.3});
}

TEST_CASE("det_step reduces if under a context") {
  TermPtr t = mk_app(identity(),
                     mk_if(ConstV{1.0}, mk_const(7.0), mk_const(8.0)));
  StepResult r = det_step(MachineState{t, Weight::one(), {}});
  REQUIRE(std::holds_alternative<MachineState>(r));
  CHECK(term_equal(*std::get<MachineState>(r).term,
                   *mk_app(identity(), mk_const(7.0))));
}

TEST_CASE("det_step sends erroneous redexes to fail") {
  StepResult r = det_step(
      MachineState{mk_app(mk_const(3.0), mk_const(4.0)), Weight::one(), {}});
  REQUIRE(std::holds_alternative<MachineState>(r));
  CHECK(is_fail(*std::get<MachineState>(r).term));
}

TEST_CASE("det_step declines random redexes and values") {
  CHECK(std::get<StepError>(det_step(MachineState{
            mk_draw(sym("rnd"), {}), Weight::one(), {0.5}})) ==
        StepError::NoDetRedex);
  CHECK(std::get<StepError>(det_step(MachineState{
            mk_score(ConstV{0.5}), Weight::one(), {}})) ==
        StepError::NoDetRedex);
  CHECK(std::get<StepError>(det_step(MachineState{
            mk_const(1.0), Weight::one(), {}})) ==
        StepError::GeneralizedValue);
}

TEST_CASE("small_step consumes a trace element on draws") {
  StepResult r = small_step(
      MachineState{mk_draw(sym("rnd"), {}), Weight::one(), {0.7}});
  REQUIRE(std::holds_alternative<MachineState>(r));
  const MachineState& next = std::get<MachineState>(r);
  CHECK(term_equal(*next.term, *mk_const(0.7)));
  CHECK(next.weight.log() == 0.0);  // rnd density is 1
  CHECK(next.remaining.empty());
}

TEST_CASE("small_step multiplies score factors") {
  StepResult r = small_step(
      MachineState{mk_score(ConstV{0.5}), Weight::one(), {}});
  REQUIRE(std::holds_alternative<MachineState>(r));
  const MachineState& next = std::get<MachineState>(r);
  CHECK(term_equal(*next.term, *mk_const(1.0)));
  CHECK(next.weight.linear() == doctest::Approx(0.5));
  CHECK(next.remaining.empty());
}

TEST_CASE("small_step fails on zero-density draws") {
  StepResult r = small_step(
      MachineState{mk_draw(sym("rnd"), {}), Weight::one(), {1.5}});
  REQUIRE(std::holds_alternative<MachineState>(r));
  const MachineState& next = std::get<MachineState>(r);
  CHECK(is_fail(*next.term));
  CHECK(next.weight.is_zero());
  CHECK(next.remaining.empty());
}

TEST_CASE("small_step reports trace exhaustion") {
  CHECK(std::get<StepError>(small_step(MachineState{
            mk_draw(sym("rnd"), {}), Weight::one(), {}})) ==
        StepError::TraceExhausted);
}

TEST_CASE("geometric query runs per the worked example") {
  TermPtr geo = load("geometric.church");
  RunOutcome r = run_small_step(geo, {0.7, 0.8, 0.3});
  CHECK(r.status == RunStatus::Completed);
  CHECK(gen_value_equal(r.result, GenValue::of(ConstV{2.0})));
  CHECK(r.weight.log() == 0.0);  // weight exactly 1

  // single heads: n = 0, the hard constraint n > 1 fails with weight 1
  RunOutcome f = run_small_step(geo, {0.3});
  CHECK(f.status == RunStatus::Completed);
  CHECK(f.result.is_fail());
  CHECK(f.weight.log() == 0.0);
}

TEST_CASE("generalized values complete in zero steps") {
  RunOutcome r = run_small_step(mk_const(9.0), {});
  CHECK(r.status == RunStatus::Completed);
  CHECK(r.steps == 0);
  CHECK(r.weight.log() == 0.0);
  RunOutcome f = run_small_step(mk_fail(), {});
  CHECK(f.status == RunStatus::Completed);
  CHECK(f.result.is_fail());
}

TEST_CASE("leftover trace elements are a mismatch") {
  RunOutcome r = run_small_step(mk_const(9.0), {0.5});
  CHECK(r.status == RunStatus::TraceMismatch);
  RunOutcome b = eval_big(mk_const(9.0), {0.5});
  CHECK(b.status == RunStatus::TraceMismatch);
}

TEST_CASE("eval_big weights gaussian draws by their density") {
  TermPtr t = mk_draw(sym("gaussian"), {Value{ConstV{0.0}}, Value{ConstV{1.0}}});
  RunOutcome r = eval_big(t, {0.0});
  CHECK(r.status == RunStatus::Completed);
  CHECK(r.weight.linear() ==
        doctest::Approx(0.39894228040143268).epsilon(1e-14));
}

TEST_CASE("eval_big score yields true with the score as weight") {
  RunOutcome r = eval_big(mk_score(ConstV{0.3}), {});
  CHECK(r.status == RunStatus::Completed);
  CHECK(gen_value_equal(r.result, GenValue::of(ConstV{1.0})));
  CHECK(r.weight.linear() == doctest::Approx(0.3));
}

TEST_CASE("applying a constant fails without evaluating the argument") {
  // 3 N fails with weight 1 and no trace use, N unevaluated
  TermPtr t = mk_app(mk_const(3.0), mk_app(identity(), mk_const(1.0)));
  RunOutcome r = eval_big(t, {});
  CHECK(r.status == RunStatus::Completed);
  CHECK(r.result.is_fail());
  CHECK(r.weight.log() == 0.0);
}

TEST_CASE("fuel exhaustion is reported, not looped") {
  // omega = (\x. x x) (\x. x x)
  TermPtr dup = mk_lam(sym("x"), mk_app(mk_var(sym("x")), mk_var(sym("x"))));
  TermPtr omega = mk_app(dup, dup);
  RunOutcome big = eval_big(omega, {}, 500);
  RunOutcome small = run_small_step(omega, {}, 500);
  CHECK(big.status == RunStatus::FuelExhausted);
  CHECK(small.status == RunStatus::FuelExhausted);
  CHECK(big.steps == 500);
  CHECK(small.steps == 500);
}

TEST_CASE("theorem 1 smoke: the two evaluators agree on generated programs") {
  Rng rng(20240811);
  for (int i = 0; i < 800; i++) {
    TermPtr t = gen_closed_term(rng);
    Trace s = gen_trace(*t, rng);
    RunOutcome big = eval_big(t, s, 600);
    RunOutcome small = run_small_step(t, s, 600);
    bool ok = outcomes_agree(big, small);
    CHECK(ok);
    if (!ok) {
      MESSAGE("term: " << print_term(*t));
      break;
    }
  }
}

TEST_CASE("evaluation is deterministic bit for bit") {
  TermPtr geo = load("geometric.church");
  Trace s = {0.9, 0.6, 0.55, 0.2};
  RunOutcome a = eval_big(geo, s);
  RunOutcome b = eval_big(geo, s);
  CHECK(a.weight.log() == b.weight.log());
  CHECK(gen_value_equal(a.result, b.result));
  CHECK(a.steps == b.steps);
}

TEST_CASE("weights never increase along runs with bounded factors") {
  // geometric uses rnd (density 1) and hard constraints only
  TermPtr geo = load("geometric.church");
  MachineState st{geo, Weight::one(), {0.8, 0.7, 0.6, 0.1}};
  double last = st.weight.log();
  for (int i = 0; i < 100'000; i++) {
    if (as_gen_value(*st.term)) break;
    StepResult r = small_step(st);
    if (std::holds_alternative<StepError>(r)) break;
    st = std::move(std::get<MachineState>(r));
    CHECK(st.weight.log() <= last);
    CHECK(st.weight.log() <= 0.0);
    last = st.weight.log();
  }
}

TEST_CASE("peval of the empty trace is the term itself") {
  TermPtr geo = load("geometric.church");
  PevalResult r = peval(geo, {});
  CHECK(r.term == geo);
}

TEST_CASE("peval returns the continuation after a prefix") {
  TermPtr geo = load("geometric.church");
  Trace prefix = {0.7};
  PevalResult r = peval(geo, prefix);
  REQUIRE(!is_fail(*r.term));
  // continuing with the remaining flips matches the full run
  RunOutcome rest = eval_big(r.term, {0.8, 0.3});
  RunOutcome full = eval_big(geo, {0.7, 0.8, 0.3});
  CHECK(rest.status == RunStatus::Completed);
  CHECK(gen_value_equal(rest.result, full.result));
  CHECK(rest.weight.log() == full.weight.log());  // rnd factors are log 0
}

TEST_CASE("peval fails when the trace cannot be consumed") {
  Trace one = {0.5};
  CHECK(is_fail(*peval(mk_const(5.0), one).term));
  TermPtr geo = load("geometric.church");
  // 0.3 is heads: the run finishes after one element, 0.9 is never consumed
  Trace two = {0.3, 0.9};
  CHECK(is_fail(*peval(geo, two).term));
}

TEST_CASE("peval composes over trace concatenation") {
  Rng rng(31);
  int nontrivial = 0;
  for (int i = 0; i < 600; i++) {
    TermPtr t = gen_closed_term(rng);
    Trace s = gen_trace(*t, rng);
    Trace u = gen_trace(*t, rng);
    if (s.size() > 2) s.resize(2);
    if (u.size() > 2) u.resize(2);
    PevalResult lhs = peval(peval(t, s, 100'000).term, u, 100'000);
    PevalResult rhs = peval(t, concat(s, u), 100'000);
    CHECK(term_equal(*lhs.term, *rhs.term));
    if (!is_fail(*rhs.term)) nontrivial++;
  }
  CHECK(nontrivial > 20);
}

TEST_CASE("trace_density realizes the termination density") {
  TermPtr geo = load("geometric.church");
  // two tails then heads: in the valid set, weight 1, value 2
  TraceDensity d = trace_density(geo, std::vector<double>{0.6, 0.7, 0.2});
  CHECK(d.log_weight == 0.0);
  CHECK(gen_value_equal(d.result, GenValue::of(ConstV{2.0})));

  // outside the support of rnd
  TraceDensity z =
      trace_density(mk_draw(sym("rnd"), {}), std::vector<double>{2.0});
  CHECK(z.log_weight == kNegInf);
  CHECK(z.result.is_fail());
  CHECK(log_weight_value(z) == kNegInf);

  TraceDensity c = trace_density(mk_const(5.0), std::vector<double>{});
  CHECK(c.log_weight == 0.0);
  CHECK(gen_value_equal(c.result, GenValue::of(ConstV{5.0})));

  // fail result keeps its weight in P but not in P^V
  TraceDensity f = trace_density(geo, std::vector<double>{0.2});
  CHECK(f.log_weight == 0.0);
  CHECK(f.result.is_fail());
  CHECK(log_weight_value(f) == kNegInf);
}

TEST_CASE("run_split tail weight matches a fresh run of the continuation") {
  TermPtr geo = load("geometric.church");
  Trace full = {0.8, 0.9, 0.6, 0.3};
  for (std::size_t k = 0; k <= full.size(); k++) {
    SplitRun sr = run_split(geo, full, k, kDefaultFuel);
    REQUIRE(sr.status == RunStatus::Completed);
    // naive route: peval the prefix, then run the continuation on the tail
    Trace prefix(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(k));
    Trace tail(full.begin() + static_cast<std::ptrdiff_t>(k), full.end());
    PevalResult pe = peval(geo, prefix);
    REQUIRE(!is_fail(*pe.term));
    RunOutcome cont = eval_big(pe.term, tail);
    CHECK(cont.status == RunStatus::Completed);
    CHECK(sr.log_weight_tail == cont.weight.log());
    CHECK(sr.log_weight == eval_big(geo, full).weight.log());
  }
}

TEST_CASE("run_split tail matches on score-weighted programs") {
  // let x = gaussian(0,2) in (score(0.5); x)
  Symbol x = sym("sx");
  TermPtr t = let_in(
      x, mk_draw(sym("gaussian"), {Value{ConstV{0.0}}, Value{ConstV{2.0}}}),
      seq(mk_score(ConstV{0.5}), mk_var(x)));
  Trace tr = {0.4};
  SplitRun sr = run_split(t, tr, 1, kDefaultFuel);
  REQUIRE(sr.status == RunStatus::Completed);
  PevalResult pe = peval(t, tr);
  RunOutcome cont = eval_big(pe.term, {});
  CHECK(sr.log_weight_tail == cont.weight.log());
  CHECK(sr.log_weight_tail == doctest::Approx(std::log(0.5)));
  // the gaussian factor lands in the head part
  CHECK(sr.log_weight - sr.log_weight_tail ==
        doctest::Approx(gaussian_log_pdf(0.0, 2.0, 0.4)));
}

TEST_CASE("forward sampling of a value term is empty") {
  Rng rng(5);
  ForwardResult fr = forward_sample(mk_const(5.0), rng);
  CHECK(fr.trace.empty());
  CHECK(fr.outcome.status == RunStatus::Completed);
  CHECK(gen_value_equal(fr.outcome.result, GenValue::of(ConstV{5.0})));
  CHECK(fr.outcome.weight.log() == 0.0);
}

TEST_CASE("forward geometric traces have the tails-then-heads shape") {
  TermPtr geo = load("geometric.church");
  Rng rng(99);
  for (int i = 0; i < 200; i++) {
    ForwardResult fr = forward_sample(geo, rng);
    REQUIRE(fr.outcome.status == RunStatus::Completed);
    REQUIRE(fr.trace.size() >= 1);
    for (std::size_t j = 0; j + 1 < fr.trace.size(); j++)
      CHECK(fr.trace[j] >= 0.5);
    CHECK(fr.trace.back() < 0.5);
    std::size_t n = fr.trace.size() - 1;
    if (n > 1) {
      REQUIRE(!fr.outcome.result.is_fail());
      CHECK(std::get<ConstV>(*fr.outcome.result.val).v ==
            static_cast<double>(n));
      // the returned trace has positive density
      CHECK(trace_density(geo, fr.trace).log_weight > kNegInf);
    } else {
      CHECK(fr.outcome.result.is_fail());
    }
  }
}

TEST_CASE("forward sampling respects the law of the unconditioned model") {
  TermPtr geo = load("geometric-unconditioned.church");
  Rng rng(7);
  const int n = 20'000;
  std::map<double, int> hist;
  for (int i = 0; i < n; i++) {
    ForwardResult fr = forward_sample(geo, rng);
    REQUIRE(!fr.outcome.result.is_fail());
    hist[std::get<ConstV>(*fr.outcome.result.val).v]++;
  }
  for (int k = 0; k <= 2; k++) {
    double expected = std::pow(0.5, k + 1);
    double got = static_cast<double>(hist[k]) / n;
    CHECK(got == doctest::Approx(expected).epsilon(0.08));
  }
}

TEST_CASE("suffix stability: completed runs ignore appended suffixes") {
  TermPtr geo = load("geometric.church");
  Trace s = {0.7, 0.8, 0.3};
  RunOutcome done = eval_big(geo, s);
  REQUIRE(done.status == RunStatus::Completed);
  Trace longer = concat(s, {0.9, 0.1});
  RunOutcome more = eval_big(geo, longer);
  CHECK(more.status == RunStatus::TraceMismatch);
  CHECK(gen_value_equal(more.result, done.result));
  CHECK(more.weight.log() == done.weight.log());
}

TEST_CASE("reduction log emits one json line per state") {
  std::stringstream ss;
  TermPtr t = mk_app(identity(), mk_draw(sym("rnd"), {}));
  log_reduction_steps(t, {0.25}, ss);
  std::string line;
  int lines = 0;
  while (std::getline(ss, line)) {
    lines++;
    CHECK(line.find("\"step\":") != std::string::npos);
    CHECK(line.find("\"term\":") != std::string::npos);
    CHECK(line.find("\"log_weight\":") != std::string::npos);
    CHECK(line.find("\"remaining\":") != std::string::npos);
  }
  CHECK(lines == 3);  // initial state, after the draw, after beta
}
