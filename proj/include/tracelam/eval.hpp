#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <variant>
#include <vector>

#include "tracelam/ast.hpp"
#include "tracelam/builtins.hpp"

namespace tracelam {

// The random choices a run consumes, in order.
using Trace = std::vector<double>;
Trace concat(const Trace& a, const Trace& b);

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Nonnegative multiplicative weight, carried in log space so long products
// of densities do not underflow.
class Weight {
 public:
  Weight() : log_(0.0) {}
  static Weight one() { return Weight(); }
  static Weight zero() { return from_log(kNegInf); }
  static Weight from_log(double lw) {
    Weight w;
    w.log_ = lw;
    return w;
  }
  static Weight from_linear(double v);
  double log() const { return log_; }
  double linear() const;
  bool is_zero() const { return log_ == kNegInf; }
  Weight& operator*=(const Weight& o) {
    log_ += o.log_;
    return *this;
  }
  friend Weight operator*(Weight a, const Weight& b) { return a *= b; }

 private:
  double log_;
};

// A small-step configuration (M, w, s).
struct MachineState {
  TermPtr term;
  Weight weight;
  Trace remaining;
};

enum class StepError {
  GeneralizedValue,  // nothing reduces
  NoDetRedex,        // redex is Draw or Score
  TraceExhausted,    // Draw redex with an empty remaining trace
};
using StepResult = std::variant<MachineState, StepError>;

// One deterministic reduction step; weight and trace unchanged.
StepResult det_step(const MachineState& state,
                    const Registry& reg = default_registry());

// One small-step reduction (deterministic, score, or random).
StepResult small_step(const MachineState& state,
                      const Registry& reg = default_registry());

enum class RunStatus { Completed, TraceMismatch, FuelExhausted };

struct RunOutcome {
  GenValue result = GenValue::fail();  // meaningful unless FuelExhausted
  Weight weight;
  RunStatus status = RunStatus::Completed;
  std::uint64_t steps = 0;
};

constexpr std::uint64_t kDefaultFuel = 1'000'000;

// Iterates small_step from (term, 1, trace). Completed means the machine
// reached a generalized value with the whole trace consumed.
RunOutcome run_small_step(const TermPtr& term, const Trace& trace,
                          std::uint64_t fuel = kDefaultFuel,
                          const Registry& reg = default_registry());

// Big-step evaluation with a trace cursor, run iteratively on an explicit
// continuation stack. Fuel is denominated in small-step rule applications so
// the two evaluators report identical statuses for identical inputs.
RunOutcome eval_big(const TermPtr& term, const Trace& trace,
                    std::uint64_t fuel = kDefaultFuel,
                    const Registry& reg = default_registry());

struct PevalResult {
  TermPtr term;  // a Fail node when the trace cannot be consumed exactly
  bool fuel_exhausted = false;
};

// Partially evaluates term, applying exactly as many reduction steps as
// needed to use up the entire trace; Fail if this cannot be done.
PevalResult peval(const TermPtr& term, std::span<const double> trace,
                  std::uint64_t fuel = kDefaultFuel,
                  const Registry& reg = default_registry());

// Density of termination and result of a run: (log P_M(s), O_M(s)).
struct TraceDensity {
  double log_weight = kNegInf;
  GenValue result = GenValue::fail();
};
TraceDensity trace_density(const TermPtr& term, std::span<const double> trace,
                           std::uint64_t fuel = kDefaultFuel,
                           const Registry& reg = default_registry());

// log P^V_M(s): the density restricted to runs ending in a value.
double log_weight_value(const TraceDensity& d);

// A full run over a trace with the log weight additionally split at the
// point where the split-th element is consumed: log_weight_tail collects
// exactly the factors applied after that consumption.
struct SplitRun {
  RunStatus status = RunStatus::Completed;
  GenValue result = GenValue::fail();
  double log_weight = 0.0;
  double log_weight_tail = 0.0;
  std::size_t consumed = 0;
  std::uint64_t steps = 0;
};
SplitRun run_split(const TermPtr& term, std::span<const double> trace,
                   std::size_t split, std::uint64_t fuel,
                   const Registry& reg = default_registry());

// Runs against a trace prefix, then switches to fresh forward draws once the
// prefix is exhausted. Never reports TraceMismatch. consumed counts prefix
// elements only; extension holds the fresh draws in order.
struct HybridRun {
  RunStatus status = RunStatus::Completed;
  GenValue result = GenValue::fail();
  double log_weight = 0.0;
  double log_weight_tail = 0.0;  // factors after the prefix is used up
  double log_score = 0.0;        // product of all score factors
  double log_score_tail = 0.0;   // scores after the prefix is used up
  double log_score_last = 0.0;   // scores after the final consumption
  std::size_t consumed = 0;
  Trace extension;
  std::uint64_t steps = 0;
};
HybridRun run_hybrid(const TermPtr& term, std::span<const double> prefix,
                     Rng& rng, std::uint64_t fuel = kDefaultFuel,
                     const Registry& reg = default_registry());

// Runs term drawing every random choice fresh from its distribution.
struct ForwardResult {
  Trace trace;
  RunOutcome outcome;
  double log_score = 0.0;
};
ForwardResult forward_sample(const TermPtr& term, Rng& rng,
                             std::uint64_t fuel = kDefaultFuel,
                             const Registry& reg = default_registry());

// Writes one JSON line per machine state: term, log weight, remaining trace.
void log_reduction_steps(const TermPtr& term, const Trace& trace,
                         std::ostream& os, std::uint64_t fuel = kDefaultFuel,
                         const Registry& reg = default_registry());

// Applies deterministic reduction steps until the next step would consume
// randomness, touch the weight, or terminate. The result runs identically to
// the input on every trace (pure steps change neither weight nor trace), so
// callers that evaluate one program many times can strip its prologue once.
TermPtr pre_reduce(const TermPtr& term, std::uint64_t fuel = kDefaultFuel,
                   const Registry& reg = default_registry());

}  // namespace tracelam
