#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "tracelam/eval.hpp"

namespace tracelam {

struct MHConfig {
  double sigma = 1.0;  // proposal standard deviation
  std::uint64_t samples = 1000;
  std::uint64_t burn_in = 0;
  std::uint64_t thin = 1;
  std::uint64_t seed = 0;
  std::uint64_t fuel = kDefaultFuel;
  std::uint64_t init_retries = 10'000;
  void validate() const;  // sigma > 0, thin >= 1
};

// Current chain position with its cached value and weight.
struct ChainState {
  Trace trace;
  double log_weight = kNegInf;  // log P^V at trace; re-derivable
  Value value = ConstV{0.0};
  Rng rng;
};

struct Proposal {
  Trace trace;
  double log_fwd = kNegInf;     // log q(s, t)
  double log_rev = kNegInf;     // log q(t, s)
  double log_weight = kNegInf;  // log P^V(t)
  GenValue result = GenValue::fail();
  bool sink = false;            // proposed the empty trace
  bool fuel_exhausted = false;  // some run hit fuel; density treated as 0
  bool extended = false;        // perturbed prefix was extended by fresh draws
  // Density accumulated during the proposal run itself (extension case);
  // must agree with log_fwd, which is recomputed by proposal_log_density.
  double log_fwd_direct = kNegInf;
};

// Draws an initial state by running the program forward until it yields a
// value with positive weight. Throws InitFailureError after init_retries
// failures in a row.
ChainState init_state(const TermPtr& term, const MHConfig& cfg,
                      const Registry& reg = default_registry());

// Gaussian perturbation of the current trace, rerun, and extension or
// truncation to the largest exactly-consumed prefix; failures become the
// empty-trace sink or a zero-weight proposal, which the acceptance step
// always rejects.
Proposal propose(const TermPtr& term, const Trace& current, double sigma,
                 Rng& rng, std::uint64_t fuel,
                 const Registry& reg = default_registry());

// log q(from, to) for to != []: Gaussian densities over the common prefix
// times the weight of the partially evaluated program on the tail of to,
// restricted to value results.
double proposal_log_density(const TermPtr& term, std::span<const double> from,
                            std::span<const double> to, double sigma,
                            std::uint64_t fuel,
                            const Registry& reg = default_registry());

// Hastings acceptance probability with the degenerate cases pinned:
// 0 if the proposal is the sink, fuel-starved, or has zero weight;
// 1 if the current weight times the forward density is zero.
double acceptance(const ChainState& state, const Proposal& p);

struct MhSample {
  Value value;
  Trace trace;
  double log_weight = 0.0;  // log P^V at the emitted state
  bool accepted = false;
};

struct MhDiagnostics {
  std::uint64_t iterations = 0;
  std::uint64_t accepted = 0;
  std::uint64_t sink_proposals = 0;
  std::uint64_t fuel_exhausted = 0;
  double acceptance_rate() const {
    return iterations == 0 ? 0.0
                           : static_cast<double>(accepted) /
                                 static_cast<double>(iterations);
  }
};

using MhEmit = std::function<void(const MhSample&)>;
using MhStepHook = std::function<void(const Proposal&, double alpha, bool accepted)>;

// Runs burn_in + samples*thin iterations, emitting every thin-th state after
// burn-in. Throws DeterministicModelError when the initial trace is empty
// (such models have no Markov chain to run; use rejection or forward
// sampling instead).
void run_chain(const TermPtr& term, const MHConfig& cfg, const MhEmit& emit,
               MhDiagnostics* diag = nullptr, const MhStepHook& hook = {},
               const Registry& reg = default_registry());

std::vector<MhSample> collect_chain(const TermPtr& term, const MHConfig& cfg,
                                    MhDiagnostics* diag = nullptr,
                                    const Registry& reg = default_registry());

struct RejectionConfig {
  std::uint64_t samples = 1000;
  std::uint64_t seed = 0;
  std::uint64_t fuel = kDefaultFuel;
  std::uint64_t max_attempts = 0;  // 0: derived from samples
};

struct RejectionSample {
  Value value;
  Trace trace;
  double log_weight = 0.0;
};

using RejectionEmit = std::function<void(const RejectionSample&)>;

// Reruns the program from scratch until it yields a value; models with
// score factors thin each completed value by the accumulated score product,
// which leaves the same conditional law on values. Throws
// RetryExhaustedError once the attempt bound is hit.
void rejection_sample(const TermPtr& term, const RejectionConfig& cfg,
                      const RejectionEmit& emit,
                      const Registry& reg = default_registry());

std::vector<RejectionSample> collect_rejection(
    const TermPtr& term, const RejectionConfig& cfg,
    const Registry& reg = default_registry());

}  // namespace tracelam
