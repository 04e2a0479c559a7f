#include "tracelam/infer.hpp"

#include <cmath>

#include "tracelam/errors.hpp"

namespace tracelam {

void MHConfig::validate() const {
  if (!(sigma > 0.0)) throw Error("sigma must be positive");
  if (thin == 0) throw Error("thin must be at least 1");
}

ChainState init_state(const TermPtr& term, const MHConfig& cfg,
                      const Registry& reg) {
  Rng rng(cfg.seed);
  for (std::uint64_t attempt = 0; attempt < cfg.init_retries; attempt++) {
    ForwardResult fr = forward_sample(term, rng, cfg.fuel, reg);
    if (fr.outcome.status != RunStatus::Completed ||
        fr.outcome.result.is_fail() || fr.outcome.weight.is_zero())
      continue;
    if (fr.log_score < 0.0) {
      // The proposal kernel charges score factors, so chains started from a
      // low-score trace take ~1/score iterations to make their first move.
      // Thinning the initial draw by its score product starts the chain in
      // the kernel's own stationary region.
      double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      if (!(u < std::exp(fr.log_score))) continue;
    }
    ChainState st;
    st.trace = std::move(fr.trace);
    st.log_weight = fr.outcome.weight.log();
    st.value = *fr.outcome.result.val;
    st.rng = std::move(rng);
    return st;
  }
  throw InitFailureError(
      "no positive-weight value trace found in " +
      std::to_string(cfg.init_retries) +
      " forward runs; the model may have near-zero success probability");
}

namespace {

struct DensityEval {
  double log_q = kNegInf;
  double log_pv = kNegInf;
  GenValue result = GenValue::fail();
  bool fuel_exhausted = false;
};

// q(from, to) together with P^V(to), from one run over `to`. The tail factor
// of q is the weight the residual program peval(term, to[0..k)) accumulates
// on to[k..], which equals the factors the full run applies after its k-th
// consumption.
DensityEval density_from_run(std::span<const double> from,
                             std::span<const double> to, double sigma,
                             const SplitRun& run) {
  DensityEval out;
  std::size_t k = std::min(from.size(), to.size());
  double lg = 0.0;
  for (std::size_t i = 0; i < k; i++)
    lg += gaussian_log_pdf(from[i], sigma * sigma, to[i]);
  out.fuel_exhausted = run.status == RunStatus::FuelExhausted;
  if (run.status == RunStatus::Completed && !run.result.is_fail()) {
    out.result = run.result;
    out.log_pv = run.log_weight;
    out.log_q = lg + run.log_weight_tail;
  }
  return out;
}

DensityEval eval_density(const TermPtr& term, std::span<const double> from,
                         std::span<const double> to, double sigma,
                         std::uint64_t fuel, const Registry& reg) {
  std::size_t k = std::min(from.size(), to.size());
  SplitRun run = run_split(term, to, k, fuel, reg);
  return density_from_run(from, to, sigma, run);
}

}  // namespace

double proposal_log_density(const TermPtr& term, std::span<const double> from,
                            std::span<const double> to, double sigma,
                            std::uint64_t fuel, const Registry& reg) {
  if (to.empty()) throw Error("proposal density against the empty trace");
  DensityEval d = eval_density(term, from, to, sigma, fuel, reg);
  return d.fuel_exhausted ? kNegInf : d.log_q;
}

Proposal propose(const TermPtr& term, const Trace& current, double sigma,
                 Rng& rng, std::uint64_t fuel, const Registry& reg) {
  Proposal p;
  Trace pert(current.size());
  for (std::size_t i = 0; i < current.size(); i++)
    pert[i] = std::normal_distribution<double>(current[i], sigma)(rng);

  HybridRun run = run_hybrid(term, pert, rng, fuel, reg);
  if (run.status == RunStatus::FuelExhausted) {
    p.sink = true;
    p.fuel_exhausted = true;
    return p;
  }
  bool truncated = run.consumed < pert.size() && run.extension.empty();
  if (truncated) {
    // the machine stopped early: keep the exactly-consumed prefix when it
    // led to a value, otherwise propose the sink
    if (run.result.is_fail() || run.consumed == 0) {
      p.sink = true;
      return p;
    }
    p.trace.assign(pert.begin(),
                   pert.begin() + static_cast<std::ptrdiff_t>(run.consumed));
  } else {
    p.trace = concat(pert, run.extension);
    p.extended = !run.extension.empty();
    if (p.trace.empty()) {
      p.sink = true;
      return p;
    }
    if (run.result.is_fail()) {
      // full trace but a failing run: a zero-weight proposal
      p.result = GenValue::fail();
      return p;
    }
  }

  // The proposal density q charges the weight of the run past the common
  // prefix, so score factors there are part of the kernel itself: the
  // mechanism realizes them by thinning, with failures landing on the sink.
  // This is what makes the normalization mass q(s, []) operational.
  double thin_log = truncated ? run.log_score_last : run.log_score_tail;
  if (thin_log < 0.0) {
    double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    if (!(u < std::exp(thin_log))) {
      p.trace.clear();
      p.sink = true;
      return p;
    }
  }

  DensityEval fwd;
  if (p.trace.size() == current.size() && !p.extended &&
      run.consumed == p.trace.size()) {
    // same-length proposal: the proposal run already is the forward-density
    // run (same trace, same split point), so reuse it verbatim
    SplitRun done;
    done.status = run.status;
    done.result = run.result;
    done.log_weight = run.log_weight;
    done.log_weight_tail = run.log_weight_tail;
    done.consumed = run.consumed;
    fwd = density_from_run(current, p.trace, sigma, done);
  } else {
    fwd = eval_density(term, current, p.trace, sigma, fuel, reg);
  }
  p.log_fwd = fwd.log_q;
  p.log_weight = fwd.log_pv;
  p.result = fwd.result;
  p.fuel_exhausted = p.fuel_exhausted || fwd.fuel_exhausted;

  DensityEval rev = eval_density(term, p.trace, current, sigma, fuel, reg);
  p.log_rev = rev.log_q;
  p.fuel_exhausted = p.fuel_exhausted || rev.fuel_exhausted;

  if (p.extended) {
    // density as accumulated by the proposal run itself: Gaussian prefix
    // times the weight of the fresh forward phase
    double lg = 0.0;
    for (std::size_t i = 0; i < current.size(); i++)
      lg += gaussian_log_pdf(current[i], sigma * sigma, pert[i]);
    p.log_fwd_direct = lg + run.log_weight_tail;
  }
  return p;
}

double acceptance(const ChainState& state, const Proposal& p) {
  if (p.sink || p.fuel_exhausted) return 0.0;
  if (p.log_weight == kNegInf) return 0.0;
  if (state.log_weight == kNegInf || p.log_fwd == kNegInf) return 1.0;
  double la = (p.log_weight + p.log_rev) - (state.log_weight + p.log_fwd);
  return la >= 0.0 ? 1.0 : std::exp(la);
}

void run_chain(const TermPtr& term, const MHConfig& cfg, const MhEmit& emit,
               MhDiagnostics* diag, const MhStepHook& hook,
               const Registry& reg) {
  cfg.validate();
  // the pure prologue (define bindings, fixpoint plumbing) runs identically
  // on every trace; strip it once instead of once per proposal
  TermPtr hot = pre_reduce(term, std::min<std::uint64_t>(cfg.fuel, 10'000), reg);
  ChainState st = init_state(hot, cfg, reg);
  if (st.trace.empty())
    throw DeterministicModelError(
        "the model consumed no randomness; trace MH does not apply");

  std::uint64_t total = cfg.burn_in + cfg.samples * cfg.thin;
  for (std::uint64_t it = 0; it < total; it++) {
    Proposal p = propose(hot, st.trace, cfg.sigma, st.rng, cfg.fuel, reg);
    double alpha = acceptance(st, p);
    double u = std::uniform_real_distribution<double>(0.0, 1.0)(st.rng);
    bool accepted = u < alpha;
    if (diag != nullptr) {
      diag->iterations++;
      if (accepted) diag->accepted++;
      if (p.sink) diag->sink_proposals++;
      if (p.fuel_exhausted) diag->fuel_exhausted++;
    }
    if (hook) hook(p, alpha, accepted);
    if (accepted) {
      st.trace = std::move(p.trace);
      st.log_weight = p.log_weight;
      st.value = *p.result.val;
    }
    if (st.trace.empty() || !(st.log_weight > kNegInf))
      throw Error("chain invariant violated: empty or zero-weight state");
    if (it >= cfg.burn_in && (it - cfg.burn_in) % cfg.thin == 0)
      emit(MhSample{st.value, st.trace, st.log_weight, accepted});
  }
}

std::vector<MhSample> collect_chain(const TermPtr& term, const MHConfig& cfg,
                                    MhDiagnostics* diag, const Registry& reg) {
  std::vector<MhSample> out;
  out.reserve(cfg.samples);
  run_chain(term, cfg, [&out](const MhSample& s) { out.push_back(s); }, diag,
            {}, reg);
  return out;
}

void rejection_sample(const TermPtr& term, const RejectionConfig& cfg,
                      const RejectionEmit& emit, const Registry& reg) {
  Rng rng(cfg.seed);
  TermPtr hot = pre_reduce(term, std::min<std::uint64_t>(cfg.fuel, 10'000), reg);
  std::uint64_t max_attempts =
      cfg.max_attempts != 0 ? cfg.max_attempts : 10'000 + 2'000 * cfg.samples;
  std::uint64_t emitted = 0;
  std::uint64_t attempts = 0;
  while (emitted < cfg.samples) {
    if (attempts >= max_attempts)
      throw RetryExhaustedError(
          "rejection sampling exceeded " + std::to_string(max_attempts) +
          " attempts after " + std::to_string(emitted) + " accepted samples");
    attempts++;
    ForwardResult fr = forward_sample(hot, rng, cfg.fuel, reg);
    if (fr.outcome.status != RunStatus::Completed ||
        fr.outcome.result.is_fail())
      continue;
    if (fr.log_score < 0.0) {
      // a soft constraint: keep the value with probability equal to the
      // accumulated score product
      double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      if (!(u < std::exp(fr.log_score))) continue;
    }
    emit(RejectionSample{*fr.outcome.result.val, std::move(fr.trace),
                         fr.outcome.weight.log()});
    emitted++;
  }
}

std::vector<RejectionSample> collect_rejection(const TermPtr& term,
                                               const RejectionConfig& cfg,
                                               const Registry& reg) {
  std::vector<RejectionSample> out;
  out.reserve(cfg.samples);
  rejection_sample(
      term, cfg, [&out](const RejectionSample& s) { out.push_back(s); }, reg);
  return out;
}

}  // namespace tracelam
