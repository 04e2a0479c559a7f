// tracelam: batch runner for .church (and core-format) models.
//
//   tracelam run model.church --method mh --samples 100000 --seed 42
//   tracelam check
//   tracelam steps model.church --trace 0.7,0.8,0.3

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "tracelam/church.hpp"
#include "tracelam/errors.hpp"
#include "tracelam/eval.hpp"
#include "tracelam/infer.hpp"
#include "tracelam/stats.hpp"
#include "tracelam/termgen.hpp"

namespace {

using namespace tracelam;

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string csv_value(const Value& v) {
  if (const ConstV* c = std::get_if<ConstV>(&v)) return fmt_double(c->v);
  return "\"" + print_value(v) + "\"";
}

std::string json_value(const Value& v) {
  if (const ConstV* c = std::get_if<ConstV>(&v)) {
    if (std::isfinite(c->v)) return fmt_double(c->v);
    return "\"" + fmt_double(c->v) + "\"";
  }
  std::string out = "\"";
  for (char c : print_value(v)) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  out += "\"";
  return out;
}

struct Row {
  Value value;
  double log_weight;
  bool accepted;
  int chain;
};

struct Writer {
  std::ostream& os;
  bool jsonl;
  bool tag_chains;
  std::uint64_t index = 0;

  void header() {
    if (jsonl) return;
    os << "index,value,log_weight,accepted";
    if (tag_chains) os << ",chain";
    os << "\n";
  }
  void row(const Row& r) {
    if (jsonl) {
      os << "{\"index\":" << index << ",\"value\":" << json_value(r.value)
         << ",\"log_weight\":" << fmt_double(r.log_weight)
         << ",\"accepted\":" << (r.accepted ? "true" : "false");
      if (tag_chains) os << ",\"chain\":" << r.chain;
      os << "}\n";
    } else {
      os << index << "," << csv_value(r.value) << "," << fmt_double(r.log_weight)
         << "," << (r.accepted ? 1 : 0);
      if (tag_chains) os << "," << r.chain;
      os << "\n";
    }
    index++;
  }
};

std::uint64_t env_seed_fallback() {
  const char* env = std::getenv("TRACELAM_SEED");
  if (env == nullptr) return 0;
  return std::strtoull(env, nullptr, 10);
}

int run_command(const std::string& model_path, const std::string& method,
                MHConfig mh, std::uint64_t max_retries, int chains,
                bool emit_core, const std::string& format,
                const std::string& output_path,
                const std::string& summary_path) {
  TermPtr term = load_model(model_path);

  if (emit_core) {
    std::cout << print_term(*term) << "\n";
    return 0;
  }

  std::ofstream file_out;
  if (!output_path.empty()) {
    file_out.open(output_path);
    if (!file_out) {
      std::cerr << "error: cannot open output file '" << output_path << "'\n";
      return 1;
    }
  }
  std::ostream& os = output_path.empty() ? std::cout : file_out;
  Writer writer{os, format == "jsonl", chains > 1};
  writer.header();

  std::vector<double> numeric_samples;
  auto record = [&](const Row& r) {
    writer.row(r);
    if (const ConstV* c = std::get_if<ConstV>(&r.value))
      numeric_samples.push_back(c->v);
  };

  std::string effective_method = method;
  if (method == "mh") {
    // probe for deterministic models; those are routed to rejection
    try {
      std::vector<std::vector<MhSample>> per_chain(
          static_cast<std::size_t>(chains));
      for (int c = 0; c < chains; c++) {
        MHConfig cfg = mh;
        cfg.seed = mh.seed + static_cast<std::uint64_t>(c);
        MhDiagnostics diag;
        per_chain[static_cast<std::size_t>(c)] =
            collect_chain(term, cfg, &diag);
        std::cerr << "chain " << c << ": acceptance rate "
                  << diag.acceptance_rate() << ", sink proposals "
                  << diag.sink_proposals << ", fuel exhausted "
                  << diag.fuel_exhausted << "\n";
      }
      for (std::uint64_t i = 0; i < mh.samples; i++)
        for (int c = 0; c < chains; c++) {
          const MhSample& s = per_chain[static_cast<std::size_t>(c)][i];
          record(Row{s.value, s.log_weight, s.accepted, c});
        }
    } catch (const DeterministicModelError& e) {
      std::cerr << "warning: " << e.what() << "; falling back to rejection\n";
      effective_method = "rejection";
    }
  }
  if (effective_method == "rejection") {
    RejectionConfig cfg;
    cfg.samples = mh.samples;
    cfg.seed = mh.seed;
    cfg.fuel = mh.fuel;
    cfg.max_attempts = max_retries;
    rejection_sample(term, cfg, [&](const RejectionSample& s) {
      record(Row{s.value, s.log_weight, true, 0});
    });
  } else if (effective_method == "forward") {
    Rng rng(mh.seed);
    for (std::uint64_t i = 0; i < mh.samples; i++) {
      ForwardResult fr = forward_sample(term, rng, mh.fuel);
      if (fr.outcome.status != RunStatus::Completed) continue;
      Value v = fr.outcome.result.is_fail() ? Value{VarV{intern("fail")}}
                                            : *fr.outcome.result.val;
      record(Row{v, fr.outcome.weight.log(), true, 0});
    }
  }

  if (!summary_path.empty()) {
    EmpiricalDist d = EmpiricalDist::discrete(numeric_samples);
    std::ofstream sj(summary_path);
    if (!sj) {
      std::cerr << "error: cannot open summary file '" << summary_path << "'\n";
      return 1;
    }
    sj << summary_json(d) << "\n";
  }
  return 0;
}

// differential and law checks over generated terms, runnable from the CLI
int check_command(std::uint64_t cases, std::uint64_t seed) {
  Rng rng(seed);
  std::uint64_t fuel = 2000;
  std::uint64_t mismatches = 0;
  std::uint64_t roundtrip_bad = 0;
  std::uint64_t peval_bad = 0;

  for (std::uint64_t i = 0; i < cases; i++) {
    TermPtr t = gen_closed_term(rng);
    Trace s = gen_trace(*t, rng);
    RunOutcome big = eval_big(t, s, fuel);
    RunOutcome small = run_small_step(t, s, fuel);
    bool same = big.status == small.status &&
                gen_value_equal(big.result, small.result);
    double lw1 = big.weight.log();
    double lw2 = small.weight.log();
    if (!(lw1 == lw2 ||
          std::fabs(lw1 - lw2) <= 1e-12 * std::max(1.0, std::fabs(lw1))))
      same = false;
    if (!same) mismatches++;

    TermPtr reparsed = parse_term(print_term(*t));
    if (!term_equal(*t, *reparsed)) roundtrip_bad++;

    Trace s2 = gen_trace(*t, rng);
    PevalResult lhs_inner = peval(t, s, fuel);
    PevalResult lhs = peval(lhs_inner.term, s2, fuel);
    PevalResult rhs = peval(t, concat(s, s2), fuel);
    if (!term_equal(*lhs.term, *rhs.term)) peval_bad++;
  }

  std::printf("semantics equivalence: %s (%llu cases, %llu mismatches)\n",
              mismatches == 0 ? "PASS" : "FAIL",
              static_cast<unsigned long long>(cases),
              static_cast<unsigned long long>(mismatches));
  std::printf("print/parse round-trip: %s (%llu bad)\n",
              roundtrip_bad == 0 ? "PASS" : "FAIL",
              static_cast<unsigned long long>(roundtrip_bad));
  std::printf("peval composition law: %s (%llu bad)\n",
              peval_bad == 0 ? "PASS" : "FAIL",
              static_cast<unsigned long long>(peval_bad));
  return (mismatches == 0 && roundtrip_bad == 0 && peval_bad == 0) ? 0 : 1;
}

int steps_command(const std::string& model_path, const std::string& trace_arg,
                  std::uint64_t fuel) {
  TermPtr term = load_model(model_path);
  Trace trace;
  std::stringstream ss(trace_arg);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    trace.push_back(std::strtod(item.c_str(), nullptr));
  }
  log_reduction_steps(term, trace, std::cout, fuel);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trace-based probabilistic lambda-calculus interpreter"};
  app.require_subcommand(1);

  // run
  std::string model_path;
  std::string method = "mh";
  std::string format = "csv";
  std::string output_path;
  std::string summary_path;
  MHConfig mh;
  mh.seed = env_seed_fallback();
  std::uint64_t max_retries = 0;
  int chains = 1;
  bool emit_core = false;

  CLI::App* run = app.add_subcommand("run", "sample from a model");
  run->add_option("model", model_path, "model file (.church or core format)")
      ->required();
  run->add_option("--method", method, "mh | rejection | forward")
      ->check(CLI::IsMember({"mh", "rejection", "forward"}));
  CLI::Option* sigma_opt =
      run->add_option("--sigma", mh.sigma, "proposal std dev (mh only)");
  run->add_option("--samples", mh.samples, "number of samples");
  run->add_option("--burn-in", mh.burn_in, "burn-in iterations (mh only)");
  run->add_option("--thin", mh.thin, "thinning stride (mh only)");
  run->add_option("--seed", mh.seed, "rng seed (TRACELAM_SEED as fallback)");
  run->add_option("--fuel", mh.fuel, "step budget per program run");
  run->add_option("--max-retries", max_retries,
                  "attempt bound for rejection / init");
  run->add_option("--chains", chains, "independent chains (mh only)")
      ->check(CLI::PositiveNumber);
  run->add_option("--format", format, "csv | jsonl")
      ->check(CLI::IsMember({"csv", "jsonl"}));
  run->add_option("--output,-o", output_path, "output file (default stdout)");
  run->add_option("--summary", summary_path, "write a JSON summary here");
  run->add_flag("--emit-core", emit_core, "print the core term and exit");

  // check
  std::uint64_t check_cases = 1000;
  std::uint64_t check_seed = 20240801;
  CLI::App* check = app.add_subcommand("check", "run the semantics law suite");
  check->add_option("--cases", check_cases, "generated cases");
  check->add_option("--seed", check_seed, "generator seed");

  // steps
  std::string steps_model;
  std::string steps_trace;
  std::uint64_t steps_fuel = 10'000;
  CLI::App* steps =
      app.add_subcommand("steps", "log a reduction sequence as JSON lines");
  steps->add_option("model", steps_model, "model file")->required();
  steps->add_option("--trace", steps_trace, "comma-separated trace");
  steps->add_option("--fuel", steps_fuel, "step budget");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      if (max_retries != 0) mh.init_retries = max_retries;
      if (*sigma_opt && method != "mh") {
        std::cerr << "error: --sigma applies to --method mh only\n";
        return 2;
      }
      return run_command(model_path, method, mh, max_retries, chains,
                         emit_core, format, output_path, summary_path);
    }
    if (check->parsed()) return check_command(check_cases, check_seed);
    if (steps->parsed()) return steps_command(steps_model, steps_trace,
                                              steps_fuel);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const TranslateError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const InitFailureError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const RetryExhaustedError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
