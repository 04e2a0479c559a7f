// End-to-end checks of the tracelam binary through a shell.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "helpers.hpp"

namespace {

std::string tmp_dir() {
  static std::string dir = [] {
    std::string d = "/tmp/tracelam_cli_test";
    if (std::system(("mkdir -p " + d).c_str()) != 0) std::abort();
    return d;
  }();
  return dir;
}

int run_cmd(const std::string& args, const std::string& out_file) {
  std::string cmd = std::string(TRACELAM_BIN) + " " + args + " > " + out_file +
                    " 2> " + out_file + ".err";
  int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string geometric() {
  return tracelam::testing::model_path("geometric.church");
}

}  // namespace

TEST_CASE("run emits the documented csv schema") {
  std::string out = tmp_dir() + "/mh.csv";
  int rc = run_cmd("run " + geometric() +
                       " --method mh --samples 200 --burn-in 50 --sigma 1.0"
                       " --seed 42",
                   out);
  CHECK(rc == 0);
  std::string csv = slurp(out);
  CHECK(csv.substr(0, 32) == "index,value,log_weight,accepted\n");
  int lines = 0;
  for (char c : csv)
    if (c == '\n') lines++;
  CHECK(lines == 201);  // header + samples
}

TEST_CASE("identical flags and seed give byte-identical output") {
  std::string a = tmp_dir() + "/det_a.csv";
  std::string b = tmp_dir() + "/det_b.csv";
  std::string flags = "run " + geometric() +
                      " --method mh --samples 300 --burn-in 20 --seed 7";
  CHECK(run_cmd(flags, a) == 0);
  CHECK(run_cmd(flags, b) == 0);
  CHECK(slurp(a) == slurp(b));
  CHECK(!slurp(a).empty());
}

TEST_CASE("jsonl format mirrors the csv schema") {
  std::string out = tmp_dir() + "/rej.jsonl";
  int rc = run_cmd("run " + geometric() +
                       " --method rejection --samples 50 --seed 3"
                       " --format jsonl",
                   out);
  CHECK(rc == 0);
  std::string first = slurp(out).substr(0, slurp(out).find('\n'));
  CHECK(first.find("\"index\":0") != std::string::npos);
  CHECK(first.find("\"value\":") != std::string::npos);
  CHECK(first.find("\"log_weight\":") != std::string::npos);
  CHECK(first.find("\"accepted\":") != std::string::npos);
}

TEST_CASE("malformed models exit with code 2") {
  std::string bad = tmp_dir() + "/bad.church";
  std::ofstream(bad) << "(query";
  CHECK(run_cmd("run " + bad, tmp_dir() + "/bad.out") == 2);
}

TEST_CASE("hopeless rejection exits with code 3") {
  std::string rare = tmp_dir() + "/rare.church";
  std::ofstream(rare)
      << "(query (define x (rnd)) x (< x 0.0000000001))";
  CHECK(run_cmd("run " + rare +
                    " --method rejection --samples 10 --max-retries 100"
                    " --seed 1",
                tmp_dir() + "/rare.out") == 3);
}

TEST_CASE("emit-core round-trips through the core parser") {
  std::string core_out = tmp_dir() + "/geo.core";
  CHECK(run_cmd("run " + geometric() + " --emit-core", core_out) == 0);
  std::string core_text = slurp(core_out);
  CHECK(!core_text.empty());

  // rerunning from the emitted core term gives identical samples
  std::string a = tmp_dir() + "/core_a.csv";
  std::string b = tmp_dir() + "/core_b.csv";
  CHECK(run_cmd("run " + geometric() +
                    " --method rejection --samples 100 --seed 11",
                a) == 0);
  CHECK(run_cmd("run " + core_out +
                    " --method rejection --samples 100 --seed 11",
                b) == 0);
  CHECK(slurp(a) == slurp(b));
}

TEST_CASE("deterministic models fall back to rejection with a warning") {
  std::string det = tmp_dir() + "/det.church";
  std::ofstream(det) << "(query (define x 4) x (> x 1))";
  std::string out = tmp_dir() + "/det.csv";
  CHECK(run_cmd("run " + det + " --method mh --samples 5 --seed 1", out) == 0);
  std::string csv = slurp(out);
  CHECK(csv.find("\n0,4,") != std::string::npos);
  CHECK(slurp(out + ".err").find("falling back to rejection") !=
        std::string::npos);
}

TEST_CASE("sigma is rejected outside the mh method") {
  CHECK(run_cmd("run " + geometric() +
                    " --method rejection --samples 5 --sigma 0.5",
                tmp_dir() + "/sigma.out") == 2);
}

TEST_CASE("env seed fallback applies when --seed is absent") {
  std::string a = tmp_dir() + "/env_a.csv";
  std::string b = tmp_dir() + "/env_b.csv";
  std::string cmd = std::string("TRACELAM_SEED=99 ") + TRACELAM_BIN + " run " +
                    geometric() + " --method rejection --samples 50 > ";
  CHECK(std::system((cmd + a + " 2>/dev/null").c_str()) == 0);
  CHECK(std::system((cmd + b + " 2>/dev/null").c_str()) == 0);
  std::string with_flag = tmp_dir() + "/env_c.csv";
  CHECK(run_cmd("run " + geometric() +
                    " --method rejection --samples 50 --seed 99",
                with_flag) == 0);
  CHECK(slurp(a) == slurp(b));
  CHECK(slurp(a) == slurp(with_flag));
}

TEST_CASE("chains interleave tagged rows") {
  std::string out = tmp_dir() + "/chains.csv";
  CHECK(run_cmd("run " + geometric() +
                    " --method mh --samples 10 --chains 2 --seed 5",
                out) == 0);
  std::string csv = slurp(out);
  CHECK(csv.substr(0, 38) == "index,value,log_weight,accepted,chain\n");
  // rows alternate chain 0 and chain 1 per sample index
  std::size_t first_row = csv.find('\n') + 1;
  std::string row0 = csv.substr(first_row, csv.find('\n', first_row) - first_row);
  CHECK(row0.substr(row0.size() - 2) == ",0");
}

TEST_CASE("summary json is written on request") {
  std::string out = tmp_dir() + "/sum.csv";
  std::string sum = tmp_dir() + "/sum.json";
  CHECK(run_cmd("run " + geometric() +
                    " --method rejection --samples 200 --seed 2 --summary " +
                    sum,
                out) == 0);
  std::string j = slurp(sum);
  CHECK(j.find("\"mean\":") != std::string::npos);
  CHECK(j.find("\"histogram\":") != std::string::npos);
}

TEST_CASE("steps subcommand logs a reduction sequence") {
  std::string out = tmp_dir() + "/steps.jsonl";
  CHECK(run_cmd("steps " + geometric() + " --trace 0.7,0.8,0.3", out) == 0);
  std::string log = slurp(out);
  CHECK(log.find("\"step\":0") != std::string::npos);
  CHECK(log.find("\"remaining\":[0.7,0.8,0.3]") != std::string::npos);
}

TEST_CASE("check subcommand runs the law suite") {
  std::string out = tmp_dir() + "/check.txt";
  CHECK(run_cmd("check --cases 200 --seed 1", out) == 0);
  std::string text = slurp(out);
  CHECK(text.find("semantics equivalence: PASS") != std::string::npos);
  CHECK(text.find("peval composition law: PASS") != std::string::npos);
}
