#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "mrs/phylo.hpp"

namespace {

const std::string kCli = MRS_CLI_PATH;
const std::string kData = MRS_DATA_DIR;

int run(const std::string& args) {
  const std::string cmd = kCli + " " + args;
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

// Drop the wall-time line so reports from different runs can be compared.
std::string without_wall_time(const std::string& report) {
  std::stringstream in(report), out;
  std::string line;
  while (std::getline(in, line))
    if (line.find("wall_time") == std::string::npos) out << line << "\n";
  return out.str();
}

}  // namespace

TEST_CASE("patterns subcommand counts an alignment") {
  spit("/tmp/mrs_test.fasta", ">A\naaaaaaaaaa\n>B\naaaaaaaaaa\n>C\naaaaaaaaaa\n");
  REQUIRE(run("patterns --fasta /tmp/mrs_test.fasta --out /tmp/mrs_test_pat.tsv") == 0);
  CHECK(slurp("/tmp/mrs_test_pat.tsv") == "#taxa:A,B,C\naaa\t10\n");

  spit("/tmp/mrs_test2.fasta", ">A\naacc\n>B\naagg\n>C\naatt\n");
  REQUIRE(run("patterns --fasta /tmp/mrs_test2.fasta --out /tmp/mrs_test_pat2.tsv") == 0);
  auto d = mrs::phylo::read_patterns_file("/tmp/mrs_test_pat2.tsv");
  CHECK(d.patterns.size() == 2);
  CHECK(d.total_sites() == 4);
}

TEST_CASE("patterns subcommand rejects bad alignments") {
  spit("/tmp/mrs_bad.fasta", ">A\naaa\n>B\naa\n>C\naaa\n");
  CHECK(run("patterns --fasta /tmp/mrs_bad.fasta --out /tmp/mrs_bad.tsv 2>/dev/null") == 1);
  spit("/tmp/mrs_bad2.fasta", ">A\nana\n>B\naaa\n>C\naaa\n");
  CHECK(run("patterns --fasta /tmp/mrs_bad2.fasta --out /tmp/mrs_bad2.tsv 2>/dev/null") == 1);
}

TEST_CASE("sample runs are byte-identical under a fixed seed") {
  const std::string base = "sample --tree unrooted-triplet --data " + kData +
                           "/toy_triplet.tsv --samples 10 --seed 42 --boxes 500";
  REQUIRE(run(base + " --out /tmp/mrs_a.csv --report /tmp/mrs_a.json") == 0);
  REQUIRE(run(base + " --out /tmp/mrs_b.csv --report /tmp/mrs_b.json") == 0);
  CHECK(slurp("/tmp/mrs_a.csv") == slurp("/tmp/mrs_b.csv"));
  CHECK(without_wall_time(slurp("/tmp/mrs_a.json")) ==
        without_wall_time(slurp("/tmp/mrs_b.json")));

  // header shape: topology plus one column per branch plus trials
  std::ifstream csv("/tmp/mrs_a.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == "topology,theta1,theta2,theta3,trials");
  int rows = 0;
  std::string line;
  while (std::getline(csv, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 10);
}

TEST_CASE("sample exit codes") {
  CHECK(run("sample --tree bogus --data " + kData + "/toy_triplet.tsv 2>/dev/null") == 1);
  CHECK(run("sample --tree unrooted-triplet --data /nonexistent.tsv 2>/dev/null") == 1);
  // tiny trials budget: exhaustion is exit code 3
  CHECK(run("sample --tree unrooted-triplet --data " + kData +
            "/toy_triplet.tsv --samples 5 --seed 1 --boxes 8 --trials-max 1 "
            "--out /tmp/mrs_ex.csv --report /tmp/mrs_ex.json 2>/dev/null") == 3);
  // usage error from the parser
  CHECK(run("sample --no-such-flag 2>/dev/null") != 0);
}

TEST_CASE("quantiles subcommand") {
  spit("/tmp/mrs_const.csv",
       "topology,theta1,trials\nt,2.5,1\nt,2.5,3\nt,2.5,2\nt,2.5,9\n");
  REQUIRE(run("quantiles --in /tmp/mrs_const.csv --q 0.05,0.5,0.95 > /tmp/mrs_q.json") == 0);
  auto q = slurp("/tmp/mrs_q.json");
  CHECK(q.find("2.5") != std::string::npos);

  // uniform synthetic samples: quantiles near their levels
  std::ostringstream u;
  u << "topology,theta1,trials\n";
  std::uint64_t state = 88172645463325252ull;
  for (int i = 0; i < 20000; ++i) {
    state ^= state << 13;
    state ^= state >> 7;
    state ^= state << 17;
    u << "t," << (static_cast<double>(state >> 11) * 0x1.0p-53) << ",1\n";
  }
  spit("/tmp/mrs_unif.csv", u.str());
  REQUIRE(run("quantiles --in /tmp/mrs_unif.csv --q 0.5 > /tmp/mrs_q2.json") == 0);
  auto q2 = slurp("/tmp/mrs_q2.json");
  const auto pos = q2.find("\"0.5\": ");
  REQUIRE(pos != std::string::npos);
  const double median = std::strtod(q2.c_str() + pos + 7, nullptr);
  CHECK(std::abs(median - 0.5) < 0.02);

  // divergence-ratio transform on clocked samples
  spit("/tmp/mrs_clocked.csv",
       "topology,theta1,theta2,trials\nclocked-triplet,0.1,0.3,1\nclocked-triplet,0.1,0.3,1\n");
  REQUIRE(run("quantiles --in /tmp/mrs_clocked.csv --transform divergence-ratio --q 0.5 "
              "> /tmp/mrs_q3.json") == 0);
  auto q3 = slurp("/tmp/mrs_q3.json");
  const auto pos3 = q3.find("\"0.5\": ");
  REQUIRE(pos3 != std::string::npos);
  CHECK(std::abs(std::strtod(q3.c_str() + pos3 + 7, nullptr) - 0.25) < 1e-12);

  CHECK(run("quantiles --in /nonexistent.csv 2>/dev/null") == 1);
}

TEST_CASE("demo subcommand emits the bound table") {
  REQUIRE(run("demo --budgets 1,8,64 > /tmp/mrs_demo.txt") == 0);
  auto txt = slurp("/tmp/mrs_demo.txt");
  CHECK(txt.find("accept_lower_bound") != std::string::npos);
  // three budget rows beyond the header
  int lines = 0;
  for (char c : txt) lines += c == '\n' ? 1 : 0;
  CHECK(lines == 4);
  CHECK(run("demo --target nope 2>/dev/null") == 1);
}
