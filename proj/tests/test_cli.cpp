#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "musprune/cli.hpp"
#include "oracles.hpp"

using namespace musprune;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::initializer_list<std::string> args) {
  std::vector<std::string> store{"musprune"};
  store.insert(store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : store) argv.push_back(s.c_str());
  std::ostringstream out, err;
  int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("musprune_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    write_dimacs_file(dir_ / "f1.cnf", oracle::f1());
    write_dimacs_file(dir_ / "sat.cnf", CnfFormula(2, {{1, 2}, {-1}}));
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, UsageErrors) {
  EXPECT_NE(run({}).code, 0);
  EXPECT_NE(run({"frobnicate"}).code, 0);
  EXPECT_NE(run({"prune"}).code, 0);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST_F(CliTest, EnumerateF1PrintsTwoMuses) {
  auto r = run({"enumerate", "--in", path("f1.cnf"), "--budget", "5s"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(r.out);
  std::string line;
  std::vector<std::string> muses;
  while (std::getline(lines, line)) {
    if (line.rfind("c ", 0) != 0) muses.push_back(line);
  }
  std::sort(muses.begin(), muses.end());
  EXPECT_EQ(muses, (std::vector<std::string>{"1 2 0", "2 3 4 0"}));
  EXPECT_NE(r.out.find("c muses 2 exhausted 1"), std::string::npos);
}

TEST_F(CliTest, PruneSatInputFails) {
  auto r = run({"prune", "--in", path("sat.cnf"), "--method", "var_freq"});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("input satisfiable"), std::string::npos);
}

TEST_F(CliTest, PruneWritesDimacsAndOutcome) {
  auto r = run({"prune", "--in", path("f1.cnf"), "--method", "var_freq", "--out", path("p.cnf"),
                "--outcome", path("o.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_dimacs_file(path("p.cnf")).clauses(), (std::vector<Clause>{{1}, {-1}}));
  auto j = nlohmann::json::parse(slurp(path("o.json")));
  EXPECT_EQ(j["method"], "var_freq");
  EXPECT_EQ(j["index_map"], nlohmann::json({0, 1}));
  EXPECT_TRUE(j.contains("wall_time_s"));
  EXPECT_NE(run({"prune", "--in", path("f1.cnf"), "--method", "model"}).code, 0);
  EXPECT_NE(run({"prune", "--in", path("missing.cnf"), "--method", "var_freq"}).code, 0);
}

TEST_F(CliTest, GenerateTrainPruneRoundTrip) {
  auto g = run({"generate", "--out", path("corpus"), "--count", "6", "--min-vars", "8", "--max-vars",
                "10", "--seed", "4"});
  ASSERT_EQ(g.code, 0) << g.err;
  EXPECT_TRUE(fs::exists(path("corpus/manifest.jsonl")));
  auto t = run({"train", "--data", path("corpus"), "--eval", path("corpus"), "--out", path("m.ckpt"),
                "--history", path("h.csv"), "--batch-size", "3", "--max-formulas", "6",
                "--eval-every", "1", "--layers", "2", "--hidden", "8", "--feature-dim", "4",
                "--mlp-hidden", "8"});
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_EQ(load_checkpoint(path("m.ckpt")).config.hidden_dim, 8);
  EXPECT_NE(slurp(path("h.csv")).find("step,"), std::string::npos);
  auto p = run({"prune", "--in", path("corpus/00000.cnf"), "--method", "model", "--checkpoint",
                path("m.ckpt"), "--omit-timings"});
  ASSERT_EQ(p.code, 0) << p.err;
  EXPECT_EQ(p.err.find("wall_time_s"), std::string::npos);
  SatEngine engine;
  EXPECT_FALSE(engine.is_satisfiable(parse_dimacs(p.out)));
  auto sm = run({"generate", "--variant", "stat_matched", "--target", path("corpus"), "--out",
                 path("sm"), "--count", "3", "--min-vars", "8", "--max-vars", "10"});
  ASSERT_EQ(sm.code, 0) << sm.err;
  EXPECT_EQ(read_corpus(path("sm")).size(), 3u);
}

TEST_F(CliTest, BenchTwiceIsIdentical) {
  std::vector<std::string> reports;
  for (const char* sub : {"a", "b"}) {
    auto r = run({"bench", "--problems", path("f1.cnf"), "--pruner", "none", "--pruner", "var_freq",
                  "--budget", "1s", "--budget", "2s", "--repetitions", "2", "--seed", "3",
                  "--omit-timings", "--out", path(sub)});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("| f1.cnf | marco | var_freq |"), std::string::npos) << r.out;
    std::string all;
    for (const char* f : {"records.csv", "aggregates.csv", "report.json", "report.md", "scatter.csv"}) {
      all += slurp(dir_ / sub / f);
    }
    reports.push_back(all);
  }
  EXPECT_EQ(reports[0], reports[1]);
  EXPECT_NE(reports[0].find("\"mus_count\": 2"), std::string::npos);
}

TEST_F(CliTest, BenchGeneratedAndExternal) {
  auto r = run({"bench", "--generate", "2", "--min-vars", "6", "--max-vars", "7", "--budget",
                "300ms", "--enumerator-cmd", "printf '1 2 0\\n'", "--out", path("ext")});
  ASSERT_EQ(r.code, 0) << r.err;
  auto recs = slurp(dir_ / "ext" / "records.csv");
  EXPECT_NE(recs.find(",external,"), std::string::npos);
  EXPECT_NE(run({"bench", "--out", path("x")}).code, 0);
}

TEST_F(CliTest, ValidatePasses) {
  auto r = run({"validate", "--generate", "5", "--min-vars", "8", "--max-vars", "10", "--budget",
                "200ms", "--mus-limit", "20"});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_NE(r.out.find("mus_audit checked"), std::string::npos);
  EXPECT_NE(r.out.find("failures 0"), std::string::npos);
}
