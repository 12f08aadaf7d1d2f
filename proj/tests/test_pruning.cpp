#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "musprune/generators.hpp"
#include "musprune/mus.hpp"
#include "musprune/pruning.hpp"
#include "musprune/random.hpp"
#include "oracles.hpp"

using namespace musprune;
using namespace std::chrono_literals;

namespace {

int call_bound(int k) { return static_cast<int>(std::ceil(std::log2(k + 1.0))) + 1; }

void expect_sound(const CnfFormula& original, const PruneOutcome& out) {
  SatEngine check;
  if (out.pruned == original) return;
  EXPECT_FALSE(check.is_satisfiable(out.pruned));
  ASSERT_EQ(out.index_map.size(), out.pruned.num_clauses());
  for (std::size_t j = 0; j < out.index_map.size(); ++j) {
    EXPECT_EQ(out.pruned.clause(j), original.clause(out.index_map[j]));
  }
}

}  // namespace

TEST(Threshold, F1Example) {
  SatEngine engine;
  auto f = oracle::f1();
  auto out = threshold_prune(f, PruneScores{{0.02, 0.03, 0.9, 0.6}}, 10, engine);
  EXPECT_EQ(out.index_map, (std::vector<ClauseIndex>{0, 1}));
  EXPECT_EQ(out.pruned.clauses(), (std::vector<Clause>{{1}, {-1}}));
  EXPECT_DOUBLE_EQ(out.kept_fraction, 0.5);
  EXPECT_EQ(out.satisfiable, std::optional<bool>(false));
  EXPECT_LE(out.sat_calls, 5u);
  EXPECT_EQ(out.sat_calls, engine.calls());
  EXPECT_NEAR(*out.threshold, 0.09, 1e-12);
}

TEST(Threshold, UniformScoresKeepEverything) {
  SatEngine engine;
  auto out = threshold_prune(oracle::f1(), PruneScores{std::vector<double>(4, 0.3)}, 10, engine);
  EXPECT_EQ(out.pruned, oracle::f1());
  EXPECT_EQ(out.kept_fraction, 1.0);
  EXPECT_EQ(out.sat_calls, 0u);
}

TEST(Threshold, CoreScoredHighFallsBackToOriginal) {
  SatEngine engine;
  // Only MUS is {0,1}; score it highest so every strict prefix is SAT.
  CnfFormula f(3, {{1}, {-1}, {2, 3}, {-2}, {3}});
  auto out = threshold_prune(f, PruneScores{{0.95, 0.9, 0.1, 0.2, 0.3}}, 10, engine);
  EXPECT_EQ(out.pruned, f);
  EXPECT_LE(out.sat_calls, static_cast<std::uint64_t>(call_bound(10)));
}

TEST(Threshold, GridEndpointsAndMonotoneKeepRule) {
  std::vector<double> mu{0.1, 0.7, 0.35, 0.35, 0.02};
  auto grid = threshold_grid(mu, 7);
  ASSERT_EQ(grid.size(), 8u);
  EXPECT_DOUBLE_EQ(grid.front(), 0.1);
  EXPECT_EQ(grid.back(), 0.7);
  for (std::size_t j = 1; j < grid.size(); ++j) {
    EXPECT_LT(grid[j - 1], grid[j]);
    for (std::size_t i = 0; i < mu.size(); ++i) {
      if (mu[i] <= grid[j - 1]) {
        EXPECT_LE(mu[i], grid[j]);
      }
    }
  }
  EXPECT_THROW(threshold_grid(mu, 0), Error);
}

TEST(Threshold, RandomScoresSoundAndWithinCallBudget) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SatEngine gen_engine;
  GenSpec spec;
  spec.min_vars = 10;
  spec.max_vars = 20;
  for (int t = 0; t < 60; ++t) {
    auto f = generate(spec, derive_seed(3, static_cast<std::uint64_t>(t)), gen_engine).formula;
    PruneScores s;
    for (std::size_t i = 0; i < f.num_clauses(); ++i) s.mu.push_back(u(rng));
    for (int k : {1, 3, 10, 100}) {
      SatEngine engine;
      auto out = threshold_prune(f, s, k, engine);
      expect_sound(f, out);
      EXPECT_LE(out.sat_calls, static_cast<std::uint64_t>(call_bound(k)));
    }
  }
}

TEST(Threshold, LengthMismatchThrows) {
  SatEngine engine;
  EXPECT_THROW(threshold_prune(oracle::f1(), PruneScores{{0.1}}, 10, engine), Error);
}

TEST(ClauseLength, Example) {
  SatEngine engine;
  CnfFormula f(3, {{1}, {-1}, {1, 2, 3}, {-2, 3}});
  auto out = clause_length_prune(f, 100, engine);
  EXPECT_EQ(out.index_map, (std::vector<ClauseIndex>{0, 1}));
  EXPECT_EQ(out.threshold, std::optional<double>(1.0));
  EXPECT_EQ(clause_length_grid(f, 100), (std::vector<std::size_t>{1, 2, 3}));
}

TEST(ClauseLength, SingleLevelAndFallback) {
  SatEngine engine;
  CnfFormula same(2, {{1, 2}, {-1, 2}, {1, -2}, {-1, -2}});
  EXPECT_EQ(clause_length_prune(same, 100, engine).pruned, same);
  // Short clauses alone are satisfiable.
  CnfFormula needs_long(2, {{1}, {2}, {-1, -2}});
  EXPECT_EQ(clause_length_prune(needs_long, 100, engine).pruned, needs_long);
}

TEST(ClauseLength, GridRounding) {
  CnfFormula f(12, {{1}, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11}});
  EXPECT_EQ(clause_length_grid(f, 4), (std::vector<std::size_t>{1, 4, 6, 9, 11}));
}

TEST(VarFreq, F1Scores) {
  auto s = variable_frequency_scores(oracle::f1());
  EXPECT_EQ(s, (std::vector<double>{-3, -3, -2.5, -2}));
  auto r = rescale_scores(s);
  EXPECT_DOUBLE_EQ(r[0], 0.05);
  EXPECT_DOUBLE_EQ(r[3], 0.95);
  EXPECT_EQ(r[0], r[1]);
  EXPECT_EQ(rescale_scores({2.0, 2.0}), (std::vector<double>{0.5, 0.5}));
}

TEST(VarFreq, RareVariablesScoreHigher) {
  CnfFormula f(4, {{1, 2}, {1, 2}, {1, 2}, {3, 4}});
  auto s = variable_frequency_scores(f);
  EXPECT_GT(s[3], s[0]);
}

TEST(VarFreq, PrunesF1Soundly) {
  SatEngine engine;
  auto out = variable_frequency_prune(oracle::f1(), 10, engine);
  expect_sound(oracle::f1(), out);
  EXPECT_EQ(out.index_map, (std::vector<ClauseIndex>{0, 1}));
}

TEST(RandomPrune, Extremes) {
  SatEngine engine;
  auto f = oracle::f1();
  auto none = random_prune(f, 0.0, 1, engine);
  EXPECT_EQ(none.pruned, f);
  EXPECT_EQ(none.satisfiable, std::optional<bool>(false));
  auto all = random_prune(f, 1.0, 1, engine);
  EXPECT_TRUE(all.pruned.empty());
  EXPECT_EQ(all.satisfiable, std::optional<bool>(true));
  EXPECT_EQ(random_prune(f, 0.6, 4, engine).pruned.num_clauses(), 2u);
  EXPECT_THROW(random_prune(f, 1.5, 1, engine), Error);
  EXPECT_EQ(random_prune(f, 0.5, 9, engine).index_map, random_prune(f, 0.5, 9, engine).index_map);
}

TEST(ModelPrune, SoundOnRandomFormulas) {
  SatEngine gen_engine;
  GenSpec spec;
  spec.min_vars = 10;
  spec.max_vars = 16;
  auto params = init_params(ModelConfig{}, 3);
  for (int t = 0; t < 20; ++t) {
    auto f = generate(spec, derive_seed(8, static_cast<std::uint64_t>(t)), gen_engine).formula;
    SatEngine engine;
    auto out = model_prune(f, params, 10, static_cast<std::uint64_t>(t), engine);
    expect_sound(f, out);
    EXPECT_LE(out.sat_calls, 5u);
    EXPECT_EQ(out.method, "model");
  }
}

TEST(Prop1, MusesOfPrunedFormulasAreMusesOfTheOriginal) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 40; ++t) {
    auto f = oracle::random_small_unsat(rng, 12);
    SatEngine engine;
    PruneScores s;
    for (std::size_t i = 0; i < f.num_clauses(); ++i) s.mu.push_back(u(rng));
    for (const auto& out : {threshold_prune(f, s, 10, engine), clause_length_prune(f, 100, engine),
                            variable_frequency_prune(f, 10, engine)}) {
      auto lifted = lift_muses(enumerate_marco(out.pruned, 30s), out.index_map);
      EXPECT_TRUE(lifted.exhausted);
      EXPECT_FALSE(lifted.muses.empty());
      for (const auto& m : lifted.muses) EXPECT_TRUE(is_mus(f, m.clauses));
    }
  }
}
