#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <random>
#include <set>

#include "musprune/mus.hpp"
#include "oracles.hpp"

using namespace musprune;
using namespace std::chrono_literals;

namespace {
std::set<ClauseSet> as_set(const std::vector<MusRecord>& muses) {
  std::set<ClauseSet> s;
  for (const auto& m : muses) s.insert(m.clauses);
  return s;
}
}  // namespace

TEST(IsMus, HandChecks) {
  auto f = oracle::f1();
  EXPECT_TRUE(is_mus(f, {0, 1}));
  EXPECT_FALSE(is_mus(f, {0, 1, 2}));
  EXPECT_FALSE(is_mus(f, {0, 2}));
  EXPECT_TRUE(is_mus(f, {1, 2, 3}));
}

TEST(Shrink, DeletionOrderTrace) {
  auto f = oracle::f1();
  EXPECT_EQ(shrink(f, {0, 1, 2, 3}).clauses, (ClauseSet{1, 2, 3}));
  EXPECT_EQ(shrink(f, {0, 1}).clauses, (ClauseSet{0, 1}));
}

TEST(Shrink, SatisfiableSeedIsAnError) {
  EXPECT_THROW(shrink(oracle::f1(), {0, 2}), Error);
}

TEST(Shrink, OutputIsMusContainedInSeed) {
  std::mt19937_64 rng(12);
  std::bernoulli_distribution coin(0.8);
  for (int t = 0; t < 100; ++t) {
    auto f = oracle::random_small_unsat(rng, 12);
    ClauseSet seed;
    for (std::size_t i = 0; i < f.num_clauses(); ++i) {
      if (coin(rng)) seed.push_back(i);
    }
    SatEngine engine;
    if (engine.is_satisfiable(f.subset(seed))) seed = all_clauses(f);
    auto mus = shrink(f, seed);
    EXPECT_TRUE(is_mus(f, mus.clauses));
    EXPECT_TRUE(std::includes(seed.begin(), seed.end(), mus.clauses.begin(), mus.clauses.end()));
  }
}

TEST(Critical, Examples) {
  auto f = oracle::f1();
  EXPECT_EQ(critical_clauses(f, {0, 1}), (ClauseSet{0, 1}));
  EXPECT_EQ(critical_clauses(f, {0, 1, 2, 3}), (ClauseSet{1}));
  EXPECT_EQ(critical_clauses(f, {1, 2, 3}), (ClauseSet{1, 2, 3}));
  EXPECT_THROW(critical_clauses(f, {2, 3}), Error);
}

TEST(BruteForce, Examples) {
  auto f = oracle::f1();
  EXPECT_EQ(as_set(brute_force_muses(f)), (std::set<ClauseSet>{{0, 1}, {1, 2, 3}}));
  EXPECT_EQ(brute_force_muses(CnfFormula(1, {{1}, {-1}})).size(), 1u);
  EXPECT_TRUE(brute_force_muses(CnfFormula(2, {{1, 2}, {-1}})).empty());
  std::vector<Clause> many(21, Clause{1});
  EXPECT_THROW(brute_force_muses(CnfFormula(1, many)), Error);
}

TEST(BruteForce, EmptyClauseIsItsOwnMus) {
  EXPECT_EQ(as_set(brute_force_muses(CnfFormula(1, {{1}, {}}))), (std::set<ClauseSet>{{1}}));
}

TEST(BruteForce, MatchesTruthTableOracle) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 60; ++t) {
    auto f = oracle::random_small_unsat(rng, 9);
    std::set<ClauseSet> expected;
    for (auto& s : oracle::truth_table_muses(f)) expected.insert(s);
    EXPECT_EQ(as_set(brute_force_muses(f)), expected);
  }
}

TEST(Marco, EnumeratesF1Exhaustively) {
  auto f = oracle::f1();
  std::vector<MusRecord> seen;
  auto trace = enumerate_marco(f, 10s, [&](const MusRecord& r) { seen.push_back(r); });
  EXPECT_TRUE(trace.exhausted);
  EXPECT_EQ(as_set(trace.muses), (std::set<ClauseSet>{{0, 1}, {1, 2, 3}}));
  EXPECT_EQ(seen.size(), trace.muses.size());
  for (std::size_t i = 1; i < trace.muses.size(); ++i) {
    EXPECT_LE(trace.muses[i - 1].found_at, trace.muses[i].found_at);
  }
}

TEST(Marco, RejectsSatInputAndNonPositiveBudget) {
  EXPECT_THROW(enumerate_marco(CnfFormula(1, {{1}}), 1s), Error);
  EXPECT_THROW(enumerate_marco(oracle::f1(), 0s), Error);
}

TEST(Marco, TinyBudgetOnLargeInstanceStopsEarly) {
  std::mt19937_64 rng(8);
  // Many disjoint contradictions: 2^20 MUSes.
  std::vector<Clause> cl;
  for (int v = 1; v <= 20; ++v) {
    cl.push_back({v});
    cl.push_back({v});
    cl.push_back({-v});
  }
  CnfFormula f(20, cl);
  auto trace = enumerate_marco(f, 1ms);
  EXPECT_FALSE(trace.exhausted);
  std::set<ClauseSet> distinct = as_set(trace.muses);
  EXPECT_EQ(distinct.size(), trace.muses.size());
}

TEST(Marco, MatchesBruteForceOnRandomFormulas) {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 80; ++t) {
    auto f = oracle::random_small_unsat(rng, 12);
    auto trace = enumerate_marco(f, 60s);
    ASSERT_TRUE(trace.exhausted);
    EXPECT_EQ(as_set(trace.muses), as_set(brute_force_muses(f))) << write_dimacs(f);
    EXPECT_EQ(as_set(trace.muses).size(), trace.muses.size());
  }
}

TEST(Lift, RelabelsIndices) {
  EnumerationTrace t;
  t.muses.push_back(MusRecord{{0, 1}, {}});
  EXPECT_EQ(lift_muses(t, {0, 1}).muses[0].clauses, (ClauseSet{0, 1}));
  EXPECT_EQ(lift_muses(t, {2, 5}).muses[0].clauses, (ClauseSet{2, 5}));
  EXPECT_THROW(lift_muses(t, {3}), Error);
}

TEST(Lift, SubsetMusesAreMusesOfTheOriginal) {
  std::mt19937_64 rng(77);
  std::bernoulli_distribution coin(0.7);
  SatEngine engine;
  int checked = 0;
  for (int t = 0; t < 200 && checked < 60; ++t) {
    auto f = oracle::random_small_unsat(rng, 12);
    KeepMask mask(f.num_clauses());
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = coin(rng);
    auto pruned = prune_clauses(f, mask);
    if (engine.is_satisfiable(pruned.formula)) continue;
    ++checked;
    auto lifted = lift_muses(enumerate_marco(pruned.formula, 60s), pruned.index_map);
    auto all = as_set(brute_force_muses(f));
    for (const auto& m : lifted.muses) {
      EXPECT_TRUE(is_mus(f, m.clauses));
      EXPECT_TRUE(all.count(m.clauses));
    }
  }
  EXPECT_GT(checked, 20);
}
