#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "musprune/generators.hpp"
#include "musprune/model.hpp"
#include "musprune/random.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace musprune;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.num_layers = 3;
  c.hidden_dim = 8;
  c.random_feature_dim = 4;
  c.mlp_hidden_dim = 8;
  return c;
}

struct Problem {
  CnfFormula formula;
  LiteralClauseGraph graph;
  GraphOperators ops;
  Matrix features;
};

Problem make_problem(const CnfFormula& f, int random_dim, std::uint64_t seed) {
  Problem p{f, build_lcg(f), {}, {}};
  p.ops = make_operators(p.graph);
  p.features = make_input_features(p.graph, random_dim, seed);
  return p;
}

}  // namespace

TEST(Model, SigmoidAnchor) {
  EXPECT_NEAR(detail::sigmoid(-3.0), 0.0474258731775668, 1e-15);
  EXPECT_NEAR(detail::sigmoid(40.0), 1.0, 1e-15);
  EXPECT_GT(detail::sigmoid(-800.0), -1.0);
}

TEST(Model, ShapesChainAndInitIsDeterministic) {
  ModelConfig c;
  auto a = init_params(c, 3);
  EXPECT_EQ(a, init_params(c, 3));
  EXPECT_FALSE(a == init_params(c, 4));
  EXPECT_EQ(a.layers.size(), 5u);
  EXPECT_EQ(a.layers[0].self_clause.cols(), 34);
  EXPECT_EQ(a.layers[1].self_clause.cols(), 64);
  EXPECT_EQ(a.layers[4].self_literal.size(), 0);
  EXPECT_EQ(a.head.out_bias(0, 0), -3.0);
  EXPECT_TRUE(a.all_finite());
  auto s = init_params(ModelConfig::scaled(), 1);
  EXPECT_EQ(s.layers.size(), 6u);
  EXPECT_EQ(s.layers[2].self_clause.rows(), 128);
}

TEST(Model, ConfigValidation) {
  ModelConfig c;
  c.num_layers = 0;
  EXPECT_THROW(init_params(c, 0), Error);
}

TEST(Model, FreshModelOnF1IsConservative) {
  auto pr = make_problem(oracle::f1(), 32, 5);
  auto mu = forward(init_params(ModelConfig{}, 9), pr.ops, pr.features).mu;
  ASSERT_EQ(mu.size(), 4u);
  for (double m : mu) {
    EXPECT_GT(m, 0.0);
    EXPECT_LT(m, 0.2);
  }
}

TEST(Model, InitMeanPruneProbabilityOnRandomGraphs) {
  SatEngine engine;
  GenSpec spec;
  double total = 0.0;
  for (int i = 0; i < 100; ++i) {
    auto f = generate(spec, derive_seed(77, static_cast<std::uint64_t>(i)), engine).formula;
    auto pr = make_problem(f, 32, derive_seed(78, static_cast<std::uint64_t>(i)));
    auto mu = forward(init_params(ModelConfig{}, static_cast<std::uint64_t>(i)), pr.ops,
                      pr.features).mu;
    total += std::accumulate(mu.begin(), mu.end(), 0.0) / static_cast<double>(mu.size());
  }
  const double mean = total / 100.0;
  EXPECT_GE(mean, 0.02);
  EXPECT_LE(mean, 0.10);
}

TEST(Model, ZeroWeightsCollapseToBias) {
  auto p = init_params(ModelConfig{}, 1).zeros_like();
  p.head.out_bias(0, 0) = -3.0;
  std::mt19937_64 rng(2);
  auto pr = make_problem(oracle::random_formula(rng, 10, 30), 32, 3);
  for (double m : forward(p, pr.ops, pr.features).mu) EXPECT_EQ(m, detail::sigmoid(-3.0));
}

TEST(Model, ShapeMismatchThrows) {
  auto pr = make_problem(oracle::f1(), 32, 1);
  auto p = init_params(ModelConfig{}, 1);
  EXPECT_THROW(forward(p, pr.ops, Matrix(pr.features.topRows(3))), Error);
  EXPECT_THROW(forward(p, pr.ops, Matrix::Zero(pr.features.rows(), 5)), Error);
  EXPECT_THROW(grad_log_prob(p, pr.ops, pr.features, KeepMask(3, true)), Error);
}

TEST(Model, ClausePermutationPermutesScores) {
  std::mt19937_64 rng(10);
  for (int t = 0; t < 5; ++t) {
    auto f = oracle::random_formula(rng, 12, 40, 4);
    std::vector<std::size_t> perm(f.num_clauses());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Clause> shuffled;
    for (auto i : perm) shuffled.push_back(f.clause(i));
    auto a = make_problem(f, 32, 4);
    auto b = make_problem(CnfFormula(f.num_vars(), shuffled), 32, 4);
    const auto lit_rows = static_cast<Eigen::Index>(2 * f.num_vars());
    for (std::size_t j = 0; j < perm.size(); ++j) {
      b.features.row(lit_rows + static_cast<Eigen::Index>(j)) =
          a.features.row(lit_rows + static_cast<Eigen::Index>(perm[j]));
    }
    b.features.topRows(lit_rows) = a.features.topRows(lit_rows);
    auto p = init_params(ModelConfig{}, static_cast<std::uint64_t>(t));
    auto mu_a = forward(p, a.ops, a.features).mu;
    auto mu_b = forward(p, b.ops, b.features).mu;
    for (std::size_t j = 0; j < perm.size(); ++j) EXPECT_NEAR(mu_b[j], mu_a[perm[j]], 1e-12);
  }
}

TEST(Model, TwinClausesGetEqualScores) {
  CnfFormula f(3, {{1, 2}, {1, 2}, {-1, 3}});
  auto pr = make_problem(f, 32, 6);
  pr.features.row(7) = pr.features.row(6);
  auto mu = forward(init_params(ModelConfig{}, 2), pr.ops, pr.features).mu;
  EXPECT_EQ(mu[0], mu[1]);
}

TEST(Mask, UniformHalfLogProb) {
  PruneScores s{{0.5, 0.5, 0.5}};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    EXPECT_NEAR(sample_mask(s, seed).log_prob, 3 * std::log(0.5), 1e-15);
  }
  EXPECT_NEAR(log_prob(s, {true, false, true}), 3 * std::log(0.5), 1e-15);
}

TEST(Mask, TinyProbabilitiesKeepEverything) {
  PruneScores s{std::vector<double>(50, 1e-12)};
  auto m = sample_mask(s, 1);
  EXPECT_EQ(std::count(m.keep.begin(), m.keep.end(), true), 50);
  EXPECT_NEAR(m.log_prob, 50 * std::log1p(-kProbClamp), 1e-12);
}

TEST(Mask, ReportedLogProbMatchesClosedForm) {
  PruneScores s{{0.1, 0.7, 0.3, 0.95}};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto m = sample_mask(s, seed);
    double expected = 0.0;
    for (std::size_t i = 0; i < 4; ++i) expected += std::log(m.keep[i] ? 1 - s.mu[i] : s.mu[i]);
    EXPECT_NEAR(m.log_prob, expected, 1e-12);
    EXPECT_EQ(m.keep, sample_mask(s, seed).keep);
  }
}

TEST(Mask, ProbabilitiesSumToOneOverAllMasks) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  for (std::size_t m = 1; m <= 10; ++m) {
    PruneScores s;
    for (std::size_t i = 0; i < m; ++i) s.mu.push_back(u(rng));
    double total = 0.0;
    for (std::uint32_t bits = 0; bits < (1u << m); ++bits) {
      KeepMask mask(m);
      for (std::size_t i = 0; i < m; ++i) mask[i] = (bits >> i) & 1u;
      total += std::exp(log_prob(s, mask));
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(Mask, EmpiricalPruneFrequencyWithinThreeSigma) {
  PruneScores s{{0.02, 0.1, 0.35, 0.5, 0.8}};
  const int n = 10000;
  std::vector<int> pruned(s.size(), 0);
  for (int t = 0; t < n; ++t) {
    auto m = sample_mask(s, derive_seed(123, static_cast<std::uint64_t>(t)));
    for (std::size_t i = 0; i < s.size(); ++i) pruned[i] += m.keep[i] ? 0 : 1;
  }
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double sigma = std::sqrt(s.mu[i] * (1 - s.mu[i]) / n);
    EXPECT_LT(std::abs(pruned[i] / double(n) - s.mu[i]), 3 * sigma) << i;
  }
}

TEST(Gradient, MatchesFiniteDifferences) {
  std::mt19937_64 rng(21);
  std::bernoulli_distribution coin(0.5);
  for (int t = 0; t < 4; ++t) {
    auto f = oracle::random_formula(rng, 10, 30, 3);
    auto pr = make_problem(f, 4, rng());
    auto p = init_params(small_config(), rng());
    p.head.out_bias(0, 0) = 0.0;
    KeepMask mask(pr.formula.num_clauses());
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = coin(rng);
    auto r = oracle::check_gradient(p, pr.ops, pr.features, mask);
    EXPECT_LT(r.max_rel_error, 1e-4);
    EXPECT_LT(r.refined, r.coordinates / 100 + 1);
  }
}

TEST(Gradient, HeadBiasIsPrunedMinusMu) {
  std::mt19937_64 rng(3);
  auto pr = make_problem(oracle::random_formula(rng, 10, 40, 3), 32, 1);
  auto p = init_params(ModelConfig{}, 5);
  auto mu = forward(p, pr.ops, pr.features).mu;
  KeepMask mask(mu.size());
  double expected = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    mask[i] = i % 3 != 0;
    expected += (mask[i] ? 0.0 : 1.0) - mu[i];
  }
  EXPECT_NEAR(grad_log_prob(p, pr.ops, pr.features, mask).head.out_bias(0, 0), expected, 1e-12);
}

TEST(Gradient, SaturatedKeepGivesNearZeroGradient) {
  auto pr = make_problem(oracle::f1(), 32, 1);
  auto p = init_params(ModelConfig{}, 5);
  p.head.out_bias(0, 0) = -30.0;
  auto g = grad_log_prob(p, pr.ops, pr.features, KeepMask(4, true));
  EXPECT_LT(std::sqrt(g.squared_norm()), 1e-9);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  auto p = init_params(ModelConfig{}, 12);
  p.head.out_bias(0, 0) = -2.5;
  std::stringstream buf;
  save_checkpoint(buf, p);
  auto q = load_checkpoint(buf);
  EXPECT_EQ(p, q);
  auto s = init_params(ModelConfig::scaled(), 1);
  std::stringstream buf2;
  save_checkpoint(buf2, s);
  EXPECT_EQ(load_checkpoint(buf2), s);
}

TEST(Checkpoint, RejectsGarbageAndTruncation) {
  std::stringstream bad("not a checkpoint at all");
  EXPECT_THROW(load_checkpoint(bad), Error);
  std::stringstream buf;
  save_checkpoint(buf, init_params(small_config(), 1));
  std::string bytes = buf.str();
  std::stringstream cut(bytes.substr(0, bytes.size() - 8));
  EXPECT_THROW(load_checkpoint(cut), Error);
}
