#pragma once

// Clause pruning model: heterogeneous GraphConv layers over the
// literal-clause graph followed by a two-layer MLP head that outputs, for
// every clause, the probability that the clause is pruned.
//
// Layer rule for node v of type T:
//   h_v' = relu(W_self[T] h_v + sum_r sum_{u in N_r(v)} W_r h_u + b[T])
// with relations literal->clause, clause->literal and literal<->negation.
// The last layer only updates clause nodes since the head reads clauses only.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "musprune/cnf.hpp"
#include "musprune/graph.hpp"

namespace musprune {

struct ModelConfig {
  int num_layers = 5;
  int hidden_dim = 64;
  int random_feature_dim = 32;
  int mlp_hidden_dim = 64;
  double head_bias_init = -3.0;

  int input_dim() const { return 2 + random_feature_dim; }

  /// Six layers of width 128, used for large external problems.
  static ModelConfig scaled() {
    ModelConfig c;
    c.num_layers = 6;
    c.hidden_dim = 128;
    c.mlp_hidden_dim = 128;
    return c;
  }

  void validate() const {
    if (num_layers < 1) throw Error("model needs at least one layer");
    if (hidden_dim < 1 || mlp_hidden_dim < 1) throw Error("model dimensions must be >= 1");
    if (random_feature_dim < 0) throw Error("random feature dimension must be >= 0");
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct LayerParams {
  Matrix self_literal, self_clause;
  Matrix literal_to_clause, clause_to_literal, negation;
  Matrix bias_literal, bias_clause;  // column vectors
};

struct HeadParams {
  Matrix hidden_weight, hidden_bias;
  Matrix out_weight, out_bias;  // 1 x mlp_hidden, 1 x 1
};

/// Weights of the pruning model; also used for gradients and Adam moments.
struct ModelParams {
  ModelConfig config;
  std::vector<LayerParams> layers;
  HeadParams head;

  /// Visits every tensor in a fixed order (checkpoints and optimizers rely on it).
  template <typename F>
  void for_each_tensor(F&& f) {
    for (auto& l : layers) {
      f(l.self_literal);
      f(l.self_clause);
      f(l.literal_to_clause);
      f(l.clause_to_literal);
      f(l.negation);
      f(l.bias_literal);
      f(l.bias_clause);
    }
    f(head.hidden_weight);
    f(head.hidden_bias);
    f(head.out_weight);
    f(head.out_bias);
  }
  template <typename F>
  void for_each_tensor(F&& f) const {
    const_cast<ModelParams*>(this)->for_each_tensor(
        [&](Matrix& m) { f(static_cast<const Matrix&>(m)); });
  }

  std::vector<Matrix*> tensors() {
    std::vector<Matrix*> out;
    for_each_tensor([&](Matrix& m) { out.push_back(&m); });
    return out;
  }

  std::size_t num_parameters() const {
    std::size_t n = 0;
    for_each_tensor([&](const Matrix& m) { n += static_cast<std::size_t>(m.size()); });
    return n;
  }

  ModelParams zeros_like() const {
    ModelParams z = *this;
    z.for_each_tensor([](Matrix& m) { m.setZero(); });
    return z;
  }

  double squared_norm() const {
    double s = 0.0;
    for_each_tensor([&](const Matrix& m) { s += m.squaredNorm(); });
    return s;
  }

  bool all_finite() const {
    bool ok = true;
    for_each_tensor([&](const Matrix& m) { ok = ok && m.allFinite(); });
    return ok;
  }

  friend bool operator==(const ModelParams& a, const ModelParams& b) {
    if (!(a.config == b.config)) return false;
    std::vector<const Matrix*> ta, tb;
    a.for_each_tensor([&](const Matrix& m) { ta.push_back(&m); });
    b.for_each_tensor([&](const Matrix& m) { tb.push_back(&m); });
    if (ta.size() != tb.size()) return false;
    for (std::size_t i = 0; i < ta.size(); ++i) {
      if (ta[i]->rows() != tb[i]->rows() || ta[i]->cols() != tb[i]->cols()) return false;
      if (std::memcmp(ta[i]->data(), tb[i]->data(),
                      sizeof(double) * static_cast<std::size_t>(ta[i]->size())) != 0) {
        return false;
      }
    }
    return true;
  }
};

using ParamGrads = ModelParams;

/// Per-clause prune probabilities mu (keep probability is 1 - mu).
struct PruneScores {
  std::vector<double> mu;
  std::size_t size() const { return mu.size(); }
};

// ---------------------------------------------------------------------------
// Initialization

inline constexpr double kTypicalClauseDegree = 4.0;
inline constexpr double kTypicalLiteralDegree = 8.0;
inline constexpr double kHeadOutputScale = 0.1;

/// He-style uniform weights with variance 2/(fan_in * terms), where `terms`
/// counts the summands feeding the same pre-activation. ReLU outputs are
/// nonnegative, so a neighbor sum grows linearly with degree and neighbor
/// weights get the squared typical degree. Head output bias from config.
inline ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  auto uniform = [&](int rows, int cols, double terms) {
    double a = std::sqrt(6.0 / (static_cast<double>(cols) * terms));
    std::uniform_real_distribution<double> dist(-a, a);
    Matrix m(rows, cols);
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = dist(rng);
    }
    return m;
  };

  ModelParams p;
  p.config = config;
  const int h = config.hidden_dim;
  for (int l = 0; l < config.num_layers; ++l) {
    const int in = l == 0 ? config.input_dim() : h;
    const bool last = l + 1 == config.num_layers;
    LayerParams lp;
    lp.self_clause = uniform(h, in, 2.0);
    lp.literal_to_clause = uniform(h, in, 2.0 * kTypicalClauseDegree * kTypicalClauseDegree);
    lp.bias_clause = Matrix::Zero(h, 1);
    if (!last) {
      lp.self_literal = uniform(h, in, 3.0);
      lp.clause_to_literal = uniform(h, in, 3.0 * kTypicalLiteralDegree * kTypicalLiteralDegree);
      lp.negation = uniform(h, in, 3.0);
      lp.bias_literal = Matrix::Zero(h, 1);
    } else {
      lp.self_literal = lp.clause_to_literal = lp.negation = Matrix(0, 0);
      lp.bias_literal = Matrix(0, 0);
    }
    p.layers.push_back(std::move(lp));
  }
  p.head.hidden_weight = uniform(config.mlp_hidden_dim, h, 1.0);
  p.head.hidden_bias = Matrix::Zero(config.mlp_hidden_dim, 1);
  p.head.out_weight = uniform(1, config.mlp_hidden_dim, 1.0) * kHeadOutputScale;
  p.head.out_bias = Matrix::Constant(1, 1, config.head_bias_init);
  return p;
}

// ---------------------------------------------------------------------------
// Forward / backward

/// Sparse adjacency of the membership relation.
struct GraphOperators {
  std::size_t num_vars = 0;
  std::size_t num_clauses = 0;
  Eigen::SparseMatrix<double> clause_from_literal;  // M x 2N
  Eigen::SparseMatrix<double> literal_from_clause;  // 2N x M
};

inline GraphOperators make_operators(const LiteralClauseGraph& g) {
  GraphOperators ops;
  ops.num_vars = static_cast<std::size_t>(g.num_vars);
  ops.num_clauses = g.num_clauses;
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(g.membership_edges.size());
  for (auto [lit, cls] : g.membership_edges) {
    t.emplace_back(static_cast<int>(cls - g.num_literal_nodes()), static_cast<int>(lit), 1.0);
  }
  ops.clause_from_literal.resize(static_cast<Eigen::Index>(g.num_clauses),
                                 static_cast<Eigen::Index>(g.num_literal_nodes()));
  ops.clause_from_literal.setFromTriplets(t.begin(), t.end());
  ops.literal_from_clause = ops.clause_from_literal.transpose();
  return ops;
}

namespace detail {

// Row i <-> row i + N over the literal block.
inline Matrix swap_polarity(const Matrix& lit) {
  const Eigen::Index n = lit.rows() / 2;
  Matrix out(lit.rows(), lit.cols());
  out.topRows(n) = lit.bottomRows(n);
  out.bottomRows(n) = lit.topRows(n);
  return out;
}

inline Matrix relu(const Matrix& x) { return x.cwiseMax(0.0); }

inline Matrix relu_grad(const Matrix& upstream, const Matrix& pre) {
  return (pre.array() > 0.0).select(upstream, 0.0);
}

inline double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace detail

/// Intermediate values kept for the backward pass.
struct ForwardPass {
  std::vector<Matrix> literal_in, clause_in;  // layer inputs
  std::vector<Matrix> literal_pre, clause_pre;
  std::vector<Matrix> literal_agg, clause_agg, negation_agg;
  Matrix clause_out;  // Z restricted to clause nodes
  Matrix head_pre, head_hidden;
  Vector scores;  // logits
  std::vector<double> mu;
};

inline ForwardPass forward_pass(const ModelParams& params, const GraphOperators& ops,
                                const Matrix& features) {
  const auto n_lit = static_cast<Eigen::Index>(2 * ops.num_vars);
  const auto n_cls = static_cast<Eigen::Index>(ops.num_clauses);
  if (features.rows() != n_lit + n_cls) {
    throw Error("feature matrix has " + std::to_string(features.rows()) +
                " rows, graph has " + std::to_string(n_lit + n_cls) + " nodes");
  }
  if (features.cols() != params.config.input_dim()) {
    throw Error("feature matrix has " + std::to_string(features.cols()) +
                " columns, model expects " + std::to_string(params.config.input_dim()));
  }
  ForwardPass fp;
  Matrix lit = features.topRows(n_lit);
  Matrix cls = features.bottomRows(n_cls);
  const int layers = params.config.num_layers;
  for (int l = 0; l < layers; ++l) {
    const auto& w = params.layers[static_cast<std::size_t>(l)];
    const bool last = l + 1 == layers;
    Matrix agg_c = ops.clause_from_literal * lit;
    Matrix pre_c = cls * w.self_clause.transpose() + agg_c * w.literal_to_clause.transpose();
    pre_c.rowwise() += w.bias_clause.col(0).transpose();
    Matrix pre_l, agg_l, neg;
    if (!last) {
      agg_l = ops.literal_from_clause * cls;
      neg = detail::swap_polarity(lit);
      pre_l = lit * w.self_literal.transpose() + agg_l * w.clause_to_literal.transpose() +
              neg * w.negation.transpose();
      pre_l.rowwise() += w.bias_literal.col(0).transpose();
    }
    fp.literal_in.push_back(std::move(lit));
    fp.clause_in.push_back(std::move(cls));
    cls = detail::relu(pre_c);
    if (!last) lit = detail::relu(pre_l);
    fp.clause_pre.push_back(std::move(pre_c));
    fp.literal_pre.push_back(std::move(pre_l));
    fp.clause_agg.push_back(std::move(agg_c));
    fp.literal_agg.push_back(std::move(agg_l));
    fp.negation_agg.push_back(std::move(neg));
  }
  fp.clause_out = std::move(cls);
  fp.head_pre = fp.clause_out * params.head.hidden_weight.transpose();
  fp.head_pre.rowwise() += params.head.hidden_bias.col(0).transpose();
  fp.head_hidden = detail::relu(fp.head_pre);
  fp.scores = fp.head_hidden * params.head.out_weight.transpose();
  fp.scores.array() += params.head.out_bias(0, 0);
  fp.mu.resize(static_cast<std::size_t>(n_cls));
  for (Eigen::Index i = 0; i < n_cls; ++i) {
    fp.mu[static_cast<std::size_t>(i)] = detail::sigmoid(fp.scores(i));
  }
  return fp;
}

/// Gradients of sum_i d_scores[i] * logit_i with respect to all parameters.
inline ParamGrads backward_pass(const ModelParams& params, const GraphOperators& ops,
                                const ForwardPass& fp, const Vector& d_scores) {
  ParamGrads g = params.zeros_like();
  // head
  g.head.out_weight = d_scores.transpose() * fp.head_hidden;
  g.head.out_bias(0, 0) = d_scores.sum();
  Matrix d_hidden = d_scores * params.head.out_weight;
  Matrix d_head_pre = detail::relu_grad(d_hidden, fp.head_pre);
  g.head.hidden_weight = d_head_pre.transpose() * fp.clause_out;
  g.head.hidden_bias = d_head_pre.colwise().sum().transpose();
  Matrix d_cls = d_head_pre * params.head.hidden_weight;
  Matrix d_lit;  // empty: the last layer has no literal output

  for (int l = params.config.num_layers - 1; l >= 0; --l) {
    const auto li = static_cast<std::size_t>(l);
    const auto& w = params.layers[li];
    auto& gw = g.layers[li];
    const bool last = l + 1 == params.config.num_layers;

    Matrix d_pre_c = detail::relu_grad(d_cls, fp.clause_pre[li]);
    gw.self_clause = d_pre_c.transpose() * fp.clause_in[li];
    gw.literal_to_clause = d_pre_c.transpose() * fp.clause_agg[li];
    gw.bias_clause = d_pre_c.colwise().sum().transpose();

    Matrix d_lit_in = ops.literal_from_clause * (d_pre_c * w.literal_to_clause);
    Matrix d_cls_in = d_pre_c * w.self_clause;
    if (!last) {
      Matrix d_pre_l = detail::relu_grad(d_lit, fp.literal_pre[li]);
      gw.self_literal = d_pre_l.transpose() * fp.literal_in[li];
      gw.clause_to_literal = d_pre_l.transpose() * fp.literal_agg[li];
      gw.negation = d_pre_l.transpose() * fp.negation_agg[li];
      gw.bias_literal = d_pre_l.colwise().sum().transpose();
      d_lit_in += d_pre_l * w.self_literal + detail::swap_polarity(d_pre_l * w.negation);
      d_cls_in += ops.clause_from_literal * (d_pre_l * w.clause_to_literal);
    }
    d_lit = std::move(d_lit_in);
    d_cls = std::move(d_cls_in);
  }
  return g;
}

inline PruneScores forward(const ModelParams& params, const GraphOperators& ops,
                           const Matrix& features) {
  return PruneScores{forward_pass(params, ops, features).mu};
}

inline PruneScores forward(const ModelParams& params, const LiteralClauseGraph& graph,
                           const Matrix& features) {
  return forward(params, make_operators(graph), features);
}

// ---------------------------------------------------------------------------
// Bernoulli masks

inline constexpr double kProbClamp = 1e-7;

struct MaskSample {
  KeepMask keep;
  double log_prob = 0.0;
};

inline double clamped(double mu) { return std::clamp(mu, kProbClamp, 1.0 - kProbClamp); }

/// log p(mask) where clause i is pruned with probability mu_i.
inline double log_prob(const PruneScores& scores, const KeepMask& mask) {
  if (mask.size() != scores.size()) throw Error("mask length does not match scores");
  double lp = 0.0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    double m = clamped(scores.mu[i]);
    lp += mask[i] ? std::log1p(-m) : std::log(m);
  }
  return lp;
}

inline MaskSample sample_mask(const PruneScores& scores, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  MaskSample s;
  s.keep.resize(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) s.keep[i] = !(unit(rng) < scores.mu[i]);
  s.log_prob = log_prob(scores, s.keep);
  return s;
}

/// d log p(mask) / d logit_i = pruned_i - mu_i (zero where the clamp is active).
inline Vector log_prob_logit_grad(const std::vector<double>& mu, const KeepMask& mask) {
  if (mask.size() != mu.size()) throw Error("mask length does not match scores");
  Vector d(static_cast<Eigen::Index>(mu.size()));
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const bool inside = mu[i] > kProbClamp && mu[i] < 1.0 - kProbClamp;
    d(static_cast<Eigen::Index>(i)) = inside ? (mask[i] ? 0.0 : 1.0) - mu[i] : 0.0;
  }
  return d;
}

inline ParamGrads grad_log_prob(const ModelParams& params, const GraphOperators& ops,
                                const Matrix& features, const KeepMask& mask) {
  if (mask.size() != ops.num_clauses) throw Error("mask length does not match clause count");
  auto fp = forward_pass(params, ops, features);
  return backward_pass(params, ops, fp, log_prob_logit_grad(fp.mu, mask));
}

// ---------------------------------------------------------------------------
// Checkpoints: magic, version, config, then each tensor as rows, cols and
// raw column-major doubles in host byte order.

inline constexpr char kCheckpointMagic[8] = {'M', 'P', 'R', 'U', 'N', 'E', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {
template <typename T>
void write_raw(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T read_raw(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error("truncated checkpoint");
  return v;
}
}  // namespace detail

inline void save_checkpoint(std::ostream& out, const ModelParams& params) {
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::write_raw(out, kCheckpointVersion);
  const auto& c = params.config;
  detail::write_raw<std::int32_t>(out, c.num_layers);
  detail::write_raw<std::int32_t>(out, c.hidden_dim);
  detail::write_raw<std::int32_t>(out, c.random_feature_dim);
  detail::write_raw<std::int32_t>(out, c.mlp_hidden_dim);
  detail::write_raw<double>(out, c.head_bias_init);
  std::uint32_t count = 0;
  params.for_each_tensor([&](const Matrix&) { ++count; });
  detail::write_raw(out, count);
  params.for_each_tensor([&](const Matrix& m) {
    detail::write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows()));
    detail::write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols()));
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
  });
  if (!out) throw Error("failed to write checkpoint");
}

inline ModelParams load_checkpoint(std::istream& in) {
  char magic[sizeof(kCheckpointMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw Error("not a model checkpoint");
  }
  if (auto v = detail::read_raw<std::uint32_t>(in); v != kCheckpointVersion) {
    throw Error("unsupported checkpoint version " + std::to_string(v));
  }
  ModelConfig c;
  c.num_layers = detail::read_raw<std::int32_t>(in);
  c.hidden_dim = detail::read_raw<std::int32_t>(in);
  c.random_feature_dim = detail::read_raw<std::int32_t>(in);
  c.mlp_hidden_dim = detail::read_raw<std::int32_t>(in);
  c.head_bias_init = detail::read_raw<double>(in);
  ModelParams p = init_params(c, 0);
  const auto count = detail::read_raw<std::uint32_t>(in);
  auto tensors = p.tensors();
  if (count != tensors.size()) throw Error("checkpoint tensor count mismatch");
  for (Matrix* m : tensors) {
    const auto rows = detail::read_raw<std::uint32_t>(in);
    const auto cols = detail::read_raw<std::uint32_t>(in);
    if (rows != m->rows() || cols != m->cols()) {
      throw Error("checkpoint tensor shape mismatch");
    }
    in.read(reinterpret_cast<char*>(m->data()),
            static_cast<std::streamsize>(sizeof(double) * rows * cols));
    if (!in) throw Error("truncated checkpoint");
  }
  return p;
}

inline void save_checkpoint(const std::string& path, const ModelParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  save_checkpoint(out, params);
}

inline ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return load_checkpoint(in);
}

}  // namespace musprune
