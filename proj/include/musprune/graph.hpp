#pragma once

// Literal-clause graph of a CNF formula and the GNN input features.
//
// Node layout: literal u_i at i-1, its negation at N+i-1 (i = 1..N), clause j
// at 2N+j. Membership edges connect each literal occurrence to its clause;
// negation edges connect u_i with its negation.

#include <cstdint>
#include <ostream>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "musprune/cnf.hpp"

namespace musprune {

enum class NodeType : int { Literal = 0, Clause = 1 };
enum class EdgeType : int { Membership = 0, Negation = 1 };

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct LiteralClauseGraph {
  int num_vars = 0;
  std::size_t num_clauses = 0;
  /// (literal node, clause node), one per literal occurrence, clause order.
  std::vector<std::pair<std::size_t, std::size_t>> membership_edges;
  /// (u_i node, negation node), i = 1..N.
  std::vector<std::pair<std::size_t, std::size_t>> negation_edges;

  std::size_t num_literal_nodes() const { return 2 * static_cast<std::size_t>(num_vars); }
  std::size_t num_clause_nodes() const { return num_clauses; }
  std::size_t num_nodes() const { return num_literal_nodes() + num_clauses; }
  std::size_t num_edges() const { return membership_edges.size() + negation_edges.size(); }

  std::size_t literal_node(Literal lit) const {
    auto v = static_cast<std::size_t>(var_of(lit)) - 1;
    return lit > 0 ? v : static_cast<std::size_t>(num_vars) + v;
  }
  Literal literal_of(std::size_t node) const {
    auto n = static_cast<std::size_t>(num_vars);
    return node < n ? static_cast<Literal>(node + 1) : -static_cast<Literal>(node - n + 1);
  }
  std::size_t clause_node(ClauseIndex j) const { return num_literal_nodes() + j; }
  NodeType node_type(std::size_t node) const {
    return node < num_literal_nodes() ? NodeType::Literal : NodeType::Clause;
  }

  /// X_V: one-hot node types, column 0 literal, column 1 clause.
  Matrix node_type_onehot() const {
    Matrix x = Matrix::Zero(static_cast<Eigen::Index>(num_nodes()), 2);
    for (std::size_t v = 0; v < num_nodes(); ++v) {
      x(static_cast<Eigen::Index>(v), static_cast<int>(node_type(v))) = 1.0;
    }
    return x;
  }

  /// X_E: one-hot edge types, membership edges first, then negation edges.
  Matrix edge_type_onehot() const {
    Matrix x = Matrix::Zero(static_cast<Eigen::Index>(num_edges()), 2);
    for (std::size_t e = 0; e < num_edges(); ++e) {
      x(static_cast<Eigen::Index>(e), e < membership_edges.size() ? 0 : 1) = 1.0;
    }
    return x;
  }
};

inline LiteralClauseGraph build_lcg(const CnfFormula& formula) {
  LiteralClauseGraph g;
  g.num_vars = formula.num_vars();
  g.num_clauses = formula.num_clauses();
  g.membership_edges.reserve(formula.num_literal_occurrences());
  for (std::size_t j = 0; j < formula.num_clauses(); ++j) {
    for (Literal lit : formula.clause(j)) {
      g.membership_edges.emplace_back(g.literal_node(lit), g.clause_node(j));
    }
  }
  for (int i = 1; i <= g.num_vars; ++i) {
    g.negation_edges.emplace_back(g.literal_node(i), g.literal_node(-i));
  }
  return g;
}

inline CnfFormula recover_formula(const LiteralClauseGraph& g) {
  std::vector<Clause> clauses(g.num_clauses);
  for (auto [lit_node, clause_node] : g.membership_edges) {
    if (lit_node >= g.num_literal_nodes() || clause_node < g.num_literal_nodes() ||
        clause_node >= g.num_nodes()) {
      throw Error("malformed membership edge (" + std::to_string(lit_node) + ", " +
                  std::to_string(clause_node) + ")");
    }
    clauses[clause_node - g.num_literal_nodes()].push_back(g.literal_of(lit_node));
  }
  return CnfFormula(g.num_vars, std::move(clauses));
}

/// Edge-list dump: "node <id> <type> <label>" then "edge <u> <v> <type>".
inline void write_edge_list(std::ostream& out, const LiteralClauseGraph& g) {
  for (std::size_t v = 0; v < g.num_nodes(); ++v) {
    if (g.node_type(v) == NodeType::Literal) {
      out << "node " << v << " literal " << g.literal_of(v) << '\n';
    } else {
      out << "node " << v << " clause " << (v - g.num_literal_nodes()) << '\n';
    }
  }
  for (auto [a, b] : g.membership_edges) out << "edge " << a << ' ' << b << " membership\n";
  for (auto [a, b] : g.negation_edges) out << "edge " << a << ' ' << b << " negation\n";
}

/// H0 = [X_V, R] with R i.i.d. standard normal, reproducible from `seed`.
inline Matrix make_input_features(const LiteralClauseGraph& g, int random_dim,
                                  std::uint64_t seed) {
  if (random_dim < 0) throw Error("random feature dimension must be >= 0");
  const auto rows = static_cast<Eigen::Index>(g.num_nodes());
  Matrix h(rows, 2 + random_dim);
  h.leftCols(2) = g.node_type_onehot();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (int c = 0; c < random_dim; ++c) h(r, 2 + c) = normal(rng);
  }
  return h;
}

}  // namespace musprune
