#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "prim/core/rng.hpp"

namespace prim::scm {

enum class GraphFamily { erdos_renyi, barabasi_albert, bipartite, fixed };

std::string to_string(GraphFamily f);
GraphFamily graph_family_from_string(const std::string& s);

struct Dag {
  std::size_t k = 0;
  std::vector<std::vector<std::size_t>> parents;  // sorted ascending
  GraphFamily family = GraphFamily::fixed;
  std::vector<std::size_t> permutation;  // permutation[original] = label
  std::vector<int> part;                 // bipartite side per label, empty otherwise

  std::vector<std::vector<std::size_t>> children() const;
  std::vector<std::size_t> topological_order() const;
  bool is_acyclic() const;
  bool has_edge(std::size_t from, std::size_t to) const;
  std::size_t edge_count() const;
  /// Strict descendants of `node`.
  std::vector<std::size_t> descendants(std::size_t node) const;
  std::vector<std::size_t> ancestors(std::size_t node) const;
  bool is_leaf(std::size_t node) const;
  /// Nodes with at least one child.
  std::vector<std::size_t> non_leaf_nodes() const;
};

/// Builds a DAG from an edge list over labels [0, k); throws if cyclic.
Dag make_dag(std::size_t k, const std::vector<std::pair<std::size_t, std::size_t>>& edges);

/// Edge probability d / (k - 1), clamped to [0, 1].
double edge_probability(std::size_t k, double mean_in_degree);

Dag sample_dag(Rng& rng, std::size_t k, GraphFamily family, double mean_in_degree);

}  // namespace prim::scm
