#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "prim/core/json_util.hpp"
#include "prim/core/rng.hpp"
#include "prim/scm/dag.hpp"

// Small discrete Bayesian causal models for exact root-cause posteriors.
namespace prim::oracle {

inline constexpr std::size_t kMaxNodes = 3;
inline constexpr std::size_t kMaxCard = 4;
inline constexpr std::size_t kMaxGraphs = 25;
inline constexpr std::size_t kMaxGridPoints = 10000;

/// Conditional probability table of one node: one row per parent
/// configuration (mixed radix over the sorted parent list, first parent most
/// significant), `card` entries per row.
struct Cpt {
  std::vector<double> table;
  double weight = 1.0;
};

struct BcmGraph {
  scm::Dag dag;
  double prob = 1.0;
  std::vector<std::vector<Cpt>> mechanisms;     // per node: observational candidates
  std::vector<std::vector<Cpt>> interventions;  // per node: candidates under intervention
};

enum class TargetPriorKind { uniform_non_leaf, uniform_singletons, explicit_sets };

struct TargetSet {
  std::vector<std::size_t> nodes;  // sorted
  double weight = 1.0;
};

struct DiscreteBcm {
  std::vector<std::size_t> cards;
  std::vector<BcmGraph> graphs;
  TargetPriorKind target_prior = TargetPriorKind::uniform_non_leaf;
  std::vector<TargetSet> explicit_targets;

  std::size_t k() const { return cards.size(); }
  /// p(T | G) for graph g; sets with zero mass are omitted.
  std::vector<TargetSet> targets_for(std::size_t g) const;
  /// Every target set with positive prior under some graph, in a stable order.
  std::vector<std::vector<std::size_t>> candidate_targets() const;
  std::size_t rows(std::size_t g, std::size_t node) const;
};

/// Throws std::invalid_argument naming the first violated invariant.
void validate(const DiscreteBcm& bcm);

DiscreteBcm bcm_from_json(const Json& j);
Json to_json(const DiscreteBcm& bcm);

/// Binary two-node model with both orientations equally likely. Every table
/// row is a Bernoulli with parameter drawn from `levels` (uniform weights);
/// interventions draw from the same grid.
DiscreteBcm symmetric_two_node(const std::vector<double>& levels);

/// Rows of node values, one entry per node.
using DiscreteData = std::vector<std::vector<int>>;

/// One fully specified world: graph, observational and interventional tables.
struct BcmWorld {
  std::size_t graph = 0;
  std::vector<std::size_t> obs_choice;  // index into mechanisms per node
  std::vector<std::size_t> targets;
  std::vector<std::vector<double>> int_tables;  // per node
  std::vector<std::vector<double>> obs_tables;
};

/// Draws G, f_obs, T and f_int from the prior.
BcmWorld sample_world(const DiscreteBcm& bcm, Rng& rng);
/// Ancestral sampling of n rows from the observational or interventional
/// tables of a world.
DiscreteData sample_data(const DiscreteBcm& bcm, const BcmWorld& world, std::size_t n, bool interventional,
                         Rng& rng);

}  // namespace prim::oracle
