#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "prim/core/json_util.hpp"
#include "prim/scm/episode.hpp"
#include "prim/scm/factory.hpp"

namespace prim::eval {

enum class Topology {
  two_node_identifiable,
  two_node_nonidentifiable,
  mediator,
  confounder,
  multi_rca_6node,
  random_sweep,
  factory
};

std::string to_string(Topology t);
Topology topology_from_string(const std::string& s);

struct ScenarioConfig {
  Topology topology = Topology::mediator;
  scm::MechanismFamily mechanism = scm::MechanismFamily::nn;  // ignored by two-node and factory
  std::vector<std::size_t> n_obs_grid = {100};
  std::vector<std::size_t> n_int_grid = {10};
  std::size_t trials = 200;
  std::uint64_t seed = 0;
  std::size_t k_max = 5;       // padded width; must match the model
  std::size_t sweep_nodes = 5; // random_sweep graph size
  double sweep_degree = 2.0;
  bool graph_given = true;     // false marks graph-based baselines unavailable
  std::size_t workers = 1;

  /// Throws std::invalid_argument on empty grids, zero trials or a width too small for the topology.
  void validate() const;
  /// Name used in MetricsTable rows.
  std::string name() const;
};

Json to_json(const ScenarioConfig& c);
ScenarioConfig scenario_config_from_json(const Json& j);

/// Node count of a named topology; random_sweep and factory report their upper bound.
std::size_t topology_nodes(const ScenarioConfig& c);

/// Unpermuted graph and targets of the fixed topologies.
scm::Dag canonical_dag(Topology t);
std::vector<std::size_t> canonical_targets(Topology t);

/// One evaluation episode with the ground truth the baselines may use.
struct ScenarioEpisode {
  scm::Episode episode;       // normalised, padded model input
  scm::Dag dag;               // true graph over baseline columns, in episode labels
  Eigen::MatrixXd obs_raw;    // baseline columns only
  Eigen::MatrixXd int_raw;
  std::vector<std::size_t> mask_nodes;
};

/// Episode `trial` of grid point (n_obs, n_int); a pure function of its arguments.
ScenarioEpisode make_scenario_episode(const ScenarioConfig& c, std::size_t n_obs, std::size_t n_int,
                                      std::size_t trial);

/// Relabels node i as perm[i].
scm::Dag relabel(const scm::Dag& dag, const std::vector<std::size_t>& perm);

}  // namespace prim::eval
