#pragma once

#include <string>
#include <vector>

#include "prim/eval/metrics.hpp"
#include "prim/eval/scenarios.hpp"
#include "prim/model/mace.hpp"

namespace prim::eval {

/// Method names accepted by the runner; "eps" is an alias of "eps_diag".
inline const std::vector<std::string> kMethods = {"traversal", "circa", "corr", "eps_diag", "prim"};

std::string canonical_method(const std::string& name);
bool needs_graph(const std::string& method);

/// Metrics reported for every method: recall@1, recall@3 and map@2.
const std::vector<std::string>& metric_names();

/// Ranking of one method on one episode; throws if "prim" is asked without a model.
RankedResult rank_episode(const std::string& method, const ScenarioEpisode& ep,
                          const model::Mace<float>* model);

/// Per-episode metric values in metric_names() order.
std::vector<double> episode_metrics(const RankedResult& r, const std::vector<std::size_t>& targets);

/// Every method sees the same episodes at a grid point. Rows are ordered by
/// n_obs, n_int, method, metric. Graph-based methods yield NaN rows when the
/// graph is not given.
MetricsTable run_scenario(const ScenarioConfig& c, const std::vector<std::string>& methods,
                          const model::Mace<float>* model = nullptr);

}  // namespace prim::eval
