#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <vector>

#include "prim/model/ranking.hpp"
#include "prim/scm/dag.hpp"

// Classical root-cause baselines. All inputs are (rows x real nodes) matrices;
// callers strip padding columns first.
namespace prim::baselines {

inline constexpr double kTraversalThreshold = 3.0;
inline constexpr double kRidge = 1e-6;

/// |mean(int_j) - mean(obs_j)| / max(std(obs_j), 1e-8) per column.
std::vector<double> anomaly_score(const Eigen::MatrixXd& obs, const Eigen::MatrixXd& intv);

/// Upstream walk from the mask over anomalous parents. Anomalous nodes reached
/// from m with no anomalous parent rank first, then the other anomalous nodes,
/// then the rest; score breaks ties within each tier.
RankedResult traversal(const scm::Dag& graph, const Eigen::MatrixXd& obs, const Eigen::MatrixXd& intv,
                       const std::vector<std::size_t>& mask_nodes,
                       double threshold = kTraversalThreshold);

/// Per node, least squares on its parents fitted on obs; score is the mean
/// absolute standardised residual of the int rows.
RankedResult circa_score(const scm::Dag& graph, const Eigen::MatrixXd& obs, const Eigen::MatrixXd& intv);

/// |Pearson(int_j, int_m)|; m itself never takes rank 1.
RankedResult correlation_rank(const Eigen::MatrixXd& obs, const Eigen::MatrixXd& intv, std::size_t m);

/// Per-column energy distance between obs and int, in obs standard-deviation
/// units.
RankedResult epsilon_diagnosis(const Eigen::MatrixXd& obs, const Eigen::MatrixXd& intv);

/// V-statistic energy distance 2E|X-Y| - E|X-X'| - E|Y-Y'| between samples.
double energy_distance(std::vector<double> x, std::vector<double> y);

}  // namespace prim::baselines
