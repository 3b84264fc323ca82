#pragma once

#include <array>
#include <cstdint>

#include "prim/scm/episode.hpp"

namespace prim::scm {

struct FactoryConfig {
  std::size_t k_min = 12, k_max_nodes = 18;  // real sensor count range
  std::size_t k_max = 20;                    // model width; needs k_max_nodes + 1
  double p_edge_lo = 0.2, p_edge_hi = 0.5;
  double binary_fraction = 0.3;
  double tau_lo = 1.0, tau_hi = 3.0;         // delay per hop, in steps
  std::array<double, 3> target_count_probs = {0.70, 0.20, 0.10};
  std::size_t n_obs = 100, n_int = 20;       // window lengths in steps
  std::size_t queries = 4;
  double sigma_lo = 0.05, sigma_hi = 1.0;    // continuous-node innovation std
  double mu_lo = -5.0, mu_hi = 5.0;
};

inline constexpr double kArCoefficient = 0.95;
inline constexpr double kFaultMagnitude = 15.0;   // in units of sigma_i
inline constexpr double kHopAttenuation = 0.30;
inline constexpr double kBinaryFlipBase = 0.75;
inline constexpr double kBinarySigma = 0.005;

struct FactoryDraw {
  Dag dag;
  std::vector<std::uint8_t> binary;      // per sensor
  std::vector<double> mu, sigma;
  double tau = 0.0;
  // per query
  std::vector<std::vector<std::size_t>> hops;  // SIZE_MAX where unreachable from T
  std::vector<Eigen::MatrixXd> obs_raw, int_raw;  // sensor columns only
  std::vector<Episode> queries;
};

/// Shortest directed hop distance from any node of `sources`; SIZE_MAX when unreachable.
std::vector<std::size_t> hop_distances(const Dag& dag, const std::vector<std::size_t>& sources);

/// Value of the time-as-feature ramp at step t of a window of length steps.
double time_ramp(std::size_t t, std::size_t steps, double factor);

/// Shift applied to a faulty continuous node at hop distance d.
double fault_shift(double sigma, std::size_t d);

FactoryDraw sample_factory_scenario(std::uint64_t seed, const FactoryConfig& config);

}  // namespace prim::scm
