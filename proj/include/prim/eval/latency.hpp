#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prim/model/mace.hpp"

namespace prim::eval {

struct LatencyStats {
  std::size_t k = 0, n_obs = 0, n_int = 0, repetitions = 0;
  double median_ms = 0.0, min_ms = 0.0, max_ms = 0.0;
  double mad_ms = 0.0;  // median absolute deviation
};

/// Median of a non-empty sample (mean of the middle pair for even sizes).
double median(std::vector<double> v);
/// Summary of raw timings in milliseconds.
LatencyStats summarize(const std::vector<double>& times_ms);

/// Wall time of a single-episode forward pass per k, on one thread. Episodes
/// are drawn from the training prior with k real nodes padded to the model's
/// k_max. Each round times every k once; `warmup` untimed rounds come first.
std::vector<LatencyStats> latency_benchmark(const model::Mace<float>& model, const std::vector<std::size_t>& k_grid,
                                            std::size_t n_obs, std::size_t n_int, std::size_t repetitions,
                                            std::size_t warmup = 2, std::uint64_t seed = 0);

inline constexpr const char* kLatencyCsvHeader = "k,n_obs,n_int,repetitions,median_ms,min_ms,max_ms,mad_ms";
std::string to_csv(const std::vector<LatencyStats>& s);

}  // namespace prim::eval
