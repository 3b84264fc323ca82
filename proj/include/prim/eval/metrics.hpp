#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "prim/core/json_util.hpp"
#include "prim/core/rng.hpp"
#include "prim/model/ranking.hpp"

namespace prim::eval {

/// 1 when any of `truth` is among the first k ranks. Throws if k == 0.
double recall_at_k(const RankedResult& ranking, const std::vector<std::size_t>& truth, std::size_t k);
double recall_at_k(const RankedResult& ranking, std::size_t target, std::size_t k);

/// AP@k with denominator min(|truth|, k). Throws on an empty truth set or k == 0.
double map_at_k(const RankedResult& ranking, const std::vector<std::size_t>& truth, std::size_t k);

inline constexpr std::size_t kBootstrapResamples = 500;
inline constexpr double kBootstrapLevel = 0.90;

/// Percentile bootstrap of the mean. The interval is widened, if needed, to
/// contain the sample mean.
std::pair<double, double> bootstrap_ci(const std::vector<double>& values, Rng& rng,
                                       std::size_t resamples = kBootstrapResamples,
                                       double level = kBootstrapLevel);

struct MetricsRow {
  std::string method, scenario;
  std::size_t n_obs = 0, n_int = 0;
  std::string metric;
  double mean = 0.0, ci_low = 0.0, ci_high = 0.0;  // NaN when unavailable

  bool available() const;
  bool operator==(const MetricsRow& o) const;  // NaN compares equal to NaN
};

struct MetricsTable {
  std::vector<MetricsRow> rows;

  /// First matching row; throws std::out_of_range when absent.
  const MetricsRow& find(const std::string& method, std::size_t n_obs, std::size_t n_int,
                         const std::string& metric) const;
  bool operator==(const MetricsTable&) const = default;
};

inline constexpr const char* kCsvHeader = "method,scenario,n_obs,n_int,metric,mean,ci_low,ci_high";

/// Numbers use 17 significant digits so parsing restores them exactly.
std::string to_csv(const MetricsTable& t);
MetricsTable table_from_csv(const std::string& text);
Json to_json(const MetricsTable& t);

}  // namespace prim::eval
