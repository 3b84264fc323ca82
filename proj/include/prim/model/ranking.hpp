#pragma once

#include <span>
#include <string>
#include <vector>

namespace prim {

/// Real nodes ordered by descending score; ties go to the lower index.
struct RankedResult {
  std::vector<std::size_t> order;
  std::vector<double> scores;  // per real node, indexed by node
  std::string method;

  /// 1-based rank of `node`, or 0 when absent.
  std::size_t rank_of(std::size_t node) const;
};

RankedResult rank_by_scores(std::span<const double> scores, std::size_t k_real,
                            std::string method = {});

}  // namespace prim

namespace prim::model {

/// Ranking of the first k_real nodes by softmax probability.
RankedResult predict_ranking(std::span<const double> logits, std::size_t k_real);
RankedResult predict_ranking(std::span<const float> logits, std::size_t k_real);

/// Softmax restricted to the first k_real entries; padded entries are 0.
std::vector<double> node_probabilities(std::span<const double> logits, std::size_t k_real);

}  // namespace prim::model
