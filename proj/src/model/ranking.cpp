#include "prim/model/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace prim {

std::size_t RankedResult::rank_of(std::size_t node) const {
  for (std::size_t i = 0; i < order.size(); ++i)
    if (order[i] == node) return i + 1;
  return 0;
}

RankedResult rank_by_scores(std::span<const double> scores, std::size_t k_real, std::string method) {
  if (k_real == 0) throw std::invalid_argument("ranking needs at least one real node");
  if (scores.size() < k_real) throw std::invalid_argument("fewer scores than real nodes");
  RankedResult r;
  r.method = std::move(method);
  r.scores.assign(scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(k_real));
  r.order.resize(k_real);
  std::iota(r.order.begin(), r.order.end(), std::size_t{0});
  // NaN sorts last so a broken score never outranks a finite one.
  auto key = [&](std::size_t i) {
    const double s = r.scores[i];
    return std::isnan(s) ? -std::numeric_limits<double>::infinity() : s;
  };
  std::stable_sort(r.order.begin(), r.order.end(), [&](std::size_t a, std::size_t b) { return key(a) > key(b); });
  return r;
}

}  // namespace prim

namespace prim::model {

std::vector<double> node_probabilities(std::span<const double> logits, std::size_t k_real) {
  if (k_real == 0 || logits.size() < k_real) throw std::invalid_argument("node_probabilities: bad k_real");
  std::vector<double> p(logits.size(), 0.0);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < k_real; ++i) mx = std::max(mx, logits[i]);
  double z = 0.0;
  for (std::size_t i = 0; i < k_real; ++i) z += (p[i] = std::exp(logits[i] - mx));
  for (std::size_t i = 0; i < k_real; ++i) p[i] /= z;
  return p;
}

RankedResult predict_ranking(std::span<const double> logits, std::size_t k_real) {
  if (k_real == 0) throw std::invalid_argument("predict_ranking: k_real must be >= 1");
  return rank_by_scores(node_probabilities(logits, k_real), k_real, "prim");
}

RankedResult predict_ranking(std::span<const float> logits, std::size_t k_real) {
  std::vector<double> d(logits.begin(), logits.end());
  return predict_ranking(d, k_real);
}

}  // namespace prim::model
