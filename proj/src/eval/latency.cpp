#include "prim/eval/latency.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace prim::eval {

double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median: empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

LatencyStats summarize(const std::vector<double>& t) {
  LatencyStats s;
  s.repetitions = t.size();
  s.median_ms = median(t);
  s.min_ms = *std::min_element(t.begin(), t.end());
  s.max_ms = *std::max_element(t.begin(), t.end());
  std::vector<double> dev;
  for (double x : t) dev.push_back(std::fabs(x - s.median_ms));
  s.mad_ms = median(dev);
  return s;
}

std::vector<LatencyStats> latency_benchmark(const model::Mace<float>& model, const std::vector<std::size_t>& k_grid,
                                            std::size_t n_obs, std::size_t n_int, std::size_t repetitions,
                                            std::size_t warmup, std::uint64_t seed) {
  if (repetitions == 0) throw std::invalid_argument("latency_benchmark: repetitions must be >= 1");
  if (n_obs == 0 || n_int == 0) throw std::invalid_argument("latency_benchmark: empty sample sizes");
  const std::size_t k_max = model.config().k_max;
  std::vector<model::EpisodeData<float>> inputs;
  for (auto k : k_grid) {
    if (k < 2 || k > k_max)
      throw std::invalid_argument("latency_benchmark: k=" + std::to_string(k) + " outside [2, k_max]");
    scm::PriorConfig prior;
    prior.k_min = prior.k_max = k;
    prior.n_obs_min = prior.n_obs_max = n_obs;
    prior.n_int_min = prior.n_int_max = n_int;
    prior.queries = 1;
    prior.mechanisms = {scm::MechanismFamily::linear};
    prior.noises = {scm::NoiseFamily::gaussian};
    prior.graphs = {scm::GraphFamily::erdos_renyi};
    auto e = scm::sample_episode(substream(seed, k), prior).queries[0];
    // pad the prior's width out to the model's
    auto norm = scm::normalize_and_pad(e.obs.leftCols(static_cast<Eigen::Index>(k)),
                                       e.intv.leftCols(static_cast<Eigen::Index>(k)), k, k_max);
    e.k_max = k_max;
    e.obs = std::move(norm.obs);
    e.intv = std::move(norm.intv);
    e.pad_mask = std::move(norm.pad_mask);
    e.mask.resize(k_max, 0);
    inputs.push_back(model::to_model_input<float>(e));
  }

  // Rounds visit every k in turn so slow drift in machine speed is shared.
  for (std::size_t i = 0; i < warmup; ++i)
    for (const auto& x : inputs) (void)model.logits(x);
  std::vector<std::vector<double>> times(inputs.size());
  for (std::size_t i = 0; i < repetitions; ++i)
    for (std::size_t j = 0; j < inputs.size(); ++j) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto l = model.logits(inputs[j]);
      const auto t1 = std::chrono::steady_clock::now();
      if (l.size() != k_max) throw std::logic_error("latency_benchmark: unexpected logit count");
      times[j].push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }

  std::vector<LatencyStats> out;
  for (std::size_t j = 0; j < inputs.size(); ++j) {
    auto s = summarize(times[j]);
    s.k = k_grid[j];
    s.n_obs = n_obs;
    s.n_int = n_int;
    out.push_back(s);
  }
  return out;
}

std::string to_csv(const std::vector<LatencyStats>& s) {
  std::string out = std::string(kLatencyCsvHeader) + "\n";
  char buf[256];
  for (const auto& r : s) {
    std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%zu,%.6f,%.6f,%.6f,%.6f\n", r.k, r.n_obs, r.n_int, r.repetitions,
                  r.median_ms, r.min_ms, r.max_ms, r.mad_ms);
    out += buf;
  }
  return out;
}

}  // namespace prim::eval
