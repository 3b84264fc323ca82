#include "prim/scm/factory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace prim::scm {

std::vector<std::size_t> hop_distances(const Dag& dag, const std::vector<std::size_t>& sources) {
  constexpr auto inf = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> d(dag.k, inf);
  const auto ch = dag.children();
  std::vector<std::size_t> frontier;
  for (auto s : sources) {
    d[s] = 0;
    frontier.push_back(s);
  }
  for (std::size_t level = 0; !frontier.empty(); ++level) {
    std::vector<std::size_t> next;
    for (auto n : frontier)
      for (auto c : ch[n])
        if (d[c] == inf) {
          d[c] = level + 1;
          next.push_back(c);
        }
    frontier.swap(next);
  }
  return d;
}

double time_ramp(std::size_t t, std::size_t steps, double factor) {
  if (steps < 2) return 0.0;
  return factor * (2.0 * static_cast<double>(t) / static_cast<double>(steps - 1) - 1.0);
}

double fault_shift(double sigma, std::size_t d) {
  return kFaultMagnitude * sigma * std::pow(kHopAttenuation, static_cast<double>(d));
}

FactoryDraw sample_factory_scenario(std::uint64_t seed, const FactoryConfig& cfg) {
  if (cfg.k_min < 2 || cfg.k_min > cfg.k_max_nodes) throw std::invalid_argument("factory: bad node range");
  if (cfg.k_max < cfg.k_max_nodes + 1) throw std::invalid_argument("factory: k_max must leave room for the time node");
  if (cfg.n_obs < 2 || cfg.n_int < 2) throw std::invalid_argument("factory: windows need >= 2 steps");
  constexpr auto inf = std::numeric_limits<std::size_t>::max();
  Rng rng = make_rng(seed);
  FactoryDraw out;
  const std::size_t k = uniform_int(rng, cfg.k_min, cfg.k_max_nodes);
  const auto family = bernoulli(rng, 0.5) ? GraphFamily::erdos_renyi : GraphFamily::barabasi_albert;
  const double p = uniform(rng, cfg.p_edge_lo, cfg.p_edge_hi);
  // sample_dag takes an in-degree; convert the edge probability back.
  out.dag = sample_dag(rng, k, family, p * static_cast<double>(k - 1));
  out.tau = uniform(rng, cfg.tau_lo, cfg.tau_hi);
  out.binary.resize(k);
  out.mu.resize(k);
  out.sigma.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    out.binary[i] = bernoulli(rng, cfg.binary_fraction);
    if (out.binary[i]) {
      out.mu[i] = bernoulli(rng, 0.5) ? 1.0 : 0.0;
      out.sigma[i] = kBinarySigma;
    } else {
      out.mu[i] = uniform(rng, cfg.mu_lo, cfg.mu_hi);
      out.sigma[i] = uniform(rng, cfg.sigma_lo, cfg.sigma_hi);
    }
  }
  const double factor = static_cast<double>(cfg.k_max) / static_cast<double>(k);
  const auto steps_obs = static_cast<Eigen::Index>(cfg.n_obs);
  const auto steps_int = static_cast<Eigen::Index>(cfg.n_int);

  for (std::size_t q = 0; q < cfg.queries; ++q) {
    std::discrete_distribution<int> count_dist(cfg.target_count_probs.begin(), cfg.target_count_probs.end());
    const std::size_t n_targets = std::min<std::size_t>(static_cast<std::size_t>(count_dist(rng)) + 1, k);
    std::vector<std::size_t> pool(k), targets;
    std::iota(pool.begin(), pool.end(), 0);
    std::shuffle(pool.begin(), pool.end(), rng);
    targets.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_targets));
    std::sort(targets.begin(), targets.end());
    const auto hop = hop_distances(out.dag, targets);

    Eigen::MatrixXd obs(steps_obs, static_cast<Eigen::Index>(k));
    Eigen::MatrixXd intv(steps_int, static_cast<Eigen::Index>(k));
    std::vector<std::uint8_t> flipped(k, 0);
    for (std::size_t i = 0; i < k; ++i) {
      const auto c = static_cast<Eigen::Index>(i);
      if (out.binary[i]) {
        for (Eigen::Index t = 0; t < steps_obs; ++t) obs(t, c) = out.mu[i] + normal(rng, 0.0, kBinarySigma);
        bool flip = false;
        double delay = 0.0;
        if (hop[i] != inf) {
          flip = bernoulli(rng, std::pow(kBinaryFlipBase, static_cast<double>(hop[i])));
          delay = static_cast<double>(hop[i]) * out.tau;
        }
        flipped[i] = flip;
        for (Eigen::Index t = 0; t < steps_int; ++t) {
          const bool on = flip && static_cast<double>(t) >= delay;
          intv(t, c) = (on ? 1.0 - out.mu[i] : out.mu[i]) + normal(rng, 0.0, kBinarySigma);
        }
        continue;
      }
      // Start from the stationary distribution of the AR residual.
      const double stationary = out.sigma[i] / std::sqrt(1.0 - kArCoefficient * kArCoefficient);
      double r = normal(rng, 0.0, stationary);
      for (Eigen::Index t = 0; t < steps_obs; ++t) {
        r = kArCoefficient * r + normal(rng, 0.0, out.sigma[i]);
        obs(t, c) = out.mu[i] + r;
      }
      double shift = 0.0, delay = 0.0;
      if (hop[i] != inf) {
        shift = (bernoulli(rng, 0.5) ? 1.0 : -1.0) * fault_shift(out.sigma[i], hop[i]);
        delay = static_cast<double>(hop[i]) * out.tau;
      }
      for (Eigen::Index t = 0; t < steps_int; ++t) {
        r = kArCoefficient * r + normal(rng, 0.0, out.sigma[i]);
        intv(t, c) = out.mu[i] + r + (static_cast<double>(t) >= delay ? shift : 0.0);
      }
    }

    std::vector<std::size_t> mask_nodes;
    for (std::size_t i = 0; i < k; ++i)
      if (flipped[i]) mask_nodes.push_back(i);
    if (mask_nodes.empty()) {
      const auto t = targets[uniform_index(rng, targets.size())];
      mask_nodes = draw_mask_nodes(rng, out.dag, {t});
    }

    auto norm = normalize_and_pad(obs, intv, k, cfg.k_max);
    Episode e;
    e.k_real = k + 1;
    e.k_max = cfg.k_max;
    e.time_node = true;
    e.obs = std::move(norm.obs);
    e.intv = std::move(norm.intv);
    for (Eigen::Index t = 0; t < steps_obs; ++t)
      e.obs(t, static_cast<Eigen::Index>(k)) = time_ramp(static_cast<std::size_t>(t), cfg.n_obs, factor);
    for (Eigen::Index t = 0; t < steps_int; ++t)
      e.intv(t, static_cast<Eigen::Index>(k)) = time_ramp(static_cast<std::size_t>(t), cfg.n_int, factor);
    e.pad_mask.assign(cfg.k_max, 0);
    for (std::size_t j = k + 1; j < cfg.k_max; ++j) e.pad_mask[j] = 1;
    e.norm_stats = std::move(norm.stats);
    e.mask.assign(cfg.k_max, 0);
    for (auto m : mask_nodes) e.mask[m] = 1;
    e.targets = targets;
    e.family = std::string("factory/") + to_string(family);
    e.seed = seed;
    e.query = q;
    e.kind = "fault";
    out.hops.push_back(hop);
    out.obs_raw.push_back(std::move(obs));
    out.int_raw.push_back(std::move(intv));
    out.queries.push_back(std::move(e));
  }
  return out;
}

}  // namespace prim::scm
