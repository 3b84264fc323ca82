#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "prim/scm/episode.hpp"

namespace prim::scm {

std::vector<std::uint8_t> Episode::valid() const {
  std::vector<std::uint8_t> v(k_max, 0);
  for (std::size_t j = 0; j < k_real && j < k_max; ++j) v[j] = 1;
  return v;
}

double scale_factor(const Episode& e) {
  const std::size_t scored = e.time_node ? e.k_real - 1 : e.k_real;
  return static_cast<double>(e.k_max) / static_cast<double>(std::max<std::size_t>(scored, 1));
}

void validate_episode(const Episode& e, bool require_mask_in_descendants, const Dag* dag) {
  auto fail = [](const std::string& what) { throw std::invalid_argument("invalid episode: " + what); };
  if (e.k_real == 0 || e.k_real > e.k_max) fail("k_real out of range");
  if (static_cast<std::size_t>(e.obs.cols()) != e.k_max || static_cast<std::size_t>(e.intv.cols()) != e.k_max)
    fail("column count differs from k_max");
  if (e.obs.rows() < 1 || e.intv.rows() < 1) fail("empty dataset");
  if (e.mask.size() != e.k_max || e.pad_mask.size() != e.k_max) fail("mask length");
  const double bound = kClip * scale_factor(e) * (1 + 1e-12);
  for (const Eigen::MatrixXd* m : {&e.obs, &e.intv}) {
    if (!m->allFinite()) fail("non-finite value");
    for (std::size_t j = 0; j < e.k_max; ++j) {
      const auto col = m->col(static_cast<Eigen::Index>(j));
      if (j >= e.k_real) {
        if ((col.array() != 0.0).any()) fail("padded column " + std::to_string(j) + " is not zero");
      } else if (col.cwiseAbs().maxCoeff() > bound) {
        fail("value outside clip range in column " + std::to_string(j));
      }
    }
  }
  bool any = false;
  for (std::size_t j = 0; j < e.k_max; ++j) {
    if (e.pad_mask[j] != (j >= e.k_real ? 1 : 0)) fail("pad_mask inconsistent with k_real");
    if (e.mask[j]) {
      any = true;
      if (j >= e.k_real) fail("mask bit on padded node");
    }
  }
  if (!any) fail("mask has no set bit");
  if (e.targets.empty()) fail("no targets");
  for (auto t : e.targets)
    if (t >= e.k_real) fail("target out of range");
  if (require_mask_in_descendants && dag) {
    for (std::size_t j = 0; j < e.k_real; ++j) {
      if (!e.mask[j]) continue;
      bool ok = false;
      for (auto t : e.targets) {
        auto d = dag->descendants(t);
        ok |= j == t || std::find(d.begin(), d.end(), j) != d.end();
      }
      if (!ok) fail("mask node " + std::to_string(j) + " is not a descendant-or-self of T");
    }
  }
}

std::vector<std::size_t> draw_mask_nodes(Rng& rng, const Dag& dag,
                                         const std::vector<std::size_t>& targets) {
  std::vector<std::vector<std::size_t>> sets;
  for (auto t : targets) {
    auto s = dag.descendants(t);
    s.push_back(t);
    std::sort(s.begin(), s.end());
    sets.push_back(std::move(s));
  }
  if (sets.size() == 1) return {sets[0][uniform_index(rng, sets[0].size())]};
  std::vector<std::size_t> common = sets[0];
  for (std::size_t i = 1; i < sets.size(); ++i) {
    std::vector<std::size_t> next;
    std::set_intersection(common.begin(), common.end(), sets[i].begin(), sets[i].end(),
                          std::back_inserter(next));
    common.swap(next);
  }
  if (!common.empty()) return {common[uniform_index(rng, common.size())]};
  std::vector<std::size_t> out;
  for (const auto& s : sets) out.push_back(s[uniform_index(rng, s.size())]);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

EpisodeDraw sample_episode(std::uint64_t seed, const PriorConfig& cfg) {
  if (cfg.k_min < 2 || cfg.k_min > cfg.k_max) throw std::invalid_argument("prior: bad node range");
  if (cfg.queries == 0) throw std::invalid_argument("prior: queries must be >= 1");
  if (cfg.graphs.empty() || cfg.mechanisms.empty() || cfg.noises.empty())
    throw std::invalid_argument("prior: empty family list");
  Rng rng = make_rng(seed);
  const std::size_t k = uniform_int(rng, cfg.k_min, cfg.k_max);
  const auto gfam = cfg.graphs[uniform_index(rng, cfg.graphs.size())];
  const double degree = uniform(rng, cfg.degree_min, cfg.degree_max);
  const auto mfam = cfg.mechanisms[uniform_index(rng, cfg.mechanisms.size())];
  const auto noise = sample_noise_spec(rng, cfg.noises[uniform_index(rng, cfg.noises.size())]);

  Dag dag;
  std::vector<std::size_t> eligible;
  int attempt = 0;
  for (;; ++attempt) {
    if (attempt == 100) throw std::runtime_error("prior: no graph with enough non-leaf nodes after 100 draws");
    dag = sample_dag(rng, k, gfam, degree);
    eligible = dag.non_leaf_nodes();
    if (eligible.size() >= std::max<std::size_t>(cfg.targets_per_scenario, 1)) break;
  }

  EpisodeDraw draw;
  draw.scm = sample_scm(rng, dag, mfam, noise);
  const std::string family = to_string(mfam) + "/" + to_string(gfam) + "/" + to_string(noise.family);
  for (std::size_t q = 0; q < cfg.queries; ++q) {
    const std::size_t n_obs = uniform_int(rng, cfg.n_obs_min, cfg.n_obs_max);
    const std::size_t n_int = uniform_int(rng, cfg.n_int_min, cfg.n_int_max);
    std::vector<std::size_t> pool = eligible, targets;
    for (std::size_t i = 0; i < cfg.targets_per_scenario; ++i) {
      const auto pick = uniform_index(rng, pool.size());
      targets.push_back(pool[pick]);
      pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    std::sort(targets.begin(), targets.end());
    const auto kind = sample_intervention_kind(rng, cfg.kind_probs);

    GpMemory memory;
    const Eigen::MatrixXd obs_raw = sample_observational(rng, draw.scm, n_obs, &memory);
    auto spec = draw_intervention(rng, draw.scm, targets, kind, obs_raw);
    const ScmInstance scm_int = apply_intervention(rng, draw.scm, spec);
    const Eigen::MatrixXd int_raw = sample_interventional(rng, scm_int, n_int, &memory);
    const auto mask_nodes = draw_mask_nodes(rng, dag, targets);

    auto norm = normalize_and_pad(obs_raw, int_raw, k, cfg.k_max);
    Episode e;
    e.k_real = k;
    e.k_max = cfg.k_max;
    e.obs = std::move(norm.obs);
    e.intv = std::move(norm.intv);
    e.pad_mask = std::move(norm.pad_mask);
    e.norm_stats = std::move(norm.stats);
    e.mask.assign(cfg.k_max, 0);
    for (auto m : mask_nodes) e.mask[m] = 1;
    e.targets = targets;
    e.family = family;
    e.seed = seed;
    e.query = q;
    e.kind = to_string(kind);
    draw.interventions.push_back(std::move(spec));
    draw.queries.push_back(std::move(e));
  }
  return draw;
}

}  // namespace prim::scm
