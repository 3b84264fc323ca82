#include "prim/eval/scenarios.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace prim::eval {

namespace {

struct Named {
  Topology t;
  const char* name;
};
constexpr Named kNames[] = {{Topology::two_node_identifiable, "two_node_identifiable"},
                            {Topology::two_node_nonidentifiable, "two_node_nonidentifiable"},
                            {Topology::mediator, "mediator"},
                            {Topology::confounder, "confounder"},
                            {Topology::multi_rca_6node, "multi_rca_6node"},
                            {Topology::random_sweep, "random_sweep"},
                            {Topology::factory, "factory"}};

// Symptom node of each fixed topology, in canonical labels.
std::size_t canonical_mask(Topology t) {
  switch (t) {
    case Topology::two_node_identifiable:
    case Topology::two_node_nonidentifiable:
      return 1;
    case Topology::mediator:
    case Topology::confounder:
      return 2;
    case Topology::multi_rca_6node:
      return 5;
    default:
      throw std::invalid_argument("canonical_mask: topology has no fixed mask");
  }
}

scm::MechanismFamily mechanism_for(const ScenarioConfig& c) {
  if (c.topology == Topology::two_node_identifiable) return scm::MechanismFamily::tanh;
  if (c.topology == Topology::two_node_nonidentifiable) return scm::MechanismFamily::linear;
  return c.mechanism;
}

bool fixed_topology(Topology t) { return t != Topology::random_sweep && t != Topology::factory; }

scm::Episode assemble(const Eigen::MatrixXd& obs_raw, const Eigen::MatrixXd& int_raw, std::size_t k_max,
                      const std::vector<std::size_t>& mask_nodes, std::vector<std::size_t> targets,
                      const std::string& family, std::uint64_t seed) {
  const auto k = static_cast<std::size_t>(obs_raw.cols());
  auto norm = scm::normalize_and_pad(obs_raw, int_raw, k, k_max);
  scm::Episode e;
  e.k_real = k;
  e.k_max = k_max;
  e.obs = std::move(norm.obs);
  e.intv = std::move(norm.intv);
  e.pad_mask = std::move(norm.pad_mask);
  e.norm_stats = std::move(norm.stats);
  e.mask.assign(k_max, 0);
  for (auto m : mask_nodes) e.mask[m] = 1;
  std::sort(targets.begin(), targets.end());
  e.targets = std::move(targets);
  e.family = family;
  e.seed = seed;
  e.kind = scm::to_string(scm::InterventionKind::weight_change);
  return e;
}

ScenarioEpisode factory_episode(const ScenarioConfig& c, std::size_t n_obs, std::size_t n_int,
                                std::uint64_t seed) {
  scm::FactoryConfig fc;
  fc.k_max = c.k_max;
  fc.k_max_nodes = std::min<std::size_t>(fc.k_max_nodes, c.k_max - 1);
  fc.k_min = std::min(fc.k_min, fc.k_max_nodes);
  fc.n_obs = n_obs;
  fc.n_int = n_int;
  fc.queries = 1;
  auto draw = scm::sample_factory_scenario(seed, fc);
  ScenarioEpisode out;
  out.episode = std::move(draw.queries[0]);
  out.dag = std::move(draw.dag);
  out.obs_raw = std::move(draw.obs_raw[0]);
  out.int_raw = std::move(draw.int_raw[0]);
  for (std::size_t j = 0; j < out.episode.k_max; ++j)
    if (out.episode.mask[j]) out.mask_nodes.push_back(j);
  return out;
}

}  // namespace

std::string to_string(Topology t) {
  for (const auto& n : kNames)
    if (n.t == t) return n.name;
  throw std::invalid_argument("unknown topology");
}

Topology topology_from_string(const std::string& s) {
  for (const auto& n : kNames)
    if (s == n.name) return n.t;
  throw std::invalid_argument("unknown topology '" + s + "'");
}

std::size_t topology_nodes(const ScenarioConfig& c) {
  switch (c.topology) {
    case Topology::two_node_identifiable:
    case Topology::two_node_nonidentifiable:
      return 2;
    case Topology::mediator:
    case Topology::confounder:
      return 3;
    case Topology::multi_rca_6node:
      return 6;
    case Topology::random_sweep:
      return c.sweep_nodes;
    case Topology::factory:
      return 3;  // two sensors and the time column at the least
  }
  return 0;
}

void ScenarioConfig::validate() const {
  if (n_obs_grid.empty() || n_int_grid.empty()) throw std::invalid_argument("scenario: empty sample-size grid");
  for (auto n : n_obs_grid)
    if (n < 2) throw std::invalid_argument("scenario: n_obs must be >= 2");
  for (auto n : n_int_grid)
    if (n < 1) throw std::invalid_argument("scenario: n_int must be >= 1");
  if (trials == 0) throw std::invalid_argument("scenario: trials must be >= 1");
  if (topology == Topology::random_sweep && sweep_nodes < 2)
    throw std::invalid_argument("scenario: random_sweep needs at least 2 nodes");
  if (topology_nodes(*this) > k_max)
    throw std::invalid_argument("scenario: k_max " + std::to_string(k_max) + " is too small for " +
                                to_string(topology));
  if (topology == Topology::random_sweep || topology == Topology::multi_rca_6node || topology == Topology::mediator ||
      topology == Topology::confounder)
    if (mechanism != scm::MechanismFamily::nn && mechanism != scm::MechanismFamily::gp &&
        mechanism != scm::MechanismFamily::linear)
      throw std::invalid_argument("scenario: mechanism must be nn, gp or linear");
  if (workers == 0) throw std::invalid_argument("scenario: workers must be >= 1");
}

std::string ScenarioConfig::name() const {
  switch (topology) {
    case Topology::two_node_identifiable:
    case Topology::two_node_nonidentifiable:
    case Topology::factory:
      return to_string(topology);
    case Topology::random_sweep:
      return to_string(topology) + "_k" + std::to_string(sweep_nodes) + "_" + scm::to_string(mechanism);
    default:
      return to_string(topology) + "_" + scm::to_string(mechanism);
  }
}

Json to_json(const ScenarioConfig& c) {
  return Json{{"topology", to_string(c.topology)},
              {"mechanism", scm::to_string(c.mechanism)},
              {"n_obs_grid", c.n_obs_grid},
              {"n_int_grid", c.n_int_grid},
              {"trials", c.trials},
              {"seed", c.seed},
              {"k_max", c.k_max},
              {"sweep_nodes", c.sweep_nodes},
              {"sweep_degree", c.sweep_degree},
              {"graph_given", c.graph_given},
              {"workers", c.workers}};
}

ScenarioConfig scenario_config_from_json(const Json& j) {
  static const char* known[] = {"topology",    "mechanism",    "n_obs_grid",  "n_int_grid", "trials", "seed",
                                "k_max",       "sweep_nodes",  "sweep_degree", "graph_given", "workers"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return it.key() == k; }) ==
        std::end(known))
      throw std::invalid_argument("scenario config: unknown key '" + it.key() + "'");
  ScenarioConfig c;
  try {
    if (j.contains("topology")) c.topology = topology_from_string(j.at("topology").get<std::string>());
    if (j.contains("mechanism")) c.mechanism = scm::mechanism_family_from_string(j.at("mechanism").get<std::string>());
    if (j.contains("n_obs_grid")) c.n_obs_grid = j.at("n_obs_grid").get<std::vector<std::size_t>>();
    if (j.contains("n_int_grid")) c.n_int_grid = j.at("n_int_grid").get<std::vector<std::size_t>>();
    if (j.contains("trials")) c.trials = j.at("trials").get<std::size_t>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("k_max")) c.k_max = j.at("k_max").get<std::size_t>();
    if (j.contains("sweep_nodes")) c.sweep_nodes = j.at("sweep_nodes").get<std::size_t>();
    if (j.contains("sweep_degree")) c.sweep_degree = j.at("sweep_degree").get<double>();
    if (j.contains("graph_given")) c.graph_given = j.at("graph_given").get<bool>();
    if (j.contains("workers")) c.workers = j.at("workers").get<std::size_t>();
  } catch (const Json::exception& e) {
    throw std::invalid_argument(std::string("scenario config: ") + e.what());
  }
  c.validate();
  return c;
}

scm::Dag canonical_dag(Topology t) {
  switch (t) {
    case Topology::two_node_identifiable:
    case Topology::two_node_nonidentifiable:
      return scm::make_dag(2, {{0, 1}});
    case Topology::mediator:  // X=0, Z=1, Y=2
      return scm::make_dag(3, {{0, 1}, {0, 2}, {1, 2}});
    case Topology::confounder:  // X=0, Z=1, Y=2
      return scm::make_dag(3, {{1, 0}, {1, 2}, {0, 2}});
    case Topology::multi_rca_6node:  // X1..X6 = 0..5
      return scm::make_dag(6, {{0, 2}, {1, 2}, {1, 3}, {2, 5}, {3, 5}, {4, 5}});
    default:
      throw std::invalid_argument("canonical_dag: topology is not fixed");
  }
}

std::vector<std::size_t> canonical_targets(Topology t) {
  if (t == Topology::multi_rca_6node) return {0, 1};
  if (!fixed_topology(t)) throw std::invalid_argument("canonical_targets: topology is not fixed");
  return {0};
}

scm::Dag relabel(const scm::Dag& dag, const std::vector<std::size_t>& perm) {
  if (perm.size() != dag.k) throw std::invalid_argument("relabel: permutation size mismatch");
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t j = 0; j < dag.k; ++j)
    for (auto p : dag.parents[j]) edges.emplace_back(perm[p], perm[j]);
  auto out = scm::make_dag(dag.k, edges);
  out.family = dag.family;
  out.permutation = perm;
  return out;
}

ScenarioEpisode make_scenario_episode(const ScenarioConfig& c, std::size_t n_obs, std::size_t n_int,
                                      std::size_t trial) {
  // The SCM of a trial is shared across grid points; the samples are not.
  const std::uint64_t scm_seed = substream(substream(c.seed, "scm"), trial);
  const std::uint64_t data_seed =
      substream(substream(substream(substream(c.seed, "data"), trial), n_obs), n_int);
  if (c.topology == Topology::factory) return factory_episode(c, n_obs, n_int, data_seed);

  Rng rng = make_rng(scm_seed);
  scm::Dag dag;
  std::vector<std::size_t> targets, mask_nodes;
  if (fixed_topology(c.topology)) {
    const auto base = canonical_dag(c.topology);
    std::vector<std::size_t> perm(base.k);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    dag = relabel(base, perm);
    for (auto t : canonical_targets(c.topology)) targets.push_back(perm[t]);
    mask_nodes = {perm[canonical_mask(c.topology)]};
  } else {
    for (int attempt = 0;; ++attempt) {
      if (attempt == 100) throw std::runtime_error("random_sweep: no graph with a non-leaf node after 100 draws");
      dag = scm::sample_dag(rng, c.sweep_nodes, scm::GraphFamily::erdos_renyi, c.sweep_degree);
      if (!dag.non_leaf_nodes().empty()) break;
    }
    const auto eligible = dag.non_leaf_nodes();
    targets = {eligible[uniform_index(rng, eligible.size())]};
    mask_nodes = scm::draw_mask_nodes(rng, dag, targets);
  }

  const auto noise = scm::sample_noise_spec(rng, scm::NoiseFamily::gaussian);
  auto scm = scm::sample_scm(rng, dag, mechanism_for(c), noise);
  for (auto& n : scm.nodes) n.confounder_weight = 0.0;  // causally sufficient

  Rng drng = make_rng(data_seed);
  scm::GpMemory memory;
  const Eigen::MatrixXd obs_raw = scm::sample_observational(drng, scm, n_obs, &memory);
  const auto spec = scm::draw_intervention(drng, scm, targets, scm::InterventionKind::weight_change, obs_raw);
  const auto scm_int = scm::apply_intervention(drng, scm, spec);
  const Eigen::MatrixXd int_raw = scm::sample_interventional(drng, scm_int, n_int, &memory);

  ScenarioEpisode out;
  out.episode = assemble(obs_raw, int_raw, c.k_max, mask_nodes, targets,
                         scm::to_string(scm.family) + "/" + to_string(c.topology), data_seed);
  out.episode.query = trial;
  out.dag = std::move(dag);
  out.obs_raw = obs_raw;
  out.int_raw = int_raw;
  out.mask_nodes = std::move(mask_nodes);
  return out;
}

}  // namespace prim::eval
