#include "prim/oracle/bcm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace prim::oracle {

namespace {

constexpr double kSumTol = 1e-9;

[[noreturn]] void fail(const std::string& what) { throw std::invalid_argument("invalid BCM: " + what); }

double weight_sum(const std::vector<Cpt>& c) {
  double s = 0.0;
  for (const auto& x : c) s += x.weight;
  return s;
}

std::size_t draw_index(Rng& rng, const std::vector<double>& w) {
  double total = 0.0;
  for (double x : w) total += x;
  if (!(total > 0.0)) throw std::invalid_argument("draw from zero-mass distribution");
  const double u = uniform(rng, 0.0, total);
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    acc += w[i];
    if (u < acc) return i;
  }
  // u == total up to rounding: last positive entry
  for (std::size_t i = w.size(); i-- > 0;)
    if (w[i] > 0.0) return i;
  return w.size() - 1;
}

}  // namespace

std::size_t DiscreteBcm::rows(std::size_t g, std::size_t node) const {
  std::size_t r = 1;
  for (auto p : graphs.at(g).dag.parents.at(node)) r *= cards.at(p);
  return r;
}

std::vector<TargetSet> DiscreteBcm::targets_for(std::size_t g) const {
  std::vector<TargetSet> out;
  switch (target_prior) {
    case TargetPriorKind::uniform_non_leaf: {
      const auto nl = graphs.at(g).dag.non_leaf_nodes();
      for (auto j : nl) out.push_back({{j}, 1.0 / static_cast<double>(nl.size())});
      break;
    }
    case TargetPriorKind::uniform_singletons:
      for (std::size_t j = 0; j < k(); ++j) out.push_back({{j}, 1.0 / static_cast<double>(k())});
      break;
    case TargetPriorKind::explicit_sets:
      for (const auto& t : explicit_targets)
        if (t.weight > 0.0) out.push_back(t);
      break;
  }
  return out;
}

std::vector<std::vector<std::size_t>> DiscreteBcm::candidate_targets() const {
  std::vector<std::vector<std::size_t>> all;
  for (std::size_t g = 0; g < graphs.size(); ++g) {
    if (graphs[g].prob <= 0.0) continue;
    for (const auto& t : targets_for(g)) all.push_back(t.nodes);
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return a.size() != b.size() ? a.size() < b.size() : a < b;
  });
  all.erase(std::unique(all.begin(), all.end()), all.end());
  return all;
}

void validate(const DiscreteBcm& bcm) {
  const std::size_t k = bcm.k();
  if (k == 0 || k > kMaxNodes) fail("node count must be in [1, " + std::to_string(kMaxNodes) + "]");
  for (auto c : bcm.cards)
    if (c == 0 || c > kMaxCard) fail("cardinality must be in [1, " + std::to_string(kMaxCard) + "]");
  if (bcm.graphs.empty() || bcm.graphs.size() > kMaxGraphs)
    fail("graph count must be in [1, " + std::to_string(kMaxGraphs) + "]");
  double gsum = 0.0;
  for (std::size_t g = 0; g < bcm.graphs.size(); ++g) {
    const auto& gr = bcm.graphs[g];
    const std::string where = "graph " + std::to_string(g);
    if (gr.prob < 0.0) fail(where + ": negative probability");
    gsum += gr.prob;
    if (gr.dag.k != k || gr.dag.parents.size() != k) fail(where + ": node count");
    if (!gr.dag.is_acyclic()) fail(where + ": cyclic");
    if (gr.mechanisms.size() != k || gr.interventions.size() != k) fail(where + ": per-node grids");
    std::size_t points = 1;
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t rows = bcm.rows(g, j);
      for (int kind = 0; kind < 2; ++kind) {
        const auto& list = kind == 0 ? gr.mechanisms[j] : gr.interventions[j];
        const std::string w = where + " node " + std::to_string(j) + (kind == 0 ? " mechanism" : " intervention");
        if (kind == 0 && list.empty()) fail(w + ": empty grid");
        if (!list.empty() && std::abs(weight_sum(list) - 1.0) > kSumTol) fail(w + ": weights do not sum to 1");
        for (const auto& cpt : list) {
          if (cpt.weight < 0.0) fail(w + ": negative weight");
          if (cpt.table.size() != rows * bcm.cards[j]) fail(w + ": table size");
          for (std::size_t r = 0; r < rows; ++r) {
            double s = 0.0;
            for (std::size_t v = 0; v < bcm.cards[j]; ++v) {
              const double p = cpt.table[r * bcm.cards[j] + v];
              if (!(p >= 0.0)) fail(w + ": negative or NaN probability");
              s += p;
            }
            if (std::abs(s - 1.0) > kSumTol) fail(w + ": row " + std::to_string(r) + " does not sum to 1");
          }
        }
      }
      points *= gr.mechanisms[j].size();
      if (points > kMaxGridPoints) fail(where + ": more than " + std::to_string(kMaxGridPoints) + " grid points");
    }
  }
  if (std::abs(gsum - 1.0) > kSumTol) fail("graph probabilities do not sum to 1");
  if (bcm.target_prior == TargetPriorKind::explicit_sets) {
    if (bcm.explicit_targets.empty()) fail("explicit target prior is empty");
    double s = 0.0;
    for (const auto& t : bcm.explicit_targets) {
      if (t.nodes.empty()) fail("empty target set");
      if (!std::is_sorted(t.nodes.begin(), t.nodes.end()) ||
          std::adjacent_find(t.nodes.begin(), t.nodes.end()) != t.nodes.end())
        fail("target sets must be sorted and duplicate-free");
      for (auto n : t.nodes)
        if (n >= k) fail("target node out of range");
      if (t.weight < 0.0) fail("negative target weight");
      s += t.weight;
    }
    if (std::abs(s - 1.0) > kSumTol) fail("target weights do not sum to 1");
  }
}

namespace {

std::vector<Cpt> cpts_from_json(const Json& j) {
  std::vector<Cpt> out;
  for (const auto& c : j) out.push_back({c.at("table").get<std::vector<double>>(), c.value("weight", 1.0)});
  return out;
}

Json cpts_to_json(const std::vector<Cpt>& c) {
  Json a = Json::array();
  for (const auto& x : c) a.push_back({{"table", x.table}, {"weight", x.weight}});
  return a;
}

}  // namespace

DiscreteBcm bcm_from_json(const Json& j) {
  DiscreteBcm b;
  try {
    b.cards = j.at("cards").get<std::vector<std::size_t>>();
    for (const auto& g : j.at("graphs")) {
      BcmGraph gr;
      const auto parents = g.at("parents").get<std::vector<std::vector<std::size_t>>>();
      std::vector<std::pair<std::size_t, std::size_t>> edges;
      for (std::size_t c = 0; c < parents.size(); ++c)
        for (auto p : parents[c]) {
          if (p >= parents.size()) throw std::invalid_argument("invalid BCM: parent index out of range");
          edges.emplace_back(p, c);
        }
      gr.dag = scm::make_dag(parents.size(), edges);
      gr.prob = g.at("prob").get<double>();
      for (const auto& n : g.at("mechanisms")) gr.mechanisms.push_back(cpts_from_json(n));
      for (const auto& n : g.at("interventions")) gr.interventions.push_back(cpts_from_json(n));
      b.graphs.push_back(std::move(gr));
    }
    const auto& tp = j.at("target_prior");
    if (tp.is_string()) {
      const auto s = tp.get<std::string>();
      if (s == "uniform_non_leaf") b.target_prior = TargetPriorKind::uniform_non_leaf;
      else if (s == "uniform_singletons") b.target_prior = TargetPriorKind::uniform_singletons;
      else throw std::invalid_argument("invalid BCM: unknown target prior '" + s + "'");
    } else {
      b.target_prior = TargetPriorKind::explicit_sets;
      for (const auto& t : tp.at("sets"))
        b.explicit_targets.push_back({t.at("nodes").get<std::vector<std::size_t>>(), t.at("weight").get<double>()});
    }
  } catch (const Json::exception& e) {
    throw std::invalid_argument(std::string("invalid BCM: ") + e.what());
  }
  validate(b);
  return b;
}

Json to_json(const DiscreteBcm& b) {
  Json j;
  j["cards"] = b.cards;
  j["graphs"] = Json::array();
  for (const auto& g : b.graphs) {
    Json gj;
    gj["parents"] = g.dag.parents;
    gj["prob"] = g.prob;
    gj["mechanisms"] = Json::array();
    gj["interventions"] = Json::array();
    for (const auto& n : g.mechanisms) gj["mechanisms"].push_back(cpts_to_json(n));
    for (const auto& n : g.interventions) gj["interventions"].push_back(cpts_to_json(n));
    j["graphs"].push_back(std::move(gj));
  }
  switch (b.target_prior) {
    case TargetPriorKind::uniform_non_leaf: j["target_prior"] = "uniform_non_leaf"; break;
    case TargetPriorKind::uniform_singletons: j["target_prior"] = "uniform_singletons"; break;
    case TargetPriorKind::explicit_sets: {
      Json sets = Json::array();
      for (const auto& t : b.explicit_targets) sets.push_back({{"nodes", t.nodes}, {"weight", t.weight}});
      j["target_prior"] = {{"sets", sets}};
      break;
    }
  }
  return j;
}

DiscreteBcm symmetric_two_node(const std::vector<double>& levels) {
  if (levels.empty()) throw std::invalid_argument("symmetric_two_node: no levels");
  for (double p : levels)
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("symmetric_two_node: level outside [0, 1]");
  const double w1 = 1.0 / static_cast<double>(levels.size());
  std::vector<Cpt> root, child;
  for (double p : levels) root.push_back({{1.0 - p, p}, w1});
  for (double p0 : levels)
    for (double p1 : levels) child.push_back({{1.0 - p0, p0, 1.0 - p1, p1}, w1 * w1});
  DiscreteBcm b;
  b.cards = {2, 2};
  for (auto [from, to] : {std::pair<std::size_t, std::size_t>{0, 1}, {1, 0}}) {
    BcmGraph g;
    g.dag = scm::make_dag(2, {{from, to}});
    g.prob = 0.5;
    g.mechanisms.resize(2);
    g.mechanisms[from] = root;
    g.mechanisms[to] = child;
    g.interventions = g.mechanisms;
    b.graphs.push_back(std::move(g));
  }
  b.target_prior = TargetPriorKind::uniform_non_leaf;
  validate(b);
  return b;
}

BcmWorld sample_world(const DiscreteBcm& bcm, Rng& rng) {
  BcmWorld w;
  std::vector<double> gp;
  for (const auto& g : bcm.graphs) gp.push_back(g.prob);
  w.graph = draw_index(rng, gp);
  const auto& gr = bcm.graphs[w.graph];
  for (std::size_t j = 0; j < bcm.k(); ++j) {
    std::vector<double> ws;
    for (const auto& c : gr.mechanisms[j]) ws.push_back(c.weight);
    w.obs_choice.push_back(draw_index(rng, ws));
    w.obs_tables.push_back(gr.mechanisms[j][w.obs_choice.back()].table);
  }
  const auto ts = bcm.targets_for(w.graph);
  if (ts.empty()) throw std::invalid_argument("sample_world: graph has no target with positive prior");
  std::vector<double> tw;
  for (const auto& t : ts) tw.push_back(t.weight);
  w.targets = ts[draw_index(rng, tw)].nodes;
  w.int_tables = w.obs_tables;
  for (auto t : w.targets) {
    std::vector<double> ws;
    for (const auto& c : gr.interventions[t]) ws.push_back(c.table == w.obs_tables[t] ? 0.0 : c.weight);
    w.int_tables[t] = gr.interventions[t][draw_index(rng, ws)].table;
  }
  return w;
}

DiscreteData sample_data(const DiscreteBcm& bcm, const BcmWorld& world, std::size_t n, bool interventional,
                         Rng& rng) {
  const auto& dag = bcm.graphs.at(world.graph).dag;
  const auto order = dag.topological_order();
  const auto& tables = interventional ? world.int_tables : world.obs_tables;
  DiscreteData out(n, std::vector<int>(bcm.k(), 0));
  for (auto& row : out) {
    for (auto j : order) {
      std::size_t r = 0;
      for (auto p : dag.parents[j]) r = r * bcm.cards[p] + static_cast<std::size_t>(row[p]);
      const std::size_t c = bcm.cards[j];
      std::vector<double> probs(tables[j].begin() + static_cast<std::ptrdiff_t>(r * c),
                                tables[j].begin() + static_cast<std::ptrdiff_t>((r + 1) * c));
      row[j] = static_cast<int>(draw_index(rng, probs));
    }
  }
  return out;
}

}  // namespace prim::oracle
