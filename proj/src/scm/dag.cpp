#include "prim/scm/dag.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace prim::scm {

std::string to_string(GraphFamily f) {
  switch (f) {
    case GraphFamily::erdos_renyi: return "erdos_renyi";
    case GraphFamily::barabasi_albert: return "barabasi_albert";
    case GraphFamily::bipartite: return "bipartite";
    case GraphFamily::fixed: return "fixed";
  }
  return "unknown";
}

GraphFamily graph_family_from_string(const std::string& s) {
  if (s == "erdos_renyi" || s == "er") return GraphFamily::erdos_renyi;
  if (s == "barabasi_albert" || s == "ba") return GraphFamily::barabasi_albert;
  if (s == "bipartite") return GraphFamily::bipartite;
  if (s == "fixed") return GraphFamily::fixed;
  throw std::invalid_argument("unknown graph family: " + s);
}

std::vector<std::vector<std::size_t>> Dag::children() const {
  std::vector<std::vector<std::size_t>> ch(k);
  for (std::size_t j = 0; j < k; ++j)
    for (auto p : parents[j]) ch[p].push_back(j);
  return ch;
}

std::vector<std::size_t> Dag::topological_order() const {
  std::vector<std::size_t> indeg(k), order;
  for (std::size_t j = 0; j < k; ++j) indeg[j] = parents[j].size();
  auto ch = children();
  std::vector<std::size_t> ready;
  for (std::size_t j = k; j-- > 0;)
    if (indeg[j] == 0) ready.push_back(j);
  while (!ready.empty()) {
    auto n = ready.back();
    ready.pop_back();
    order.push_back(n);
    for (auto c : ch[n])
      if (--indeg[c] == 0) ready.push_back(c);
  }
  if (order.size() != k) throw std::logic_error("graph has a cycle");
  return order;
}

bool Dag::is_acyclic() const {
  try {
    topological_order();
    return true;
  } catch (const std::logic_error&) {
    return false;
  }
}

bool Dag::has_edge(std::size_t from, std::size_t to) const {
  return std::binary_search(parents[to].begin(), parents[to].end(), from);
}

std::size_t Dag::edge_count() const {
  std::size_t e = 0;
  for (const auto& p : parents) e += p.size();
  return e;
}

namespace {

std::vector<std::size_t> reach(std::size_t start, const std::vector<std::vector<std::size_t>>& adj) {
  std::vector<char> seen(adj.size(), 0);
  std::vector<std::size_t> stack = {start}, out;
  while (!stack.empty()) {
    auto n = stack.back();
    stack.pop_back();
    for (auto c : adj[n])
      if (!seen[c]) {
        seen[c] = 1;
        stack.push_back(c);
      }
  }
  for (std::size_t i = 0; i < adj.size(); ++i)
    if (seen[i] && i != start) out.push_back(i);
  return out;
}

}  // namespace

std::vector<std::size_t> Dag::descendants(std::size_t node) const { return reach(node, children()); }

std::vector<std::size_t> Dag::ancestors(std::size_t node) const { return reach(node, parents); }

bool Dag::is_leaf(std::size_t node) const {
  for (std::size_t j = 0; j < k; ++j)
    if (has_edge(node, j)) return false;
  return true;
}

std::vector<std::size_t> Dag::non_leaf_nodes() const {
  std::vector<char> has_child(k, 0);
  for (const auto& ps : parents)
    for (auto p : ps) has_child[p] = 1;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < k; ++i)
    if (has_child[i]) out.push_back(i);
  return out;
}

Dag make_dag(std::size_t k, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  Dag g;
  g.k = k;
  g.parents.assign(k, {});
  g.permutation.resize(k);
  std::iota(g.permutation.begin(), g.permutation.end(), 0);
  for (auto [a, b] : edges) {
    if (a >= k || b >= k || a == b) throw std::invalid_argument("make_dag: bad edge");
    g.parents[b].push_back(a);
  }
  for (auto& p : g.parents) {
    std::sort(p.begin(), p.end());
    p.erase(std::unique(p.begin(), p.end()), p.end());
  }
  if (!g.is_acyclic()) throw std::invalid_argument("make_dag: edges contain a cycle");
  return g;
}

double edge_probability(std::size_t k, double mean_in_degree) {
  if (k < 2) return 0.0;
  return std::clamp(mean_in_degree / static_cast<double>(k - 1), 0.0, 1.0);
}

Dag sample_dag(Rng& rng, std::size_t k, GraphFamily family, double mean_in_degree) {
  if (k < 2) throw std::invalid_argument("sample_dag: k must be >= 2");
  const double p = edge_probability(k, mean_in_degree);
  // Edges always run from a lower to a higher index before relabelling.
  std::vector<std::vector<std::size_t>> par(k);
  std::vector<int> part;
  switch (family) {
    case GraphFamily::erdos_renyi:
      for (std::size_t j = 1; j < k; ++j)
        for (std::size_t i = 0; i < j; ++i)
          if (bernoulli(rng, p)) par[j].push_back(i);
      break;
    case GraphFamily::barabasi_albert: {
      std::vector<double> degree(k, 0.0);
      for (std::size_t j = 1; j < k; ++j) {
        const auto m = std::binomial_distribution<std::size_t>(j, p)(rng);
        std::vector<std::size_t> pool(j);
        std::iota(pool.begin(), pool.end(), 0);
        for (std::size_t e = 0; e < m; ++e) {
          std::vector<double> w;
          for (auto c : pool) w.push_back(degree[c] + 1.0);
          auto pick = std::discrete_distribution<std::size_t>(w.begin(), w.end())(rng);
          par[j].push_back(pool[pick]);
          pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
        }
        for (auto c : par[j]) degree[c] += 1.0;
        degree[j] += static_cast<double>(par[j].size());
      }
      break;
    }
    case GraphFamily::bipartite: {
      const std::size_t a = uniform_int(rng, 1, k - 1);
      part.resize(k);
      for (std::size_t i = 0; i < k; ++i) part[i] = i < a ? 0 : 1;
      for (std::size_t j = a; j < k; ++j)
        for (std::size_t i = 0; i < a; ++i)
          if (bernoulli(rng, p)) par[j].push_back(i);
      break;
    }
    case GraphFamily::fixed:
      throw std::invalid_argument("sample_dag: fixed family cannot be sampled");
  }

  std::vector<std::size_t> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Dag g;
  g.k = k;
  g.family = family;
  g.permutation = perm;
  g.parents.assign(k, {});
  for (std::size_t j = 0; j < k; ++j) {
    for (auto i : par[j]) g.parents[perm[j]].push_back(perm[i]);
    std::sort(g.parents[perm[j]].begin(), g.parents[perm[j]].end());
  }
  if (!part.empty()) {
    g.part.resize(k);
    for (std::size_t i = 0; i < k; ++i) g.part[perm[i]] = part[i];
  }
  return g;
}

}  // namespace prim::scm
