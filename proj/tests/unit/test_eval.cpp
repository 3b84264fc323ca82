#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "prim/eval/latency.hpp"
#include "prim/eval/runner.hpp"

using namespace prim;
using namespace prim::eval;

namespace {

RankedResult ranking(std::vector<std::size_t> order) {
  RankedResult r;
  r.scores.assign(order.size(), 0.0);
  for (std::size_t i = 0; i < order.size(); ++i) r.scores[order[i]] = static_cast<double>(order.size() - i);
  r.order = std::move(order);
  return r;
}

ScenarioConfig small(Topology t, std::size_t trials = 20) {
  ScenarioConfig c;
  c.topology = t;
  c.mechanism = scm::MechanismFamily::nn;
  c.n_obs_grid = {50};
  c.n_int_grid = {10};
  c.trials = trials;
  c.seed = 7;
  c.k_max = 6;
  return c;
}

// Maps episode labels back to canonical ones through the stored permutation.
std::vector<std::size_t> inverse(const std::vector<std::size_t>& perm) {
  std::vector<std::size_t> inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = i;
  return inv;
}

}  // namespace

TEST_CASE("recall_at_k examples") {
  CHECK(recall_at_k(ranking({3, 1, 2, 0}), 3, 1) == 1.0);
  CHECK(recall_at_k(ranking({1, 4, 2, 0, 3}), 2, 3) == 1.0);
  CHECK(recall_at_k(ranking({1, 4, 3, 0, 2}), 2, 3) == 0.0);
  CHECK_THROWS_AS(recall_at_k(ranking({0, 1}), 0, 0), std::invalid_argument);
}

TEST_CASE("map_at_k examples") {
  // a=0, b=1, x=2
  CHECK(map_at_k(ranking({0, 1, 2, 3}), {0, 1}, 2) == 1.0);
  CHECK(map_at_k(ranking({2, 0, 1, 3}), {0, 1}, 2) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK_THROWS_AS(map_at_k(ranking({0, 1}), {}, 2), std::invalid_argument);
}

TEST_CASE("expected MAP@2 of uniform rankings over 6 nodes with two causes is 4/15") {
  std::vector<std::size_t> order(6);
  std::iota(order.begin(), order.end(), 0);
  double sum = 0.0;
  std::size_t count = 0;
  do {
    sum += map_at_k(ranking(order), {0, 1}, 2);
    ++count;
  } while (std::next_permutation(order.begin(), order.end()));
  CHECK(count == 720);
  // E = (1/2)(P(rel1) + (E[rel1 rel2] + P(rel2)) / 2) = (1/2)(1/3 + (1/15 + 1/3)/2)
  const double oracle = 0.5 * (1.0 / 3.0 + (1.0 / 15.0 + 1.0 / 3.0) / 2.0);
  CHECK(sum / count == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(sum / count == doctest::Approx(4.0 / 15.0).epsilon(1e-12));
}

TEST_CASE("metric properties over random rankings") {
  Rng rng = make_rng(11);
  for (int it = 0; it < 500; ++it) {
    const std::size_t k = 2 + uniform_index(rng, 8);
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const auto r = ranking(order);
    const std::size_t t = uniform_index(rng, k);
    for (std::size_t kk = 1; kk < k; ++kk) CHECK(recall_at_k(r, t, kk) <= recall_at_k(r, t, kk + 1));
    CHECK(map_at_k(r, {t}, 1) == recall_at_k(r, t, 1));
    std::vector<std::size_t> truth = {t, (t + 1) % k};
    for (std::size_t kk = 1; kk <= k; ++kk) {
      const double m = map_at_k(r, truth, kk);
      CHECK(m >= 0.0);
      CHECK(m <= 1.0);
    }
  }
}

TEST_CASE("bootstrap_ci degenerate samples") {
  Rng rng = make_rng(1);
  const auto [lo, hi] = bootstrap_ci(std::vector<double>(50, 0.7), rng);
  CHECK(lo == 0.7);
  CHECK(hi == 0.7);
  const auto [l1, h1] = bootstrap_ci({0.3}, rng);
  CHECK(l1 == 0.3);
  CHECK(h1 == 0.3);
  CHECK_THROWS_AS(bootstrap_ci({}, rng), std::invalid_argument);
}

TEST_CASE("bootstrap_ci covers the Bernoulli mean at close to the nominal rate") {
  Rng rng = make_rng(2);
  int covered = 0;
  const int meta = 500;
  for (int m = 0; m < meta; ++m) {
    std::vector<double> v(200);
    for (auto& x : v) x = bernoulli(rng, 0.5) ? 1.0 : 0.0;
    const auto [lo, hi] = bootstrap_ci(v, rng);
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / 200.0;
    CHECK(lo <= mean);
    CHECK(mean <= hi);
    covered += (lo <= 0.5 && 0.5 <= hi);
  }
  CHECK(covered >= 0.85 * meta);
}

TEST_CASE("metrics table round-trips through CSV") {
  MetricsTable t;
  const double nan = std::nan("");
  t.rows.push_back({"prim", "mediator_nn", 100, 10, "recall@1", 0.1 + 0.2, 1.0 / 3.0, 0.987654321012345678});
  t.rows.push_back({"circa", "mediator_nn", 5, 1, "map@2", nan, nan, nan});
  t.rows.push_back({"corr", "x", 1, 2, "recall@3", 1e-300, -0.0, 5e-324});
  const auto csv = to_csv(t);
  CHECK(csv.substr(0, csv.find('\n')) == "method,scenario,n_obs,n_int,metric,mean,ci_low,ci_high");
  const auto back = table_from_csv(csv);
  CHECK(back == t);
  CHECK(to_csv(back) == csv);
  CHECK_FALSE(back.rows[1].available());
  CHECK_THROWS_AS(table_from_csv("bad\n"), std::invalid_argument);
  CHECK_THROWS_AS(table_from_csv(std::string(kCsvHeader) + "\na,b,1,2,m,0.5\n"), std::invalid_argument);
  const auto j = to_json(t);
  CHECK(j["rows"].size() == 3);
  CHECK(j["rows"][1]["mean"].is_null());
}

TEST_CASE("named topologies produce the expected graphs and targets") {
  SUBCASE("mediator") {
    auto c = small(Topology::mediator);
    for (std::size_t t = 0; t < 10; ++t) {
      const auto ep = make_scenario_episode(c, 50, 10, t);
      const auto inv = inverse(ep.dag.permutation);
      const std::size_t x = ep.dag.permutation[0], z = ep.dag.permutation[1], y = ep.dag.permutation[2];
      CHECK(ep.dag.edge_count() == 3);
      CHECK(ep.dag.has_edge(x, z));
      CHECK(ep.dag.has_edge(x, y));
      CHECK(ep.dag.has_edge(z, y));
      CHECK(ep.episode.targets == std::vector<std::size_t>{x});
      CHECK(ep.mask_nodes == std::vector<std::size_t>{y});
      CHECK(inv[x] == 0);
    }
  }
  SUBCASE("confounder") {
    const auto ep = make_scenario_episode(small(Topology::confounder), 50, 10, 3);
    const std::size_t x = ep.dag.permutation[0], z = ep.dag.permutation[1], y = ep.dag.permutation[2];
    CHECK(ep.dag.edge_count() == 3);
    CHECK(ep.dag.has_edge(z, x));
    CHECK(ep.dag.has_edge(z, y));
    CHECK(ep.dag.has_edge(x, y));
    CHECK(ep.episode.targets == std::vector<std::size_t>{x});
  }
  SUBCASE("multi-root 6-node") {
    const auto ep = make_scenario_episode(small(Topology::multi_rca_6node), 100, 10, 0);
    const auto& p = ep.dag.permutation;
    const std::vector<std::pair<int, int>> edges = {{0, 2}, {1, 2}, {1, 3}, {2, 5}, {3, 5}, {4, 5}};
    CHECK(ep.dag.edge_count() == edges.size());
    for (auto [a, b] : edges) CHECK(ep.dag.has_edge(p[a], p[b]));
    std::vector<std::size_t> truth = {p[0], p[1]};
    std::sort(truth.begin(), truth.end());
    CHECK(ep.episode.targets == truth);
    CHECK(ep.mask_nodes == std::vector<std::size_t>{p[5]});
    CHECK(std::find(metric_names().begin(), metric_names().end(), "map@2") != metric_names().end());
  }
  SUBCASE("two-node mechanisms") {
    const auto a = make_scenario_episode(small(Topology::two_node_identifiable), 50, 10, 0);
    const auto b = make_scenario_episode(small(Topology::two_node_nonidentifiable), 50, 10, 0);
    CHECK(a.episode.family.rfind("tanh/", 0) == 0);
    CHECK(b.episode.family.rfind("linear/", 0) == 0);
    CHECK(a.dag.edge_count() == 1);
    CHECK(a.dag.has_edge(a.episode.targets[0], a.mask_nodes[0]));
  }
  SUBCASE("labels are permuted across trials") {
    std::set<std::size_t> seen;
    for (std::size_t t = 0; t < 30; ++t) seen.insert(make_scenario_episode(small(Topology::mediator), 50, 10, t).episode.targets[0]);
    CHECK(seen.size() == 3);
  }
}

TEST_CASE("scenario episodes are valid and padded to k_max") {
  for (auto topo : {Topology::two_node_identifiable, Topology::mediator, Topology::confounder,
                    Topology::multi_rca_6node, Topology::random_sweep}) {
    auto c = small(topo);
    for (std::size_t t = 0; t < 5; ++t) {
      const auto ep = make_scenario_episode(c, 30, 4, t);
      CHECK_NOTHROW(scm::validate_episode(ep.episode, true, &ep.dag));
      CHECK(ep.episode.k_max == 6);
      CHECK(ep.episode.n_obs() == 30);
      CHECK(ep.episode.n_int() == 4);
      CHECK(static_cast<std::size_t>(ep.obs_raw.cols()) == ep.dag.k);
    }
  }
  auto f = small(Topology::factory);
  f.k_max = 20;
  const auto ep = make_scenario_episode(f, 60, 12, 0);
  CHECK(ep.episode.time_node);
  CHECK(ep.episode.k_real == ep.dag.k + 1);
  CHECK(ep.episode.n_obs() == 60);
}

TEST_CASE("a trial keeps its SCM across grid points") {
  auto c = small(Topology::random_sweep);
  const auto a = make_scenario_episode(c, 30, 5, 4);
  const auto b = make_scenario_episode(c, 80, 9, 4);
  CHECK(a.dag.parents == b.dag.parents);
  CHECK(a.episode.targets == b.episode.targets);
}

TEST_CASE("run_scenario is deterministic, paired and worker-independent") {
  auto c = small(Topology::mediator, 30);
  c.n_obs_grid = {20, 60};
  const std::vector<std::string> methods = {"traversal", "circa", "corr", "eps"};
  const auto t1 = run_scenario(c, methods);
  const auto t2 = run_scenario(c, methods);
  CHECK(to_csv(t1) == to_csv(t2));
  CHECK(t1.rows.size() == 2 * 4 * metric_names().size());
  c.workers = 3;
  CHECK(to_csv(run_scenario(c, methods)) == to_csv(t1));
  c.workers = 1;
  // a method's row does not depend on which other methods ran
  const auto only = run_scenario(c, {"corr"});
  CHECK(only.find("corr", 60, 10, "recall@1") == t1.find("corr", 60, 10, "recall@1"));
  for (const auto& r : t1.rows) {
    CHECK(r.ci_low <= r.mean);
    CHECK(r.mean <= r.ci_high);
  }
  CHECK(t1.rows[0].method == "traversal");
  CHECK(t1.find("eps_diag", 20, 10, "map@2").available());
}

TEST_CASE("run_scenario marks graph-based methods unavailable without a graph") {
  auto c = small(Topology::confounder, 10);
  c.graph_given = false;
  const auto t = run_scenario(c, {"traversal", "circa", "corr"});
  CHECK_FALSE(t.find("traversal", 50, 10, "recall@1").available());
  CHECK_FALSE(t.find("circa", 50, 10, "map@2").available());
  CHECK(t.find("corr", 50, 10, "recall@1").available());
}

TEST_CASE("run_scenario rejects bad requests") {
  auto c = small(Topology::mediator, 5);
  CHECK_THROWS_AS(run_scenario(c, {"prim"}), std::invalid_argument);
  CHECK_THROWS_AS(run_scenario(c, {"pagerank"}), std::invalid_argument);
  model::Mace<float> m(model::tiny_config(5), 1);
  CHECK_THROWS_AS(run_scenario(c, {"prim"}, &m), std::invalid_argument);  // k_max 5 vs 6
  c.n_obs_grid.clear();
  CHECK_THROWS_AS(run_scenario(c, {"corr"}), std::invalid_argument);
  auto d = small(Topology::multi_rca_6node, 5);
  d.k_max = 5;
  CHECK_THROWS_AS(d.validate(), std::invalid_argument);
}

TEST_CASE("run_scenario with the model yields probabilities-based rankings") {
  auto c = small(Topology::mediator, 6);
  c.k_max = 5;
  model::Mace<float> m(model::tiny_config(5), 1);
  const auto t = run_scenario(c, {"prim", "corr"}, &m);
  CHECK(t.find("prim", 50, 10, "recall@3").mean == 1.0);  // three real nodes
  CHECK(t.rows.size() == 2 * metric_names().size());
}

TEST_CASE("baselines that reject tiny samples give unavailable rows") {
  auto c = small(Topology::mediator, 5);
  c.n_int_grid = {1};
  const auto t = run_scenario(c, {"corr", "eps"});
  CHECK_FALSE(t.find("corr", 50, 1, "recall@1").available());
  CHECK(t.find("eps_diag", 50, 1, "recall@1").available());
}

TEST_CASE("scenario config JSON round trip and validation") {
  auto c = small(Topology::random_sweep);
  c.sweep_nodes = 4;
  const auto back = scenario_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK_THROWS_AS(scenario_config_from_json(Json{{"topology", "ring"}}), std::invalid_argument);
  CHECK_THROWS_AS(scenario_config_from_json(Json{{"trails", 3}}), std::invalid_argument);
  CHECK_THROWS_AS(scenario_config_from_json(Json{{"trials", 0}}), std::invalid_argument);
  CHECK(topology_from_string(to_string(Topology::multi_rca_6node)) == Topology::multi_rca_6node);
}

TEST_CASE("latency summaries") {
  const auto one = summarize({4.2});
  CHECK(one.median_ms == 4.2);
  CHECK(one.min_ms == 4.2);
  CHECK(one.max_ms == 4.2);
  CHECK(one.mad_ms == 0.0);
  const auto s = summarize({1.0, 5.0, 2.0, 3.0});
  CHECK(s.median_ms == 2.5);
  CHECK(s.mad_ms == 1.0);  // deviations 1.5, 2.5, 0.5, 0.5
  CHECK_THROWS_AS(median({}), std::invalid_argument);
}

TEST_CASE("latency benchmark shape and monotonicity in n_obs") {
  model::Mace<float> m(model::tiny_config(8), 3);
  const auto one = latency_benchmark(m, {3}, 20, 5, 1, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0].repetitions == 1);
  CHECK(one[0].median_ms == one[0].min_ms);
  CHECK(one[0].median_ms == one[0].max_ms);
  const auto lo = latency_benchmark(m, {4}, 16, 8, 5);
  const auto hi = latency_benchmark(m, {4}, 512, 8, 5);
  CHECK(hi[0].median_ms > lo[0].median_ms);
  CHECK_THROWS_AS(latency_benchmark(m, {9}, 10, 5, 1), std::invalid_argument);
  CHECK(to_csv(hi).rfind(kLatencyCsvHeader, 0) == 0);
}
