#include "prim/eval/runner.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <stdexcept>
#include <thread>

#include "prim/baselines/baselines.hpp"

namespace prim::eval {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Eigen::MatrixXd real_columns(const Eigen::MatrixXd& m, std::size_t k) {
  return m.leftCols(static_cast<Eigen::Index>(k));
}

}  // namespace

std::string canonical_method(const std::string& name) {
  const std::string n = name == "eps" ? "eps_diag" : name;
  if (std::find(kMethods.begin(), kMethods.end(), n) == kMethods.end())
    throw std::invalid_argument("unknown method '" + name + "'");
  return n;
}

bool needs_graph(const std::string& method) { return method == "traversal" || method == "circa"; }

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names = {"recall@1", "recall@3", "map@2"};
  return names;
}

RankedResult rank_episode(const std::string& method, const ScenarioEpisode& ep, const model::Mace<float>* model) {
  const auto m = canonical_method(method);
  const std::size_t k = ep.dag.k;
  const auto obs = real_columns(ep.obs_raw, k);
  const auto intv = real_columns(ep.int_raw, k);
  if (m == "traversal") return baselines::traversal(ep.dag, obs, intv, ep.mask_nodes);
  if (m == "circa") return baselines::circa_score(ep.dag, obs, intv);
  if (m == "corr") return baselines::correlation_rank(obs, intv, ep.mask_nodes.front());
  if (m == "eps_diag") return baselines::epsilon_diagnosis(obs, intv);
  if (!model) throw std::invalid_argument("method prim needs a model");
  const auto logits = model->logits(ep.episode);
  return model::predict_ranking(std::span<const float>(logits), ep.episode.k_real);
}

std::vector<double> episode_metrics(const RankedResult& r, const std::vector<std::size_t>& targets) {
  return {recall_at_k(r, targets, 1), recall_at_k(r, targets, 3), map_at_k(r, targets, 2)};
}

MetricsTable run_scenario(const ScenarioConfig& c, const std::vector<std::string>& methods,
                          const model::Mace<float>* model) {
  c.validate();
  if (methods.empty()) throw std::invalid_argument("run_scenario: no methods");
  std::vector<std::string> ms;
  for (const auto& m : methods) ms.push_back(canonical_method(m));
  const bool use_prim = std::find(ms.begin(), ms.end(), "prim") != ms.end();
  if (use_prim) {
    if (!model) throw std::invalid_argument("run_scenario: method prim needs a model");
    if (model->config().k_max != c.k_max)
      throw std::invalid_argument("run_scenario: model k_max " + std::to_string(model->config().k_max) +
                                  " differs from scenario k_max " + std::to_string(c.k_max));
  }
  const auto& metrics = metric_names();
  const std::string scenario = c.name();

  MetricsTable table;
  for (auto n_obs : c.n_obs_grid)
    for (auto n_int : c.n_int_grid) {
      // values[method][metric][trial]
      std::vector<std::vector<std::vector<double>>> values(
          ms.size(), std::vector<std::vector<double>>(metrics.size(), std::vector<double>(c.trials, 0.0)));
      auto work = [&](std::size_t w) {
        for (std::size_t t = w; t < c.trials; t += c.workers) {
          const auto ep = make_scenario_episode(c, n_obs, n_int, t);
          for (std::size_t a = 0; a < ms.size(); ++a) {
            if (needs_graph(ms[a]) && !c.graph_given) continue;
            std::vector<double> v(metrics.size(), kNaN);
            try {
              v = episode_metrics(rank_episode(ms[a], ep, model), ep.episode.targets);
            } catch (const std::invalid_argument&) {
              if (ms[a] == "prim") throw;  // baselines reject too few samples; the row becomes unavailable
            }
            for (std::size_t b = 0; b < metrics.size(); ++b) values[a][b][t] = v[b];
          }
        }
      };
      if (c.workers == 1) {
        work(0);
      } else {
        std::vector<std::exception_ptr> errors(c.workers);
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < c.workers; ++w)
          pool.emplace_back([&, w] {
            try {
              work(w);
            } catch (...) {
              errors[w] = std::current_exception();
            }
          });
        for (auto& th : pool) th.join();
        for (const auto& e : errors)
          if (e) std::rethrow_exception(e);
      }

      for (std::size_t a = 0; a < ms.size(); ++a)
        for (std::size_t b = 0; b < metrics.size(); ++b) {
          MetricsRow r{ms[a], scenario, n_obs, n_int, metrics[b], kNaN, kNaN, kNaN};
          const auto& v = values[a][b];
          const bool ran = std::none_of(v.begin(), v.end(), [](double x) { return std::isnan(x); });
          if (ran && (!needs_graph(ms[a]) || c.graph_given)) {
            double s = 0.0;
            for (double x : v) s += x;
            r.mean = s / static_cast<double>(v.size());
            Rng rng = make_rng(substream(substream(substream(substream(c.seed, "bootstrap"), ms[a] + "/" + metrics[b]),
                                                   n_obs),
                                         n_int));
            std::tie(r.ci_low, r.ci_high) = bootstrap_ci(v, rng);
          }
          table.rows.push_back(std::move(r));
        }
    }
  return table;
}

}  // namespace prim::eval
