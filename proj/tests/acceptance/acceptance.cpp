// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Run with --only 1,4,7 to select criteria.

#include <Eigen/Core>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "prim/baselines/baselines.hpp"
#include "prim/cli/commands.hpp"
#include "prim/core/runtime.hpp"
#include "prim/eval/latency.hpp"
#include "prim/eval/metrics.hpp"
#include "prim/eval/runner.hpp"
#include "prim/model/checkpoint.hpp"
#include "prim/oracle/posterior.hpp"
#include "prim/scm/episode.hpp"
#include "prim/scm/scm.hpp"
#include "prim/train/trainer.hpp"
#include "support/finite_diff.hpp"
#include "support/stats.hpp"

using namespace prim;

namespace {

// Tolerances and budgets.
constexpr double kGradRelTol = 1e-4;
constexpr double kPaddingTol = 1e-6;
constexpr double kPriorAlpha = 0.01;
constexpr std::size_t kPriorScenarios = 10000;
constexpr double kOracleStrongShift = 0.95;
constexpr std::size_t kOracleSeeds = 20;
constexpr double kRecallFloor = 0.8;
constexpr double kOrderingSlack = 0.05;
constexpr std::size_t kEvalTrials = 200;
constexpr std::size_t kEvalObs = 100, kEvalInt = 10;
constexpr double kRandomMap = 4.0 / 15.0;
constexpr double kMonteCarloTol = 0.02;
constexpr std::size_t kMonteCarloEpisodes = 10000;
constexpr double kCircaFloor = 0.9;
constexpr double kLatencySpread = 0.15;
constexpr std::size_t kLatencyReps = 5, kLatencyWarmup = 1;
constexpr double kParamTarget = 4046273.0;
constexpr double kParamTol = 0.02;

// Desk-scale training run shared by the model criteria.
constexpr std::size_t kTrainEpochs = 20, kTrainEpisodesPerEpoch = 1000;
constexpr std::uint64_t kTrainSeed = 2024, kInitSeed = 1;
constexpr std::uint64_t kEvalSeed = 11;
constexpr double kTrainLr = 1e-3;
constexpr double kTrainWarmup = 0.05;
constexpr double kTrainClip = 1.0;

// Multi-target fine-tune.
constexpr std::size_t kFinetuneEpisodes = 1600, kHeldOutEpisodes = 200;
constexpr std::size_t kFinetuneEpochs = 10;
constexpr double kFinetuneLr = 3e-4;
constexpr double kFinetuneWarmup = 0.05;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Helpers for the model checks.

scm::Episode random_episode(Rng& rng, std::size_t k_real, std::size_t k_max, std::size_t n_obs, std::size_t n_int,
                            std::size_t mask_node) {
  scm::Episode e;
  e.k_real = k_real;
  e.k_max = k_max;
  e.obs = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_obs), static_cast<Eigen::Index>(k_max));
  e.intv = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_int), static_cast<Eigen::Index>(k_max));
  for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(k_real); ++c) {
    for (Eigen::Index r = 0; r < e.obs.rows(); ++r) e.obs(r, c) = normal(rng);
    for (Eigen::Index r = 0; r < e.intv.rows(); ++r) e.intv(r, c) = normal(rng, 0.5, 2.0);
  }
  e.mask.assign(k_max, 0);
  e.mask[mask_node] = 1;
  e.pad_mask.assign(k_max, 0);
  for (std::size_t j = k_real; j < k_max; ++j) e.pad_mask[j] = 1;
  e.targets = {0};
  return e;
}

model::ModelConfig small_config(std::size_t k_max) {
  model::ModelConfig c;
  c.d = 8;
  c.layers = 1;
  c.heads = 2;
  c.head_dim = 0;
  c.mlp_hidden = 16;
  c.dropout = 0.0;
  c.k_max = k_max;
  return c;
}

// The decoder output layer starts at zero; fill it so logits differ.
template <typename T>
void randomize_decoder(model::Mace<T>& m, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  for (auto i : {m.index().dec_w2, m.index().dec_b2})
    for (auto& v : m.params()[i].values) v = static_cast<T>(normal(rng));
}

Outcome gradient_check() {
  const auto cfg = small_config(4);
  model::Mace<double> m(cfg, 16);
  randomize_decoder(m, 17);
  Rng rng = make_rng(18);
  const auto x = model::to_model_input<double>(random_episode(rng, 3, 4, 6, 3, 1));
  std::vector<ad::Shape> shapes;
  std::vector<std::vector<double>> values;
  for (const auto& p : m.params()) {
    shapes.push_back(p.shape);
    values.push_back(p.values);
  }
  const auto res = testing::check_gradients(
      shapes, values, [&](ad::Tape<double>& t, const std::vector<ad::Var<double>>& vars) {
        model::Mace<double>::Bound b{vars};
        return ad::softmax_cross_entropy(m.forward(t, b, x), 2, std::span<const std::uint8_t>(x.valid));
      });
  const std::size_t expected = model::parameter_count(cfg);
  return {res.checked == expected && res.max_rel < kGradRelTol,
          fmt("%zu/%zu parameters, max rel err %.2e", res.checked, expected, res.max_rel)};
}

Outcome padding_invariance() {
  double worst = 0.0;
  std::size_t runs = 0;
  auto scribble = [](Rng& rng, scm::Episode& e) {
    for (Eigen::Index c = static_cast<Eigen::Index>(e.k_real); c < e.obs.cols(); ++c) {
      for (Eigen::Index r = 0; r < e.obs.rows(); ++r) e.obs(r, c) = normal(rng, 0.0, 50.0);
      for (Eigen::Index r = 0; r < e.intv.rows(); ++r) e.intv(r, c) = normal(rng, 0.0, 50.0);
    }
    e.mask[e.k_max - 1] = 1;
  };
  {
    model::Mace<double> m(small_config(6), 19);
    randomize_decoder(m, 20);
    Rng rng = make_rng(21);
    for (std::size_t trial = 0; trial < 20; ++trial, ++runs) {
      auto e = random_episode(rng, 3, 6, 8, 4, trial % 3);
      const auto clean = m.logits(e);
      scribble(rng, e);
      const auto dirty = m.logits(e);
      for (std::size_t k = 0; k < 3; ++k) worst = std::max(worst, std::abs(clean[k] - dirty[k]));
    }
  }
  {
    model::Mace<float> m(model::tiny_config(5), 22);
    randomize_decoder(m, 23);
    Rng rng = make_rng(24);
    for (std::size_t trial = 0; trial < 10; ++trial, ++runs) {
      auto e = random_episode(rng, 2 + trial % 3, 5, 30, 10, 0);
      const auto clean = m.logits(e);
      scribble(rng, e);
      const auto dirty = m.logits(e);
      for (std::size_t k = 0; k < e.k_real; ++k)
        worst = std::max(worst, static_cast<double>(std::abs(clean[k] - dirty[k])));
    }
  }
  return {worst <= kPaddingTol, fmt("%zu runs, max |delta logit| %.2e", runs, worst)};
}

Outcome prior_fidelity() {
  scm::PriorConfig cfg;
  cfg.queries = 1;
  Rng jitter = make_rng(77);
  std::vector<double> n_obs, n_int, kinds(3, 0.0);
  std::size_t violations = 0, bad_interventions = 0;
  std::string first;
  for (std::uint64_t s = 0; s < kPriorScenarios; ++s) {
    const auto d = scm::sample_episode(substream(99, s), cfg);
    const auto& e = d.queries[0];
    n_obs.push_back(static_cast<double>(e.n_obs()) + uniform(jitter, 0, 1));
    n_int.push_back(static_cast<double>(e.n_int()) + uniform(jitter, 0, 1));
    kinds[static_cast<std::size_t>(scm::intervention_kind_from_string(e.kind))] += 1;
    const auto v = scm::support_violations(d.scm);
    violations += v.size();
    if (!v.empty() && first.empty()) first = v[0];
    for (const auto& spec : d.interventions) {
      bool ok = spec.scale >= scm::support::change_lo && spec.scale <= scm::support::change_hi;
      if (spec.kind == scm::InterventionKind::additive_shift) {
        ok &= spec.shifts.size() == spec.targets.size();
        for (std::size_t i = 0; i < spec.shifts.size() && ok; ++i) {
          if (d.scm.family == scm::MechanismFamily::baseline) {
            const double f = -spec.shifts[i] / d.scm.nodes[spec.targets[i]].level;
            ok &= f >= scm::support::baseline_drop_lo && f <= scm::support::baseline_drop_hi;
          } else {
            const double f = std::abs(spec.shifts[i]) / (d.scm.noise.scale * spec.scale);
            ok &= f >= scm::support::shift_lo - 1e-12 && f <= scm::support::shift_hi + 1e-12;
          }
        }
      } else if (spec.kind == scm::InterventionKind::hard_do) {
        ok &= spec.pinned_values.size() == spec.targets.size();
      }
      bad_interventions += !ok;
    }
  }
  const double span_obs = static_cast<double>(cfg.n_obs_max - cfg.n_obs_min + 1);
  const double span_int = static_cast<double>(cfg.n_int_max - cfg.n_int_min + 1);
  const double lo_obs = static_cast<double>(cfg.n_obs_min), lo_int = static_cast<double>(cfg.n_int_min);
  const double p_obs =
      testing::ks_one_sample(n_obs, [&](double x) { return std::clamp((x - lo_obs) / span_obs, 0.0, 1.0); });
  const double p_int =
      testing::ks_one_sample(n_int, [&](double x) { return std::clamp((x - lo_int) / span_int, 0.0, 1.0); });
  const double p_kind = testing::chi_square_pvalue(kinds, {cfg.kind_probs[0], cfg.kind_probs[1], cfg.kind_probs[2]});
  const bool pass = p_obs > kPriorAlpha && p_int > kPriorAlpha && p_kind > kPriorAlpha && violations == 0 &&
                    bad_interventions == 0;
  auto detail = fmt("kinds %.0f/%.0f/%.0f p=%.3f, KS n_obs p=%.3f n_int p=%.3f, %zu support violations, "
                    "%zu bad interventions",
                    kinds[0], kinds[1], kinds[2], p_kind, p_obs, p_int, violations, bad_interventions);
  if (!first.empty()) detail += " (first: " + first + ")";
  return {pass, detail};
}

// Three binary nodes over graphs in which node 2 never precedes node 0.
oracle::DiscreteBcm three_node() {
  oracle::DiscreteBcm b;
  b.cards = {2, 2, 2};
  const std::vector<std::vector<std::pair<std::size_t, std::size_t>>> edge_sets = {
      {{0, 1}, {1, 2}}, {{0, 2}, {1, 2}}, {{1, 0}, {0, 2}}};
  for (const auto& edges : edge_sets) {
    oracle::BcmGraph g;
    g.dag = scm::make_dag(3, edges);
    g.prob = 1.0 / 3.0;
    g.mechanisms.resize(3);
    for (std::size_t j = 0; j < 3; ++j) {
      const std::size_t rows = std::size_t{1} << g.dag.parents[j].size();
      for (double p : {0.2, 0.7}) {
        std::vector<double> t;
        for (std::size_t r = 0; r < rows; ++r) {
          const double q = r % 2 ? 1.0 - p : p;
          t.push_back(1.0 - q);
          t.push_back(q);
        }
        g.mechanisms[j].push_back({t, 0.5});
      }
    }
    g.interventions = g.mechanisms;
    b.graphs.push_back(std::move(g));
  }
  b.target_prior = oracle::TargetPriorKind::uniform_singletons;
  return b;
}

Outcome oracle_identifiability() {
  const auto two = oracle::symmetric_two_node({0.1, 0.3, 0.5, 0.7, 0.9});
  bool uniform_ok = true;
  for (std::size_t m : {0u, 1u}) {
    const auto p = oracle::enumerate_posterior(two, {}, {}, {m});
    uniform_ok &= p.probs.size() == 2 && p.probs[0] == 0.5 && p.probs[1] == 0.5;
  }

  std::size_t forward = two.graphs.size();
  for (std::size_t g = 0; g < two.graphs.size(); ++g)
    if (two.graphs[g].dag.has_edge(0, 1)) forward = g;
  oracle::BcmWorld w;
  w.graph = forward;
  w.targets = {0};
  w.obs_tables = {{0.9, 0.1}, {0.7, 0.3, 0.3, 0.7}};
  w.int_tables = w.obs_tables;
  w.int_tables[0] = {0.1, 0.9};
  double worst = 1.0;
  for (std::uint64_t s = 0; s < kOracleSeeds; ++s) {
    auto rng = make_rng(substream(5, s));
    const auto obs = oracle::sample_data(two, w, 200, false, rng);
    const auto intv = oracle::sample_data(two, w, 200, true, rng);
    worst = std::min(worst, oracle::enumerate_posterior(two, obs, intv, {1}).prob_of({0}));
  }

  const auto three = three_node();
  double leak = 0.0;
  auto rng = make_rng(6);
  for (int rep = 0; rep < 20; ++rep) {
    const auto world = oracle::sample_world(three, rng);
    const auto p = oracle::enumerate_posterior(three, oracle::sample_data(three, world, 50, false, rng),
                                               oracle::sample_data(three, world, 50, true, rng), {0});
    leak = std::max(leak, p.prob_of({2}));
  }
  return {uniform_ok && worst >= kOracleStrongShift && leak == 0.0,
          fmt("empty data uniform: %s; strong shift min p(T) %.4f over %zu seeds; non-ancestor mass %.1e",
              uniform_ok ? "yes" : "no", worst, kOracleSeeds, leak)};
}

// Desk-scale model, trained once per run and shared.
struct Trained {
  std::optional<model::Mace<float>> model;
  double seconds = 0.0;
};

Trained& trained_model(const std::filesystem::path& work) {
  static Trained t;
  if (t.model) return t;
  const auto t0 = std::chrono::steady_clock::now();
  auto prior = cli::prior_preset("train");
  prior.k_max = 5;
  auto mc = model::tiny_config(5);
  mc.dropout = 0.0;
  t.model.emplace(mc, kInitSeed);
  train::TrainConfig cfg;
  cfg.seed = kTrainSeed;
  cfg.epochs = kTrainEpochs;
  cfg.episodes_per_epoch = kTrainEpisodesPerEpoch;
  cfg.lr = kTrainLr;
  cfg.warmup_fraction = kTrainWarmup;
  cfg.clip_norm = kTrainClip;
  train::train(*t.model, prior, cfg);
  t.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  model::save_checkpoint(work / "tiny.ckpt", t.model->config(), t.model->params());
  return t;
}

eval::MetricsRow recall_row(const model::Mace<float>& m, eval::Topology topo, scm::MechanismFamily mech) {
  eval::ScenarioConfig c;
  c.topology = topo;
  c.mechanism = mech;
  c.n_obs_grid = {kEvalObs};
  c.n_int_grid = {kEvalInt};
  c.trials = kEvalTrials;
  c.seed = kEvalSeed;
  c.k_max = m.config().k_max;
  return eval::run_scenario(c, {"prim"}, &m).find("prim", kEvalObs, kEvalInt, "recall@1");
}

Outcome desk_training(const std::filesystem::path& work) {
  auto& t = trained_model(work);
  const auto id = recall_row(*t.model, eval::Topology::two_node_identifiable, scm::MechanismFamily::linear);
  const auto non = recall_row(*t.model, eval::Topology::two_node_nonidentifiable, scm::MechanismFamily::linear);
  const bool overlap = std::max(id.ci_low, non.ci_low) <= std::min(id.ci_high, non.ci_high);
  return {id.mean >= kRecallFloor && non.mean >= kRecallFloor && overlap,
          fmt("training %.0fs; identifiable %.3f [%.3f, %.3f], non-identifiable %.3f [%.3f, %.3f]", t.seconds,
              id.mean, id.ci_low, id.ci_high, non.mean, non.ci_low, non.ci_high)};
}

Outcome mediator_vs_confounder(const std::filesystem::path& work) {
  auto& t = trained_model(work);
  const auto med = recall_row(*t.model, eval::Topology::mediator, scm::MechanismFamily::linear);
  const auto con = recall_row(*t.model, eval::Topology::confounder, scm::MechanismFamily::linear);
  return {med.mean >= con.mean - kOrderingSlack,
          fmt("mediator %.3f [%.3f, %.3f], confounder %.3f [%.3f, %.3f]", med.mean, med.ci_low, med.ci_high,
              con.mean, con.ci_low, con.ci_high)};
}

Outcome random_map() {
  std::vector<std::size_t> perm(6);
  std::iota(perm.begin(), perm.end(), 0);
  double total = 0.0;
  std::size_t count = 0;
  do {
    RankedResult r;
    r.order = perm;
    total += eval::map_at_k(r, {0, 1}, 2);
    ++count;
  } while (std::next_permutation(perm.begin(), perm.end()));
  const bool exact = total == 192.0 && count == 720;

  auto rng = make_rng(7);
  double mc = 0.0;
  for (std::size_t i = 0; i < kMonteCarloEpisodes; ++i) {
    std::vector<std::size_t> order(6);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t j = 5; j > 0; --j) std::swap(order[j], order[uniform_index(rng, j + 1)]);
    const std::size_t a = uniform_index(rng, 6);
    std::size_t b = uniform_index(rng, 5);
    if (b >= a) ++b;
    RankedResult r;
    r.order = order;
    mc += eval::map_at_k(r, {std::min(a, b), std::max(a, b)}, 2);
  }
  mc /= static_cast<double>(kMonteCarloEpisodes);
  return {exact && std::abs(mc - kRandomMap) <= kMonteCarloTol,
          fmt("enumeration %.0f/%zu = %.6f (4/15 = %.6f); Monte Carlo %.4f", total, count,
              total / static_cast<double>(count), kRandomMap, mc)};
}

Outcome baseline_sanity() {
  std::size_t hits = 0;
  for (std::uint64_t t = 0; t < kEvalTrials; ++t) {
    auto rng = make_rng(substream(8000, t));
    const auto dag = scm::sample_dag(rng, 5, scm::GraphFamily::erdos_renyi, 1.5);
    auto model = scm::sample_scm(rng, dag, scm::MechanismFamily::linear,
                                 scm::sample_noise_spec(rng, scm::NoiseFamily::gaussian));
    for (auto& node : model.nodes) node.confounder_weight = 0.0;
    const std::size_t target = uniform_index(rng, 5);
    const auto obs = scm::sample_observational(rng, model, 1000);
    const auto spec = scm::draw_intervention(rng, model, {target}, scm::InterventionKind::additive_shift, obs);
    const auto intv = scm::sample_interventional(rng, scm::apply_intervention(rng, model, spec), 50, nullptr);
    hits += baselines::circa_score(dag, obs, intv).order[0] == target;
  }
  const double recall = static_cast<double>(hits) / static_cast<double>(kEvalTrials);

  auto rng = make_rng(2);
  Eigen::MatrixXd obs(300, 3);
  for (Eigen::Index c = 0; c < 3; ++c)
    for (Eigen::Index r = 0; r < 300; ++r) obs(r, c) = normal(rng);
  // chain X -> Z -> Y, every node anomalous, symptom at Y
  Eigen::MatrixXd chain_int = obs;
  chain_int.col(0).array() += 6.0;
  chain_int.col(1).array() += 10.0;
  chain_int.col(2).array() += 20.0;
  const auto chain = baselines::traversal(scm::make_dag(3, {{0, 1}, {1, 2}}), obs, chain_int, {2});
  // confounder Z -> X, Z -> Y, X -> Y; X and Y anomalous, symptom at Y
  Eigen::MatrixXd conf_int = obs;
  conf_int.col(1).array() += 6.0;
  conf_int.col(2).array() += 30.0;
  const auto conf = baselines::traversal(scm::make_dag(3, {{0, 1}, {0, 2}, {1, 2}}), obs, conf_int, {2});
  const bool hand = chain.order[0] == 0 && conf.order[0] == 1;
  return {recall >= kCircaFloor && hand, fmt("CIRCA recall@1 %.3f (%zu/%zu); traversal chain -> %zu, "
                                             "confounder -> %zu",
                                             recall, hits, kEvalTrials, chain.order[0], conf.order[0])};
}

Outcome constant_latency() {
  const model::Mace<float> m(model::full_config(), 3);
  const auto stats = eval::latency_benchmark(m, {20, 30, 50, 80, 100}, 100, 20, kLatencyReps, kLatencyWarmup);
  double lo = stats[0].median_ms, hi = lo;
  std::string per;
  for (const auto& s : stats) {
    lo = std::min(lo, s.median_ms);
    hi = std::max(hi, s.median_ms);
    per += fmt("%sk=%zu %.0fms", per.empty() ? "" : ", ", s.k, s.median_ms);
  }
  const double spread = (hi - lo) / lo;
  return {spread < kLatencySpread, fmt("medians %s; spread %.3f", per.c_str(), spread)};
}

std::vector<scm::Episode> two_target_episodes(std::uint64_t seed, std::size_t n) {
  auto prior = cli::prior_preset("train");
  prior.k_min = 3;
  prior.k_max = 5;
  prior.queries = 1;
  prior.targets_per_scenario = 2;
  std::vector<scm::Episode> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(scm::sample_episode(substream(seed, i), prior).queries[0]);
  return out;
}

std::vector<double> map2(const model::Mace<float>& m, const std::vector<scm::Episode>& eps) {
  std::vector<double> v;
  for (const auto& e : eps) {
    const auto lg = m.logits(e);
    v.push_back(eval::map_at_k(model::predict_ranking(std::span<const float>(lg), e.k_real), e.targets, 2));
  }
  return v;
}

Outcome finetune_contracts(const std::filesystem::path& work) {
  auto& t = trained_model(work);
  const auto train_set = two_target_episodes(substream(kTrainSeed, "multi-train"), kFinetuneEpisodes);
  const auto held_out = two_target_episodes(substream(kTrainSeed, "multi-test"), kHeldOutEpisodes);

  // decoder-only: backbone bit-identical
  model::Mace<float> dec(t.model->config(), t.model->params());
  const auto decoder = dec.index().decoder();
  std::vector<std::size_t> backbone;
  for (std::size_t i = 0; i < dec.params().size(); ++i)
    if (std::find(decoder.begin(), decoder.end(), i) == decoder.end()) backbone.push_back(i);
  const auto back_before = dec.params().checksum(backbone);
  const auto dec_before = dec.params().checksum(decoder);
  train::TrainConfig dcfg;
  dcfg.finetune_mode = train::FinetuneMode::decoder_only;
  dcfg.lr = kFinetuneLr;
  dcfg.epochs = 1;
  dcfg.seed = 31;
  train::finetune(dec, std::vector<scm::Episode>(train_set.begin(), train_set.begin() + 200), dcfg);
  const bool frozen = dec.params().checksum(backbone) == back_before;
  const bool moved = dec.params().checksum(decoder) != dec_before;

  // full fine-tune on two-target episodes
  model::Mace<float> full(t.model->config(), t.model->params());
  train::TrainConfig fcfg;
  fcfg.finetune_mode = train::FinetuneMode::full;
  fcfg.lr = kFinetuneLr;
  fcfg.warmup_fraction = kFinetuneWarmup;
  fcfg.epochs = kFinetuneEpochs;
  fcfg.seed = 32;
  train::finetune(full, train_set, fcfg);

  const auto zero = map2(*t.model, held_out);
  const auto tuned = map2(full, held_out);
  auto mean = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); };
  auto rz = make_rng(substream(kEvalSeed, "zero-shot"));
  auto rt = make_rng(substream(kEvalSeed, "fine-tuned"));
  const auto ci_zero = eval::bootstrap_ci(zero, rz);
  const auto ci_tuned = eval::bootstrap_ci(tuned, rt);
  const double width = std::max(ci_zero.second - ci_zero.first, ci_tuned.second - ci_tuned.first);
  const double gain = mean(tuned) - mean(zero);
  return {frozen && moved && gain > width,
          fmt("decoder-only backbone %s, decoder %s; MAP@2 zero-shot %.3f [%.3f, %.3f], fine-tuned %.3f "
              "[%.3f, %.3f], gain %.3f vs CI width %.3f",
              frozen ? "unchanged" : "CHANGED", moved ? "updated" : "unchanged", mean(zero), ci_zero.first,
              ci_zero.second, mean(tuned), ci_tuned.first, ci_tuned.second, gain, width)};
}

Outcome parameter_count() {
  const auto cfg = model::full_config();
  const std::size_t n = model::parameter_count(cfg);
  const model::Mace<float> m(cfg, 1);
  const std::size_t built = m.params().count();
  const double rel = std::abs(static_cast<double>(built) - kParamTarget) / kParamTarget;
  return {built == n && rel < kParamTol,
          fmt("d=%zu L=%zu heads=%zu mlp=%zu K_max=%zu: %zu parameters, %.3f%% from %.0f", cfg.d, cfg.layers,
              cfg.heads, cfg.mlp_hidden, cfg.k_max, built, 100.0 * rel, kParamTarget)};
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"acceptance checks"};
  std::string work = "acceptance_work";
  std::vector<int> only;
  app.add_option("--work-dir", work, "scratch directory for checkpoints");
  app.add_option("--only", only, "criteria to run")->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  std::filesystem::create_directories(work);
  const std::filesystem::path dir(work);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient soundness", gradient_check},
      {"padding invariance", padding_invariance},
      {"prior fidelity", prior_fidelity},
      {"oracle identifiability", oracle_identifiability},
      {"desk-scale training", [&] { return desk_training(dir); }},
      {"mediator vs confounder", [&] { return mediator_vs_confounder(dir); }},
      {"random MAP@2 baseline", random_map},
      {"baseline sanity", baseline_sanity},
      {"constant latency", constant_latency},
      {"fine-tuning contracts", [&] { return finetune_contracts(dir); }},
      {"parameter count", parameter_count},
  };

  std::size_t failed = 0, ran = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << criteria[i].first << " (" << fmt("%.1f", secs)
              << "s): " << o.detail << std::endl;
    failed += !o.pass;
    ++ran;
  }
  std::cout << (ran - failed) << "/" << ran << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
