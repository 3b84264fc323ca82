#include "prim/cli/commands.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "prim/cli/manifest.hpp"
#include "prim/eval/latency.hpp"
#include "prim/eval/runner.hpp"
#include "prim/model/checkpoint.hpp"
#include "prim/model/ranking.hpp"
#include "prim/oracle/posterior.hpp"
#include "prim/train/trainer.hpp"

namespace prim::cli {

namespace fs = std::filesystem;

namespace {

// Raised for configuration problems that deserve the usage text.
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

template <typename T, typename F>
std::vector<std::string> names_of(const std::vector<T>& v, F f) {
  std::vector<std::string> out;
  for (const auto& x : v) out.push_back(f(x));
  return out;
}

Json config_file(const std::string& path) {
  try {
    auto j = read_json_file(path);
    if (!j.is_object()) throw UsageError(path + ": expected a JSON object");
    return j;
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
}

struct Common {
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  std::string config;
};

void add_seed(CLI::App* app, Common& c) {
  c.seed_opt = app->add_option("--seed", c.seed, "Root seed for every random substream");
}

class Run {
 public:
  Run(std::string command, int argc, const char* const* argv) : t0_(std::chrono::steady_clock::now()) {
    m_.command = std::move(command);
    for (int i = 0; i < argc; ++i) m_.argv.emplace_back(argv[i]);
    m_.code_version = code_version();
  }
  RunManifest& manifest() { return m_; }
  void finish(const std::string& path) {
    m_.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    write_manifest(path, m_);
  }

 private:
  RunManifest m_;
  std::chrono::steady_clock::time_point t0_;
};

model::Mace<float> load_model(const std::string& path) {
  auto ck = model::load_checkpoint(path);
  return model::Mace<float>(ck.config, std::move(ck.params));
}

// ---- generate -------------------------------------------------------------

struct GenerateOpts {
  Common c;
  std::string prior = "train", out;
  std::size_t episodes = 0, targets = 0;
};

int cmd_generate(const GenerateOpts& o, Run& run, std::ostream& out) {
  auto prior = prior_preset(o.prior);
  if (!o.c.config.empty()) {
    prior = prior_config_from_json(config_file(o.c.config), prior);
    run.manifest().config_paths.push_back(o.c.config);
  }
  if (o.targets) {
    // t root causes need at least t non-leaf nodes, so t + 1 nodes
    prior.targets_per_scenario = o.targets;
    prior.k_min = std::max(prior.k_min, o.targets + 1);
    if (prior.k_min > prior.k_max) throw UsageError("generate: too many targets for k_max");
  }
  std::ostringstream os;
  scm::write_corpus_header(os);
  std::size_t written = 0;
  for (std::uint64_t i = 0; written < o.episodes; ++i)
    for (const auto& e : scm::sample_episode(substream(o.c.seed, i), prior).queries) {
      if (written == o.episodes) break;
      scm::write_episode(os, e);
      ++written;
    }
  // validate what will be written before committing it
  std::istringstream is(os.str());
  const auto back = scm::read_corpus(is);
  if (back.size() != o.episodes) throw std::runtime_error("generate: corpus re-read gave a different episode count");
  for (const auto& e : back) scm::validate_episode(e);
  write_file_atomic(o.out, os.str());
  auto& m = run.manifest();
  m.seed = o.c.seed;
  m.outputs = {o.out};
  m.resolved = Json{{"prior", to_json(prior)}, {"episodes", o.episodes}};
  run.finish(o.out + ".manifest.json");
  out << "wrote " << o.episodes << " episodes to " << o.out << "\n";
  return kExitOk;
}

// ---- train / finetune -----------------------------------------------------

struct TrainOpts {
  Common c;
  std::string prior = "train", prior_config, model = "tiny", model_config, out, checkpoint, corpus, mode;
  std::size_t k_max = 0;
  std::size_t epochs = 0, episodes_per_epoch = 0, workers = 0;
  double lr = 0.0;
  CLI::Option *epochs_opt = nullptr, *epe_opt = nullptr, *workers_opt = nullptr, *lr_opt = nullptr;
};

train::TrainConfig train_config(const TrainOpts& o, Run& run) {
  train::TrainConfig cfg;
  if (!o.c.config.empty()) {
    try {
      cfg = train::train_config_from_json(config_file(o.c.config));
    } catch (const UsageError&) {
      throw;
    } catch (const std::exception& e) {
      throw UsageError(o.c.config + ": " + e.what());
    }
    run.manifest().config_paths.push_back(o.c.config);
  }
  if (o.c.seed_opt->count()) cfg.seed = o.c.seed;
  if (o.epochs_opt->count()) cfg.epochs = o.epochs;
  if (o.epe_opt->count()) cfg.episodes_per_epoch = o.episodes_per_epoch;
  if (o.workers_opt->count()) cfg.workers = o.workers;
  if (o.lr_opt->count()) cfg.lr = o.lr;
  cfg.out_dir = o.out;
  return cfg;
}

train::ProgressFn progress_printer(std::ostream& out) {
  return [&out](std::size_t step, std::size_t epoch, double loss) {
    if (step % 500 == 0) out << "step " << step << " epoch " << epoch << " loss " << loss << "\n";
  };
}

int cmd_train(const TrainOpts& o, Run& run, std::ostream& out) {
  auto cfg = train_config(o, run);
  cfg.finetune_mode = train::FinetuneMode::none;
  auto prior = prior_preset(o.prior);
  if (!o.prior_config.empty()) {
    prior = prior_config_from_json(config_file(o.prior_config), prior);
    run.manifest().config_paths.push_back(o.prior_config);
  }
  auto mcfg = model_preset(o.model, o.k_max);
  if (!o.model_config.empty()) {
    try {
      mcfg = model::model_config_from_json(config_file(o.model_config));
    } catch (const UsageError&) {
      throw;
    } catch (const std::exception& e) {
      throw UsageError(o.model_config + ": " + e.what());
    }
    run.manifest().config_paths.push_back(o.model_config);
  }
  if (prior.k_max != mcfg.k_max)
    throw UsageError("prior k_max " + std::to_string(prior.k_max) + " differs from model k_max " +
                     std::to_string(mcfg.k_max));
  model::Mace<float> m(mcfg, substream(cfg.seed, "init"));
  const auto res = train::train(m, prior, cfg, progress_printer(out));
  auto& man = run.manifest();
  man.seed = cfg.seed;
  man.outputs = res.checkpoints;
  man.outputs.push_back((fs::path(o.out) / "loss.csv").string());
  man.resolved = Json{{"train", train::to_json(cfg)}, {"prior", to_json(prior)}, {"model", model::to_json(mcfg)}};
  run.finish((fs::path(o.out) / "manifest.json").string());
  out << "trained " << res.losses.size() << " steps; checkpoint " << (fs::path(o.out) / "last.ckpt").string()
      << "\n";
  return kExitOk;
}

int cmd_finetune(const TrainOpts& o, Run& run, std::ostream& out) {
  auto cfg = train_config(o, run);
  if (!o.mode.empty()) cfg.finetune_mode = train::finetune_mode_from_string(o.mode);
  if (cfg.finetune_mode == train::FinetuneMode::none)
    throw UsageError("finetune: --mode must be full or decoder_only");
  auto m = load_model(o.checkpoint);
  const auto episodes = scm::read_corpus_file(o.corpus);
  const auto res = train::finetune(m, episodes, cfg, progress_printer(out));
  auto& man = run.manifest();
  man.seed = cfg.seed;
  man.config_paths.push_back(o.checkpoint);
  man.config_paths.push_back(o.corpus);
  man.outputs = res.checkpoints;
  man.outputs.push_back((fs::path(o.out) / "loss.csv").string());
  man.resolved = Json{{"train", train::to_json(cfg)},
                      {"checkpoint_hash", file_hash(o.checkpoint)},
                      {"corpus_hash", file_hash(o.corpus)},
                      {"episodes", episodes.size()}};
  run.finish((fs::path(o.out) / "manifest.json").string());
  out << "fine-tuned " << res.losses.size() << " steps on " << episodes.size() << " episodes\n";
  return kExitOk;
}

// ---- evaluate ---------------------------------------------------------------

struct EvaluateOpts {
  Common c;
  std::string scenario, mechanism, methods = "traversal,circa,corr,eps,prim", checkpoint, out = ".";
  std::vector<std::size_t> n_obs, n_int;
  std::size_t trials = 0, k_max = 0, workers = 0, sweep_nodes = 0;
  bool no_graph = false;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

int cmd_evaluate(const EvaluateOpts& o, Run& run, std::ostream& out) {
  eval::ScenarioConfig c;
  bool k_from_file = false;
  if (!o.c.config.empty()) {
    auto j = config_file(o.c.config);
    k_from_file = j.contains("k_max");
    try {
      c = eval::scenario_config_from_json(j);
    } catch (const std::exception& e) {
      throw UsageError(o.c.config + ": " + e.what());
    }
    run.manifest().config_paths.push_back(o.c.config);
  }
  try {
    if (!o.scenario.empty()) c.topology = eval::topology_from_string(o.scenario);
    if (!o.mechanism.empty()) c.mechanism = scm::mechanism_family_from_string(o.mechanism);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  if (!o.n_obs.empty()) c.n_obs_grid = o.n_obs;
  if (!o.n_int.empty()) c.n_int_grid = o.n_int;
  if (o.trials) c.trials = o.trials;
  if (o.workers) c.workers = o.workers;
  if (o.sweep_nodes) c.sweep_nodes = o.sweep_nodes;
  if (o.c.seed_opt->count()) c.seed = o.c.seed;
  if (o.no_graph) c.graph_given = false;
  const auto methods = split_list(o.methods);
  for (const auto& m : methods) {
    try {
      (void)eval::canonical_method(m);
    } catch (const std::exception& e) {
      throw UsageError(e.what());
    }
  }
  const bool use_prim = std::find(methods.begin(), methods.end(), "prim") != methods.end();
  if (use_prim && o.checkpoint.empty()) throw UsageError("evaluate: method prim needs --checkpoint");

  std::optional<model::Mace<float>> model;
  std::string hash = "nomodel";
  if (!o.checkpoint.empty()) {
    model.emplace(load_model(o.checkpoint));
    hash = file_hash(o.checkpoint);
    run.manifest().config_paths.push_back(o.checkpoint);
  }
  if (o.k_max) c.k_max = o.k_max;
  else if (model) c.k_max = model->config().k_max;
  else if (!k_from_file)
    c.k_max = c.topology == eval::Topology::factory ? scm::FactoryConfig{}.k_max : eval::topology_nodes(c);
  try {
    c.validate();
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }

  const auto table = eval::run_scenario(c, methods, model ? &*model : nullptr);
  const std::string stem =
      (fs::path(o.out) / (c.name() + "_seed" + std::to_string(c.seed) + "_" + hash)).string();
  write_file_atomic(stem + ".csv", eval::to_csv(table));
  write_file_atomic(stem + ".json", eval::to_json(table).dump(2) + "\n");
  auto& man = run.manifest();
  man.seed = c.seed;
  man.outputs = {stem + ".csv", stem + ".json"};
  man.resolved = Json{{"scenario", eval::to_json(c)}, {"methods", methods}, {"model_hash", hash}};
  run.finish(stem + ".manifest.json");
  out << "wrote " << table.rows.size() << " rows to " << stem << ".csv\n";
  return kExitOk;
}

// ---- infer ----------------------------------------------------------------

struct InferOpts {
  Common c;
  std::string checkpoint, corpus, out;
};

int cmd_infer(const InferOpts& o, Run& run, std::ostream& out) {
  const auto m = load_model(o.checkpoint);
  const auto episodes = scm::read_corpus_file(o.corpus);
  Json items = Json::array();
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    const auto& e = episodes[i];
    if (e.k_max != m.config().k_max)
      throw std::runtime_error("infer: episode " + std::to_string(i) + " has k_max " + std::to_string(e.k_max) +
                               " but the model expects " + std::to_string(m.config().k_max));
    const auto logits = m.logits(e);
    std::vector<double> l(logits.begin(), logits.end());
    const auto probs = model::node_probabilities(l, e.k_real);
    const auto ranking = model::predict_ranking(std::span<const double>(l), e.k_real);
    double total = 0.0;
    Json nodes = Json::array();
    for (std::size_t r = 0; r < ranking.order.size(); ++r) {
      const auto node = ranking.order[r];
      total += probs[node];
      nodes.push_back(Json{{"node", node}, {"probability", probs[node]}, {"rank", r + 1}});
    }
    if (std::fabs(total - 1.0) > 1e-6)
      throw std::runtime_error("infer: probabilities of episode " + std::to_string(i) + " sum to " +
                               std::to_string(total));
    items.push_back(Json{{"index", i}, {"seed", e.seed}, {"query", e.query}, {"k_real", e.k_real}, {"ranking", nodes}});
  }
  write_file_atomic(o.out, Json{{"checkpoint_hash", file_hash(o.checkpoint)}, {"episodes", items}}.dump(2) + "\n");
  auto& man = run.manifest();
  man.config_paths = {o.checkpoint, o.corpus};
  man.outputs = {o.out};
  man.resolved = Json{{"checkpoint_hash", file_hash(o.checkpoint)}, {"corpus_hash", file_hash(o.corpus)}};
  run.finish(o.out + ".manifest.json");
  out << "ranked " << episodes.size() << " episodes\n";
  return kExitOk;
}

// ---- oracle ---------------------------------------------------------------

struct OracleOpts {
  Common c;
  std::string bcm, data, out;
  std::vector<double> levels;
  std::vector<std::size_t> mask;
  std::size_t n_obs = 0, n_int = 0;
};

oracle::DiscreteData data_rows(const Json& j, const char* key) {
  try {
    return j.at(key).get<oracle::DiscreteData>();
  } catch (const Json::exception& e) {
    throw UsageError(std::string("oracle data: field '") + key + "': " + e.what());
  }
}

int cmd_oracle(const OracleOpts& o, Run& run, std::ostream& out) {
  if (o.bcm.empty() == o.levels.empty()) throw UsageError("oracle: give exactly one of --bcm and --levels");
  oracle::DiscreteBcm bcm;
  if (!o.bcm.empty()) {
    try {
      bcm = oracle::bcm_from_json(config_file(o.bcm));
    } catch (const UsageError&) {
      throw;
    } catch (const std::exception& e) {
      throw UsageError(o.bcm + ": " + e.what());
    }
    run.manifest().config_paths.push_back(o.bcm);
  } else {
    bcm = oracle::symmetric_two_node(o.levels);
  }

  oracle::DiscreteData obs, intv;
  std::vector<std::size_t> mask = o.mask;
  Json result;
  if (!o.data.empty()) {
    const auto j = config_file(o.data);
    obs = data_rows(j, "obs");
    intv = data_rows(j, "int");
    if (mask.empty() && j.contains("mask")) mask = j.at("mask").get<std::vector<std::size_t>>();
    run.manifest().config_paths.push_back(o.data);
  } else {
    Rng rng = make_rng(substream(o.c.seed, "world"));
    const auto w = oracle::sample_world(bcm, rng);
    obs = oracle::sample_data(bcm, w, o.n_obs, false, rng);
    intv = oracle::sample_data(bcm, w, o.n_int, true, rng);
    result["world"] = Json{{"graph", w.graph}, {"targets", w.targets}};
    result["data"] = Json{{"obs", obs}, {"int", intv}};
  }
  if (mask.empty()) throw UsageError("oracle: no mask given (--mask or a 'mask' field in the data file)");
  const auto post = oracle::enumerate_posterior(bcm, obs, intv, mask);
  result["mask"] = mask;
  result["posterior"] = oracle::to_json(post);
  write_file_atomic(o.out, result.dump(2) + "\n");
  auto& man = run.manifest();
  man.seed = o.c.seed;
  man.outputs = {o.out};
  man.resolved = Json{{"bcm", oracle::to_json(bcm)}, {"n_obs", obs.size()}, {"n_int", intv.size()}, {"mask", mask}};
  run.finish(o.out + ".manifest.json");
  for (std::size_t i = 0; i < post.targets.size(); ++i)
    out << Json(post.targets[i]).dump() << " " << post.probs[i] << "\n";
  return kExitOk;
}

// ---- bench-latency --------------------------------------------------------

struct BenchOpts {
  Common c;
  std::string checkpoint, model = "full", out;
  std::vector<std::size_t> k = {20, 30, 50, 80, 100};
  std::size_t k_max = 0, n_obs = 100, n_int = 20, reps = 5, warmup = 1;
};

int cmd_bench(const BenchOpts& o, Run& run, std::ostream& out) {
  std::optional<model::Mace<float>> m;
  Json desc;
  if (!o.checkpoint.empty()) {
    m.emplace(load_model(o.checkpoint));
    desc = Json{{"checkpoint_hash", file_hash(o.checkpoint)}};
    run.manifest().config_paths.push_back(o.checkpoint);
  } else {
    const auto cfg = model_preset(o.model, o.k_max);
    m.emplace(cfg, substream(o.c.seed, "init"));
    desc = Json{{"model", model::to_json(cfg)}};
  }
  const auto stats = eval::latency_benchmark(*m, o.k, o.n_obs, o.n_int, o.reps, o.warmup, o.c.seed);
  write_file_atomic(o.out, eval::to_csv(stats));
  auto& man = run.manifest();
  man.seed = o.c.seed;
  man.outputs = {o.out};
  desc["k"] = o.k;
  desc["n_obs"] = o.n_obs;
  desc["n_int"] = o.n_int;
  desc["repetitions"] = o.reps;
  desc["warmup"] = o.warmup;
  man.resolved = desc;
  run.finish(o.out + ".manifest.json");
  out << eval::to_csv(stats);
  return kExitOk;
}

}  // namespace

scm::PriorConfig prior_preset(const std::string& name) {
  scm::PriorConfig p;
  if (name == "full") return p;
  if (name == "train") {
    p.n_obs_min = 5;
    p.n_obs_max = 200;
    p.n_int_min = 1;
    p.n_int_max = 50;
    p.mechanisms = {scm::MechanismFamily::linear, scm::MechanismFamily::tanh};
    return p;
  }
  throw UsageError("unknown prior preset '" + name + "' (expected train or full)");
}

Json to_json(const scm::PriorConfig& p) {
  return Json{{"k_min", p.k_min},
              {"k_max", p.k_max},
              {"n_obs_min", p.n_obs_min},
              {"n_obs_max", p.n_obs_max},
              {"n_int_min", p.n_int_min},
              {"n_int_max", p.n_int_max},
              {"queries", p.queries},
              {"degree_min", p.degree_min},
              {"degree_max", p.degree_max},
              {"graphs", names_of(p.graphs, [](auto g) { return scm::to_string(g); })},
              {"mechanisms", names_of(p.mechanisms, [](auto m) { return scm::to_string(m); })},
              {"noises", names_of(p.noises, [](auto n) { return scm::to_string(n); })},
              {"kind_probs", p.kind_probs},
              {"targets_per_scenario", p.targets_per_scenario}};
}

scm::PriorConfig prior_config_from_json(const Json& j, scm::PriorConfig p) {
  const auto keys = to_json(p);
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!keys.contains(it.key())) throw UsageError("prior config: unknown key '" + it.key() + "'");
  try {
    auto size = [&](const char* k, std::size_t& v) {
      if (j.contains(k)) v = j.at(k).get<std::size_t>();
    };
    size("k_min", p.k_min);
    size("k_max", p.k_max);
    size("n_obs_min", p.n_obs_min);
    size("n_obs_max", p.n_obs_max);
    size("n_int_min", p.n_int_min);
    size("n_int_max", p.n_int_max);
    size("queries", p.queries);
    size("targets_per_scenario", p.targets_per_scenario);
    if (j.contains("degree_min")) p.degree_min = j.at("degree_min").get<double>();
    if (j.contains("degree_max")) p.degree_max = j.at("degree_max").get<double>();
    if (j.contains("kind_probs")) p.kind_probs = j.at("kind_probs").get<std::array<double, 3>>();
    if (j.contains("graphs")) {
      p.graphs.clear();
      for (const auto& s : j.at("graphs")) p.graphs.push_back(scm::graph_family_from_string(s.get<std::string>()));
    }
    if (j.contains("mechanisms")) {
      p.mechanisms.clear();
      for (const auto& s : j.at("mechanisms"))
        p.mechanisms.push_back(scm::mechanism_family_from_string(s.get<std::string>()));
    }
    if (j.contains("noises")) {
      p.noises.clear();
      for (const auto& s : j.at("noises")) p.noises.push_back(scm::noise_family_from_string(s.get<std::string>()));
    }
  } catch (const std::exception& e) {
    throw UsageError(std::string("prior config: ") + e.what());
  }
  if (p.k_min < 2 || p.k_min > p.k_max) throw UsageError("prior config: need 2 <= k_min <= k_max");
  if (p.n_obs_min < 1 || p.n_obs_min > p.n_obs_max) throw UsageError("prior config: bad n_obs range");
  if (p.n_int_min < 1 || p.n_int_min > p.n_int_max) throw UsageError("prior config: bad n_int range");
  if (p.graphs.empty() || p.mechanisms.empty() || p.noises.empty())
    throw UsageError("prior config: empty family list");
  return p;
}

model::ModelConfig model_preset(const std::string& name, std::size_t k_max) {
  model::ModelConfig c;
  if (name == "tiny") c = model::tiny_config(k_max ? k_max : 5);
  else if (name == "full") c = model::full_config();
  else throw UsageError("unknown model preset '" + name + "' (expected tiny or full)");
  if (k_max) c.k_max = k_max;
  return c;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Root-cause inference with an amortised causal transformer", "prim"};
  app.require_subcommand(1);
  app.set_version_flag("--version", code_version());

  GenerateOpts gen;
  auto* g = app.add_subcommand("generate", "Sample an episode corpus from the prior");
  add_seed(g, gen.c);
  g->add_option("--prior", gen.prior, "Prior preset: train or full")->capture_default_str();
  g->add_option("--config", gen.c.config, "Prior config JSON; keys override the preset");
  g->add_option("--episodes", gen.episodes, "Number of episode lines")->required()->check(CLI::PositiveNumber);
  g->add_option("--targets", gen.targets, "Root causes per episode")->check(CLI::PositiveNumber);
  g->add_option("--out", gen.out, "Corpus file")->required();

  TrainOpts tr;
  auto* t = app.add_subcommand("train", "Meta-train on the synthetic prior");
  add_seed(t, tr.c);
  t->add_option("--config", tr.c.config, "Training config JSON");
  t->add_option("--prior", tr.prior, "Prior preset: train or full")->capture_default_str();
  t->add_option("--prior-config", tr.prior_config, "Prior config JSON; keys override the preset");
  t->add_option("--model", tr.model, "Model preset: tiny or full")->capture_default_str();
  t->add_option("--model-config", tr.model_config, "Model config JSON; replaces the preset");
  t->add_option("--k-max", tr.k_max, "Padded node width of the preset model");
  tr.epochs_opt = t->add_option("--epochs", tr.epochs);
  tr.epe_opt = t->add_option("--episodes-per-epoch", tr.episodes_per_epoch);
  tr.workers_opt = t->add_option("--workers", tr.workers);
  tr.lr_opt = t->add_option("--lr", tr.lr);
  t->add_option("--out", tr.out, "Output directory")->required();

  TrainOpts ft;
  auto* f = app.add_subcommand("finetune", "Fine-tune a checkpoint on an episode corpus");
  add_seed(f, ft.c);
  f->add_option("--config", ft.c.config, "Training config JSON");
  f->add_option("--checkpoint", ft.checkpoint)->required()->check(CLI::ExistingFile);
  f->add_option("--corpus", ft.corpus)->required()->check(CLI::ExistingFile);
  f->add_option("--mode", ft.mode, "full or decoder_only");
  ft.epochs_opt = f->add_option("--epochs", ft.epochs);
  ft.epe_opt = f->add_option("--episodes-per-epoch", ft.episodes_per_epoch);
  ft.workers_opt = f->add_option("--workers", ft.workers);
  ft.lr_opt = f->add_option("--lr", ft.lr);
  f->add_option("--out", ft.out, "Output directory")->required();

  EvaluateOpts ev;
  auto* e = app.add_subcommand("evaluate", "Run a synthetic scenario grid and write a metrics table");
  add_seed(e, ev.c);
  e->add_option("--config", ev.c.config, "Scenario config JSON");
  e->add_option("--scenario", ev.scenario, "Topology name");
  e->add_option("--mechanism", ev.mechanism, "nn, gp or linear");
  e->add_option("--methods", ev.methods, "Comma-separated methods")->capture_default_str();
  e->add_option("--checkpoint", ev.checkpoint)->check(CLI::ExistingFile);
  e->add_option("--n-obs", ev.n_obs, "Observational sample sizes")->delimiter(',');
  e->add_option("--n-int", ev.n_int, "Interventional sample sizes")->delimiter(',');
  e->add_option("--trials", ev.trials)->check(CLI::PositiveNumber);
  e->add_option("--k-max", ev.k_max);
  e->add_option("--workers", ev.workers)->check(CLI::PositiveNumber);
  e->add_option("--sweep-nodes", ev.sweep_nodes);
  e->add_flag("--no-graph", ev.no_graph, "Withhold the true graph from graph-based baselines");
  e->add_option("--out", ev.out, "Output directory")->capture_default_str();

  InferOpts in;
  auto* i = app.add_subcommand("infer", "Rank root causes for every episode of a corpus");
  i->add_option("--checkpoint", in.checkpoint)->required()->check(CLI::ExistingFile);
  i->add_option("--corpus", in.corpus)->required()->check(CLI::ExistingFile);
  i->add_option("--out", in.out, "Output JSON")->required();

  OracleOpts orc;
  auto* o = app.add_subcommand("oracle", "Exact root-cause posterior of a discrete causal model");
  add_seed(o, orc.c);
  o->add_option("--bcm", orc.bcm, "Discrete model JSON")->check(CLI::ExistingFile);
  o->add_option("--levels", orc.levels, "Symmetric two-node model with these Bernoulli levels")->delimiter(',');
  auto* data_opt = o->add_option("--data", orc.data, "JSON with obs, int and optionally mask rows")->check(CLI::ExistingFile);
  auto* nobs_opt = o->add_option("--n-obs", orc.n_obs, "Sample a world and this many obs rows");
  o->add_option("--n-int", orc.n_int, "Interventional rows when sampling");
  data_opt->excludes(nobs_opt);
  o->add_option("--mask", orc.mask, "Symptom nodes")->delimiter(',');
  o->add_option("--out", orc.out, "Output JSON")->required();

  BenchOpts be;
  auto* b = app.add_subcommand("bench-latency", "Time single-episode inference across node counts");
  add_seed(b, be.c);
  b->add_option("--checkpoint", be.checkpoint)->check(CLI::ExistingFile);
  b->add_option("--model", be.model, "Model preset when no checkpoint is given")->capture_default_str();
  b->add_option("--k-max", be.k_max);
  b->add_option("--k", be.k, "Real node counts")->delimiter(',');
  b->add_option("--n-obs", be.n_obs)->capture_default_str();
  b->add_option("--n-int", be.n_int)->capture_default_str();
  b->add_option("--reps", be.reps)->check(CLI::PositiveNumber)->capture_default_str();
  b->add_option("--warmup", be.warmup)->capture_default_str();
  b->add_option("--out", be.out, "Output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    Run run(sub->get_name(), argc, argv);
    if (sub == g) return cmd_generate(gen, run, out);
    if (sub == t) return cmd_train(tr, run, out);
    if (sub == f) return cmd_finetune(ft, run, out);
    if (sub == e) return cmd_evaluate(ev, run, out);
    if (sub == i) return cmd_infer(in, run, out);
    if (sub == o) return cmd_oracle(orc, run, out);
    return cmd_bench(be, run, out);
  } catch (const UsageError& ex) {
    err << "error: " << ex.what() << "\n\n" << sub->help();
    return kExitUsage;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace prim::cli
