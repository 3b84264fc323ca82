#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "prim/scm/scm.hpp"

namespace prim::scm {

struct NormStats {
  double mean = 0.0;
  double std = 1.0;  // population std before the zero guard
};

inline constexpr double kStdFloor = 1e-8;
inline constexpr double kClip = 10.0;

struct Normalized {
  Eigen::MatrixXd obs;   // n_obs x k_max
  Eigen::MatrixXd intv;  // n_int x k_max
  std::vector<std::uint8_t> pad_mask;  // 1 at padded positions
  std::vector<NormStats> stats;        // k_real entries
};

/// z-score with observational statistics, clip to +-10, scale by k_max/k_real,
/// zero-pad to k_max columns.
Normalized normalize_and_pad(const Eigen::MatrixXd& obs_raw, const Eigen::MatrixXd& int_raw,
                             std::size_t k_real, std::size_t k_max);

struct Episode {
  std::size_t k_real = 0;
  std::size_t k_max = 0;
  Eigen::MatrixXd obs;
  Eigen::MatrixXd intv;
  std::vector<std::uint8_t> mask;      // symptom mask, k_max entries
  std::vector<std::size_t> targets;    // root causes
  std::vector<std::uint8_t> pad_mask;  // 1 at padded positions
  std::vector<NormStats> norm_stats;
  std::string family;
  std::uint64_t seed = 0;
  std::size_t query = 0;
  std::string kind;  // intervention kind, informational
  bool time_node = false;  // last real column is a time ramp (factory scenarios)

  std::size_t n_obs() const { return static_cast<std::size_t>(obs.rows()); }
  std::size_t n_int() const { return static_cast<std::size_t>(intv.rows()); }
  std::vector<std::uint8_t> valid() const;
};

/// Scale applied to z-scores: k_max over the number of z-scored columns.
double scale_factor(const Episode& e);

/// Throws std::invalid_argument naming the first violated Episode invariant.
void validate_episode(const Episode& e, bool require_mask_in_descendants = false,
                      const Dag* dag = nullptr);

struct PriorConfig {
  std::size_t k_min = 2;
  std::size_t k_max = 5;
  std::size_t n_obs_min = 5, n_obs_max = 500;
  std::size_t n_int_min = 1, n_int_max = 200;
  std::size_t queries = 4;
  double degree_min = 1.8, degree_max = 2.5;
  std::vector<GraphFamily> graphs = {GraphFamily::erdos_renyi, GraphFamily::barabasi_albert,
                                     GraphFamily::bipartite};
  std::vector<MechanismFamily> mechanisms = {MechanismFamily::linear, MechanismFamily::tanh,
                                             MechanismFamily::nn, MechanismFamily::gp,
                                             MechanismFamily::baseline};
  std::vector<NoiseFamily> noises = {NoiseFamily::gaussian, NoiseFamily::poisson,
                                     NoiseFamily::salt_pepper, NoiseFamily::trunc_exponential};
  std::array<double, 3> kind_probs = {0.80, 0.15, 0.05};
  std::size_t targets_per_scenario = 1;
};

struct EpisodeDraw {
  ScmInstance scm;
  std::vector<InterventionSpec> interventions;
  std::vector<Episode> queries;
};

/// One SCM with `queries` scenarios. Seeded from (seed) alone.
EpisodeDraw sample_episode(std::uint64_t seed, const PriorConfig& config);

/// Symptom mask for the given targets: uniform over descendants-or-self for a
/// single target; for several targets a common descendant-or-self when one
/// exists, otherwise one descendant-or-self per target.
std::vector<std::size_t> draw_mask_nodes(Rng& rng, const Dag& dag,
                                         const std::vector<std::size_t>& targets);

// Corpus I/O: line-delimited JSON with a schema header on the first line.
inline constexpr const char* kCorpusSchema = "prim-episodes";
inline constexpr int kCorpusVersion = 1;

void write_corpus_header(std::ostream& os);
void write_episode(std::ostream& os, const Episode& e);
std::vector<Episode> read_corpus(std::istream& is);
std::vector<Episode> read_corpus_file(const std::string& path);

}  // namespace prim::scm
