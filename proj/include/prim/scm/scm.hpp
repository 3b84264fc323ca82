#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "prim/core/rng.hpp"
#include "prim/scm/dag.hpp"

namespace prim::scm {

enum class MechanismFamily { linear, tanh, nn, gp, baseline };
enum class NoiseFamily { gaussian, poisson, salt_pepper, trunc_exponential };
enum class Activation { sigmoid, tanh, relu };
enum class Kernel { rbf, matern12, matern32 };
enum class InterventionKind { weight_change, additive_shift, hard_do };

std::string to_string(MechanismFamily f);
std::string to_string(NoiseFamily f);
std::string to_string(InterventionKind k);
std::string to_string(Activation a);
std::string to_string(Kernel k);
MechanismFamily mechanism_family_from_string(const std::string& s);
NoiseFamily noise_family_from_string(const std::string& s);
InterventionKind intervention_kind_from_string(const std::string& s);

// Prior supports. Kept in one place so samplers and validators agree.
namespace support {
inline constexpr double weight_var = 3.0;
inline constexpr double eta_shape = 2.5, eta_rate = 2.5;
inline constexpr double slope_lo = 0.8, slope_hi = 1.5;
inline constexpr double lengthscale_lo = 0.1, lengthscale_hi = 5.0;
inline constexpr double output_scale_lo = 0.5, output_scale_hi = 2.0;
inline constexpr double gp_noise_shape = 2.5, gp_noise_rate = 0.4;
inline constexpr double level_lo = 90.0, level_hi = 100.0;
inline constexpr double noise_scale_lo = 0.05, noise_scale_hi = 2.0;
inline constexpr double change_lo = 3.0, change_hi = 5.0;
inline constexpr double shift_lo = 0.5, shift_hi = 2.0;
inline constexpr double baseline_drop_lo = 0.03, baseline_drop_hi = 0.15;
inline constexpr double pin_lo = 2.0, pin_hi = 4.0;
inline constexpr std::size_t nn_hidden = 16;
inline constexpr double baseline_noise_factor = 1e-3;
inline constexpr double salt_pepper_rate = 0.05;
inline constexpr double salt_pepper_spike = 5.0;
inline constexpr double salt_pepper_background = 0.1;  // std multiplier
inline constexpr double trunc_exp_cutoff = 3.0;        // in units of sigma
}  // namespace support

struct NoiseSpec {
  NoiseFamily family = NoiseFamily::gaussian;
  double scale = 1.0;
  bool operator==(const NoiseSpec&) const = default;
};

/// Centred draw from the noise family.
double sample_noise(Rng& rng, const NoiseSpec& spec);
/// Exact variance of one centred draw.
double noise_variance(const NoiseSpec& spec);

struct DenseLayer {
  std::size_t in = 0, out = 0;
  std::vector<double> w;  // in x out, row-major
  Activation act = Activation::relu;
  bool activated = true;  // false for the output layer
  bool operator==(const DenseLayer&) const = default;
};

struct NodeMechanism {
  MechanismFamily family = MechanismFamily::linear;
  // linear / tanh / baseline: one entry per parent, aligned with dag.parents
  std::vector<double> weights;
  std::vector<double> slopes;
  std::vector<double> parent_center;
  std::vector<double> parent_scale;
  double confounder_weight = 0.0;
  double noise_weight = 1.0;
  // nn
  std::vector<DenseLayer> layers;
  // gp
  Kernel kernel = Kernel::rbf;
  double lengthscale = 1.0;
  double output_scale = 1.0;
  double gp_noise_variance = 1.0;
  // baseline
  double level = 0.0;
  // intervention state
  double noise_multiplier = 1.0;
  double shift = 0.0;
  bool pinned = false;
  double pinned_value = 0.0;

  bool operator==(const NodeMechanism&) const = default;
};

struct ScmInstance {
  Dag dag;
  MechanismFamily family = MechanismFamily::linear;
  NoiseSpec noise;
  std::vector<NodeMechanism> nodes;
};

ScmInstance sample_scm(Rng& rng, const Dag& dag, MechanismFamily family, const NoiseSpec& noise);
NoiseSpec sample_noise_spec(Rng& rng, NoiseFamily family);

/// Analytic mean/std of each node of a linear SCM without interventions.
/// Used to standardise parent inputs.
void linear_moments(const ScmInstance& scm, std::vector<double>& mean, std::vector<double>& sd);

/// Evaluates the NN mechanism on one input vector.
double nn_forward(const NodeMechanism& node, const std::vector<double>& input);

/// GP function values drawn in the observational regime, kept so that a later
/// interventional draw uses the same function.
struct GpMemory {
  std::vector<Eigen::MatrixXd> inputs;  // per node; empty for non-GP nodes
  std::vector<Eigen::VectorXd> values;
};

Eigen::MatrixXd gp_kernel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, Kernel kernel,
                          double lengthscale, double output_scale);

/// Ancestral sampling; returns an n x k matrix. When `memory` is given, GP
/// function values are recorded into it.
Eigen::MatrixXd sample_observational(Rng& rng, const ScmInstance& scm, std::size_t n,
                                     GpMemory* memory = nullptr);

/// Like sample_observational, but GP function values are drawn conditionally
/// on the recorded observational draw so both regimes share one function.
Eigen::MatrixXd sample_interventional(Rng& rng, const ScmInstance& scm, std::size_t n,
                                      const GpMemory* memory);

struct InterventionSpec {
  std::vector<std::size_t> targets;
  InterventionKind kind = InterventionKind::weight_change;
  double scale = 1.0;                // c
  std::vector<double> shifts;        // per target, additive_shift
  std::vector<double> pinned_values; // per target, hard_do
};

InterventionKind sample_intervention_kind(Rng& rng, const std::array<double, 3>& probs);

/// Draws the continuous intervention parameters. `obs_raw` supplies the
/// observational mean/std needed for hard interventions.
InterventionSpec draw_intervention(Rng& rng, const ScmInstance& scm,
                                   std::vector<std::size_t> targets, InterventionKind kind,
                                   const Eigen::MatrixXd& obs_raw);

/// Returns a copy with only the mechanisms of the targets modified.
ScmInstance apply_intervention(Rng& rng, const ScmInstance& scm, const InterventionSpec& spec);

/// Human-readable reasons why a sampled parameter lies outside its support.
std::vector<std::string> support_violations(const ScmInstance& scm);

}  // namespace prim::scm
