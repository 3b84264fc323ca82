#include <cmath>
#include <stdexcept>

#include "prim/scm/scm.hpp"

namespace prim::scm {

InterventionKind sample_intervention_kind(Rng& rng, const std::array<double, 3>& probs) {
  std::discrete_distribution<int> d(probs.begin(), probs.end());
  return static_cast<InterventionKind>(d(rng));
}

InterventionSpec draw_intervention(Rng& rng, const ScmInstance& scm,
                                   std::vector<std::size_t> targets, InterventionKind kind,
                                   const Eigen::MatrixXd& obs_raw) {
  if (targets.empty()) throw std::invalid_argument("draw_intervention: no targets");
  for (auto t : targets)
    if (t >= scm.dag.k) throw std::invalid_argument("draw_intervention: target out of range");
  InterventionSpec spec;
  spec.targets = std::move(targets);
  spec.kind = kind;
  spec.scale = uniform(rng, support::change_lo, support::change_hi);
  for (auto t : spec.targets) {
    if (kind == InterventionKind::additive_shift) {
      if (scm.family == MechanismFamily::baseline) {
        spec.shifts.push_back(-scm.nodes[t].level *
                              uniform(rng, support::baseline_drop_lo, support::baseline_drop_hi));
      } else {
        const double sign = bernoulli(rng, 0.5) ? 1.0 : -1.0;
        spec.shifts.push_back(sign * uniform(rng, support::shift_lo, support::shift_hi) *
                              scm.noise.scale * spec.scale);
      }
    } else if (kind == InterventionKind::hard_do) {
      const auto col = obs_raw.col(static_cast<Eigen::Index>(t));
      const double mu = col.mean();
      const double sd = std::sqrt((col.array() - mu).square().mean());
      const double sign = bernoulli(rng, 0.5) ? 1.0 : -1.0;
      spec.pinned_values.push_back(mu + sign * uniform(rng, support::pin_lo, support::pin_hi) * sd);
    }
  }
  return spec;
}

namespace {

Activation other_activation(Rng& rng, Activation a) {
  const Activation all[] = {Activation::sigmoid, Activation::tanh, Activation::relu};
  Activation pick[2];
  int n = 0;
  for (auto x : all)
    if (x != a) pick[n++] = x;
  return pick[uniform_index(rng, 2)];
}

void weight_change(Rng& rng, const ScmInstance& scm, std::size_t t, double c, NodeMechanism& node) {
  const bool root = scm.dag.parents[t].empty();
  if (root || node.family == MechanismFamily::gp) {
    node.noise_multiplier *= c;
    return;
  }
  if (node.family == MechanismFamily::nn) {
    if (bernoulli(rng, 0.5)) {
      for (auto& l : node.layers)
        for (auto& w : l.w) w *= c * (bernoulli(rng, 0.5) ? 1.0 : -1.0);
    } else {
      for (auto& l : node.layers)
        if (l.activated) l.act = other_activation(rng, l.act);
    }
    return;
  }
  for (auto& w : node.weights) w *= c * (bernoulli(rng, 0.5) ? 1.0 : -1.0);
}

}  // namespace

ScmInstance apply_intervention(Rng& rng, const ScmInstance& scm, const InterventionSpec& spec) {
  ScmInstance out = scm;
  for (std::size_t i = 0; i < spec.targets.size(); ++i) {
    const auto t = spec.targets[i];
    if (t >= scm.dag.k) throw std::invalid_argument("apply_intervention: target out of range");
    auto& node = out.nodes[t];
    switch (spec.kind) {
      case InterventionKind::weight_change:
        weight_change(rng, scm, t, spec.scale, node);
        break;
      case InterventionKind::additive_shift:
        node.shift += spec.shifts.at(i);
        break;
      case InterventionKind::hard_do:
        node.pinned = true;
        node.pinned_value = spec.pinned_values.at(i);
        break;
    }
  }
  return out;
}

}  // namespace prim::scm
