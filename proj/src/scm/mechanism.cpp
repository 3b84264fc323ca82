#include <cmath>
#include <sstream>
#include <stdexcept>

#include "prim/scm/scm.hpp"

namespace prim::scm {
namespace {

const Activation kActivations[] = {Activation::sigmoid, Activation::tanh, Activation::relu};

DenseLayer random_layer(Rng& rng, std::size_t in, std::size_t out, Activation act, bool activated) {
  DenseLayer l;
  l.in = in;
  l.out = out;
  l.act = act;
  l.activated = activated;
  l.w.resize(in * out);
  const double sd = 1.0 / std::sqrt(static_cast<double>(in));
  for (auto& w : l.w) w = normal(rng, 0.0, sd);
  return l;
}

double activate(Activation a, double x) {
  switch (a) {
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-x));
    case Activation::tanh: return std::tanh(x);
    case Activation::relu: return x > 0.0 ? x : 0.0;
  }
  return x;
}

}  // namespace

double nn_forward(const NodeMechanism& node, const std::vector<double>& input) {
  std::vector<double> h = input, next;
  for (const auto& l : node.layers) {
    if (h.size() != l.in) throw std::invalid_argument("nn_forward: input width");
    next.assign(l.out, 0.0);
    for (std::size_t i = 0; i < l.in; ++i)
      for (std::size_t o = 0; o < l.out; ++o) next[o] += h[i] * l.w[i * l.out + o];
    if (l.activated)
      for (auto& v : next) v = activate(l.act, v);
    h.swap(next);
  }
  return h.at(0);
}

void linear_moments(const ScmInstance& scm, std::vector<double>& mean, std::vector<double>& sd) {
  const std::size_t k = scm.dag.k;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  mean.assign(k, 0.0);
  sd.assign(k, 0.0);
  const double ev = noise_variance(scm.noise);
  for (auto j : scm.dag.topological_order()) {
    const auto& node = scm.nodes[j];
    const auto& pa = scm.dag.parents[j];
    std::vector<double> a(pa.size());
    for (std::size_t i = 0; i < pa.size(); ++i) a[i] = node.weights[i] / std::max(sd[pa[i]], 1e-8);
    // Cov(X_j, X_l) for every node l already placed; unplaced nodes have zero rows so far.
    for (std::size_t l = 0; l < k; ++l) {
      double c = 0.0;
      for (std::size_t i = 0; i < pa.size(); ++i) c += a[i] * cov(static_cast<Eigen::Index>(pa[i]), static_cast<Eigen::Index>(l));
      cov(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(l)) = c;
      cov(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(j)) = c;
    }
    double var = 0.0;
    for (std::size_t i = 0; i < pa.size(); ++i)
      var += a[i] * cov(static_cast<Eigen::Index>(pa[i]), static_cast<Eigen::Index>(j));
    const double m = node.noise_multiplier;
    var += node.confounder_weight * node.confounder_weight +
           node.noise_weight * node.noise_weight * m * m * ev;
    cov(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) = var;
    sd[j] = std::sqrt(std::max(var, 0.0));
  }
}

ScmInstance sample_scm(Rng& rng, const Dag& dag, MechanismFamily family, const NoiseSpec& noise) {
  ScmInstance scm;
  scm.dag = dag;
  scm.family = family;
  scm.noise = noise;
  scm.nodes.resize(dag.k);
  const double wsd = std::sqrt(support::weight_var);
  for (std::size_t j = 0; j < dag.k; ++j) {
    auto& node = scm.nodes[j];
    node.family = family;
    const std::size_t np = dag.parents[j].size();
    switch (family) {
      case MechanismFamily::linear:
        for (std::size_t i = 0; i < np; ++i) node.weights.push_back(normal(rng, 0.0, wsd));
        node.confounder_weight = normal(rng, 0.0, 1.0);
        node.noise_weight = gamma_shape_rate(rng, support::eta_shape, support::eta_rate);
        break;
      case MechanismFamily::tanh:
        for (std::size_t i = 0; i < np; ++i) {
          node.weights.push_back(normal(rng, 0.0, wsd));
          node.slopes.push_back(uniform(rng, support::slope_lo, support::slope_hi));
        }
        node.confounder_weight = normal(rng, 0.0, 1.0);
        break;
      case MechanismFamily::nn: {
        const std::size_t in = np == 0 ? 1 : np;
        const auto a1 = kActivations[uniform_index(rng, 3)];
        const auto a2 = kActivations[uniform_index(rng, 3)];
        node.layers.push_back(random_layer(rng, in, support::nn_hidden, a1, true));
        node.layers.push_back(random_layer(rng, support::nn_hidden, support::nn_hidden, a2, true));
        node.layers.push_back(random_layer(rng, support::nn_hidden, 1, Activation::relu, false));
        break;
      }
      case MechanismFamily::gp:
        node.kernel = static_cast<Kernel>(uniform_index(rng, 3));
        node.lengthscale = log_uniform(rng, support::lengthscale_lo, support::lengthscale_hi);
        node.output_scale = uniform(rng, support::output_scale_lo, support::output_scale_hi);
        node.gp_noise_variance = gamma_shape_rate(rng, support::gp_noise_shape, support::gp_noise_rate);
        break;
      case MechanismFamily::baseline:
        node.level = uniform(rng, support::level_lo, support::level_hi);
        for (std::size_t i = 0; i < np; ++i) node.weights.push_back(normal(rng, 0.0, wsd));
        node.noise_weight = support::baseline_noise_factor;
        break;
    }
  }
  if (family == MechanismFamily::linear) {
    std::vector<double> mean, sd;
    linear_moments(scm, mean, sd);
    for (std::size_t j = 0; j < dag.k; ++j)
      for (auto p : dag.parents[j]) {
        scm.nodes[j].parent_center.push_back(mean[p]);
        scm.nodes[j].parent_scale.push_back(std::max(sd[p], 1e-8));
      }
  } else if (family == MechanismFamily::baseline) {
    for (std::size_t j = 0; j < dag.k; ++j)
      for (auto p : dag.parents[j]) {
        scm.nodes[j].parent_center.push_back(scm.nodes[p].level);
        scm.nodes[j].parent_scale.push_back(1.0);
      }
  }
  return scm;
}

std::vector<std::string> support_violations(const ScmInstance& scm) {
  std::vector<std::string> out;
  auto bad = [&](std::size_t j, const std::string& what, double v) {
    std::ostringstream os;
    os << "node " << j << ": " << what << " = " << v;
    out.push_back(os.str());
  };
  if (scm.noise.scale < support::noise_scale_lo || scm.noise.scale > support::noise_scale_hi)
    bad(0, "noise scale", scm.noise.scale);
  for (std::size_t j = 0; j < scm.nodes.size(); ++j) {
    const auto& n = scm.nodes[j];
    const std::size_t np = scm.dag.parents[j].size();
    if (!std::isfinite(n.confounder_weight)) bad(j, "confounder weight", n.confounder_weight);
    for (double w : n.weights)
      if (!std::isfinite(w)) bad(j, "weight", w);
    switch (n.family) {
      case MechanismFamily::linear:
        if (n.weights.size() != np) bad(j, "weight count", static_cast<double>(n.weights.size()));
        if (!(n.noise_weight > 0.0)) bad(j, "eta", n.noise_weight);
        break;
      case MechanismFamily::tanh:
        if (n.weights.size() != np || n.slopes.size() != np) bad(j, "tanh arity", static_cast<double>(np));
        for (double s : n.slopes)
          if (s < support::slope_lo || s > support::slope_hi) bad(j, "slope", s);
        break;
      case MechanismFamily::nn:
        if (n.layers.size() != 3) bad(j, "layer count", static_cast<double>(n.layers.size()));
        for (const auto& l : n.layers)
          for (double w : l.w)
            if (!std::isfinite(w)) bad(j, "nn weight", w);
        break;
      case MechanismFamily::gp:
        if (n.lengthscale < support::lengthscale_lo || n.lengthscale > support::lengthscale_hi)
          bad(j, "lengthscale", n.lengthscale);
        if (n.output_scale < support::output_scale_lo || n.output_scale > support::output_scale_hi)
          bad(j, "output scale", n.output_scale);
        if (!(n.gp_noise_variance > 0.0)) bad(j, "gp noise variance", n.gp_noise_variance);
        break;
      case MechanismFamily::baseline:
        if (n.level < support::level_lo || n.level > support::level_hi) bad(j, "level", n.level);
        break;
    }
  }
  return out;
}

}  // namespace prim::scm
