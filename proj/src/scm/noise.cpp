#include <cmath>
#include <stdexcept>

#include "prim/scm/scm.hpp"

namespace prim::scm {

std::string to_string(MechanismFamily f) {
  switch (f) {
    case MechanismFamily::linear: return "linear";
    case MechanismFamily::tanh: return "tanh";
    case MechanismFamily::nn: return "nn";
    case MechanismFamily::gp: return "gp";
    case MechanismFamily::baseline: return "baseline";
  }
  return "unknown";
}

std::string to_string(NoiseFamily f) {
  switch (f) {
    case NoiseFamily::gaussian: return "gaussian";
    case NoiseFamily::poisson: return "poisson";
    case NoiseFamily::salt_pepper: return "salt_pepper";
    case NoiseFamily::trunc_exponential: return "trunc_exponential";
  }
  return "unknown";
}

std::string to_string(InterventionKind k) {
  switch (k) {
    case InterventionKind::weight_change: return "weight_change";
    case InterventionKind::additive_shift: return "additive_shift";
    case InterventionKind::hard_do: return "hard_do";
  }
  return "unknown";
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
  }
  return "unknown";
}

std::string to_string(Kernel k) {
  switch (k) {
    case Kernel::rbf: return "rbf";
    case Kernel::matern12: return "matern12";
    case Kernel::matern32: return "matern32";
  }
  return "unknown";
}

MechanismFamily mechanism_family_from_string(const std::string& s) {
  for (auto f : {MechanismFamily::linear, MechanismFamily::tanh, MechanismFamily::nn,
                 MechanismFamily::gp, MechanismFamily::baseline})
    if (to_string(f) == s) return f;
  throw std::invalid_argument("unknown mechanism family: " + s);
}

NoiseFamily noise_family_from_string(const std::string& s) {
  for (auto f : {NoiseFamily::gaussian, NoiseFamily::poisson, NoiseFamily::salt_pepper,
                 NoiseFamily::trunc_exponential})
    if (to_string(f) == s) return f;
  throw std::invalid_argument("unknown noise family: " + s);
}

InterventionKind intervention_kind_from_string(const std::string& s) {
  for (auto k : {InterventionKind::weight_change, InterventionKind::additive_shift,
                 InterventionKind::hard_do})
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown intervention kind: " + s);
}

namespace {

// Truncated Exp(rate 1/sigma) on [0, c*sigma]: mean and second moment per sigma.
double trunc_exp_mean_unit() {
  const double c = support::trunc_exp_cutoff;
  return 1.0 - c / std::expm1(c);
}

double trunc_exp_second_moment_unit() {
  const double c = support::trunc_exp_cutoff;
  const double e = std::exp(-c);
  return (2.0 - e * (c * c + 2.0 * c + 2.0)) / (1.0 - e);
}

}  // namespace

NoiseSpec sample_noise_spec(Rng& rng, NoiseFamily family) {
  return {family, log_uniform(rng, support::noise_scale_lo, support::noise_scale_hi)};
}

double sample_noise(Rng& rng, const NoiseSpec& spec) {
  const double s = spec.scale;
  switch (spec.family) {
    case NoiseFamily::gaussian:
      return normal(rng, 0.0, s);
    case NoiseFamily::poisson: {
      const double lambda = s * s;
      return static_cast<double>(std::poisson_distribution<long>(lambda)(rng)) - lambda;
    }
    case NoiseFamily::salt_pepper:
      if (bernoulli(rng, support::salt_pepper_rate))
        return (bernoulli(rng, 0.5) ? 1.0 : -1.0) * support::salt_pepper_spike * s;
      return normal(rng, 0.0, support::salt_pepper_background * s);
    case NoiseFamily::trunc_exponential: {
      const double u = uniform(rng, 0.0, 1.0);
      const double x = -std::log1p(-u * -std::expm1(-support::trunc_exp_cutoff));
      return s * (x - trunc_exp_mean_unit());
    }
  }
  throw std::logic_error("sample_noise: bad family");
}

double noise_variance(const NoiseSpec& spec) {
  const double v = spec.scale * spec.scale;
  switch (spec.family) {
    case NoiseFamily::gaussian:
    case NoiseFamily::poisson:
      return v;
    case NoiseFamily::salt_pepper: {
      const double r = support::salt_pepper_rate;
      const double spike = support::salt_pepper_spike;
      const double bg = support::salt_pepper_background;
      return v * (r * spike * spike + (1.0 - r) * bg * bg);
    }
    case NoiseFamily::trunc_exponential: {
      const double m = trunc_exp_mean_unit();
      return v * (trunc_exp_second_moment_unit() - m * m);
    }
  }
  throw std::logic_error("noise_variance: bad family");
}

}  // namespace prim::scm
