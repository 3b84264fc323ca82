#include "prim/train/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace prim::train {

template <typename T>
AdamW<T>::AdamW(AdamWConfig cfg, const model::ParameterStore<T>& store) : cfg_(cfg) {
  if (!(cfg_.lr > 0.0)) throw std::invalid_argument("AdamW: lr must be positive");
  for (const auto& p : store) {
    m_.emplace_back(p.values.size(), 0.0);
    v_.emplace_back(p.values.size(), 0.0);
  }
}

template <typename T>
void AdamW<T>::step(model::ParameterStore<T>& store, const model::Gradients<T>& grads,
                    const std::vector<std::uint8_t>& trainable, double lr_scale) {
  if (grads.g.size() != store.size() || m_.size() != store.size())
    throw std::invalid_argument("AdamW: gradient/store size mismatch");
  ++t_;
  const double lr = cfg_.lr * lr_scale;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < store.size(); ++i) {
    if (!trainable.empty() && !trainable[i]) continue;
    auto& p = store[i].values;
    const auto& g = grads.g[i];
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double gj = static_cast<double>(g[j]);
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * gj;
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * gj * gj;
      double x = static_cast<double>(p[j]);
      x -= lr * cfg_.weight_decay * x;
      x -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + cfg_.eps);
      p[j] = static_cast<T>(x);
    }
  }
}

template class AdamW<float>;
template class AdamW<double>;

}  // namespace prim::train
