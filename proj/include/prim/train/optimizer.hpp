#pragma once

#include <vector>

#include "prim/model/parameters.hpp"

namespace prim::train {

struct AdamWConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// Adam with decoupled weight decay: p <- p - lr*wd*p - lr * m_hat / (sqrt(v_hat) + eps).
template <typename T>
class AdamW {
 public:
  AdamW(AdamWConfig cfg, const model::ParameterStore<T>& store);

  /// One update. `trainable[i] == 0` leaves parameter i and its moments
  /// untouched; an empty vector trains everything. `lr_scale` multiplies lr.
  void step(model::ParameterStore<T>& store, const model::Gradients<T>& grads,
            const std::vector<std::uint8_t>& trainable = {}, double lr_scale = 1.0);

  std::size_t steps() const { return t_; }
  const AdamWConfig& config() const { return cfg_; }

 private:
  AdamWConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

extern template class AdamW<float>;
extern template class AdamW<double>;

}  // namespace prim::train
