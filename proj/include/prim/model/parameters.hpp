#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prim/autodiff/tape.hpp"
#include "prim/model/config.hpp"

namespace prim::model {

template <typename T>
struct Parameter {
  std::string name;
  ad::Shape shape;
  std::vector<T> values;
};

/// Named model tensors in a fixed creation order.
template <typename T>
class ParameterStore {
 public:
  /// Appends a zero-filled tensor; throws on a duplicate name.
  std::size_t add(std::string name, ad::Shape shape);
  std::size_t index(const std::string& name) const;  // throws if absent
  bool contains(const std::string& name) const;

  Parameter<T>& operator[](std::size_t i) { return params_[i]; }
  const Parameter<T>& operator[](std::size_t i) const { return params_[i]; }
  Parameter<T>& at(const std::string& name) { return params_[index(name)]; }
  const Parameter<T>& at(const std::string& name) const { return params_[index(name)]; }
  std::size_t size() const { return params_.size(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  std::size_t count() const;  // total scalar count
  bool all_finite() const;
  /// FNV-1a over names and raw bytes of the selected tensors.
  std::uint64_t checksum(const std::vector<std::size_t>& which) const;
  std::uint64_t checksum() const;

  template <typename U>
  ParameterStore<U> cast() const {
    ParameterStore<U> out;
    for (const auto& p : params_) {
      auto& q = out[out.add(p.name, p.shape)];
      for (std::size_t i = 0; i < p.values.size(); ++i) q.values[i] = static_cast<U>(p.values[i]);
    }
    return out;
  }

 private:
  std::vector<Parameter<T>> params_;
};

/// One gradient buffer per parameter, aligned with a ParameterStore.
template <typename T>
struct Gradients {
  std::vector<std::vector<T>> g;

  static Gradients zeros_like(const ParameterStore<T>& store);
  void zero();
  void add_scaled(const Gradients& other, T s);
  T global_norm() const;
};

/// Indices of the named tensors of one MACE model inside its store.
struct AttentionIndex {
  std::size_t wq, wk, wv, wo, bo;
};
struct NormIndex {
  std::size_t gain, bias;
};
struct BlockIndex {
  AttentionIndex sample_attn, node_attn;
  NormIndex sample_norm, node_norm, mlp_norm;
  std::size_t mlp_w1, mlp_b1, mlp_w2, mlp_b2;
};
struct ModelIndex {
  std::size_t value_proj, node_embedding, target_embedding;
  std::vector<BlockIndex> blocks;
  std::size_t dec_w1, dec_b1, dec_w2, dec_b2;

  std::vector<std::size_t> decoder() const { return {dec_w1, dec_b1, dec_w2, dec_b2}; }
};

/// Registers every tensor of the architecture (zero-filled) and returns its index.
template <typename T>
ModelIndex build_layout(const ModelConfig& cfg, ParameterStore<T>& store);

/// Looks up the layout in a store that already holds the tensors.
template <typename T>
ModelIndex find_layout(const ModelConfig& cfg, const ParameterStore<T>& store);

/// Weight init: uniform(+-1/sqrt(fan_in)) for projections, unit gains, zero
/// biases, N(0,1) embeddings, zero decoder output layer.
template <typename T>
void initialize(const ModelConfig& cfg, const ModelIndex& idx, ParameterStore<T>& store,
                std::uint64_t seed);

/// Closed-form parameter count of the architecture.
std::size_t parameter_count(const ModelConfig& cfg);

}  // namespace prim::model
