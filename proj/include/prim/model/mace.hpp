#pragma once

#include <cstdint>
#include <vector>

#include "prim/autodiff/ops.hpp"
#include "prim/model/parameters.hpp"
#include "prim/scm/episode.hpp"

namespace prim::model {

/// Episode tensors in the model's node-major layout: obs[k * n_obs + s].
template <typename T>
struct EpisodeData {
  std::size_t k_max = 0, n_obs = 0, n_int = 0;
  std::vector<T> obs, intv;
  std::vector<std::uint8_t> mask, valid, pad_mask;
};

template <typename T>
EpisodeData<T> to_model_input(const scm::Episode& e);

struct ForwardOptions {
  bool train = false;          // enables dropout
  std::uint64_t seed = 0;      // dropout stream
};

template <typename T>
class Mace {
 public:
  using Var = ad::Var<T>;
  using Tape = ad::Tape<T>;

  struct Streams {
    Var obs;   // [K, n_obs, d]
    Var intv;  // [K, n_int, d]
  };

  /// Parameters bound to one tape, indexed like the store.
  struct Bound {
    std::vector<Var> p;
    const Var& operator[](std::size_t i) const { return p[i]; }
  };

  Mace(ModelConfig cfg, std::uint64_t seed);
  Mace(ModelConfig cfg, ParameterStore<T> params);

  const ModelConfig& config() const { return cfg_; }
  const ModelIndex& index() const { return idx_; }
  ParameterStore<T>& params() { return store_; }
  const ParameterStore<T>& params() const { return store_; }

  Bound bind(Tape& tape) const;

  Streams encode(Tape& tape, const Bound& b, const EpisodeData<T>& x) const;
  /// Obs self-attention and int->obs cross-attention per node.
  Streams attend_samples(Tape& tape, const Bound& b, std::size_t layer, Streams h,
                         const EpisodeData<T>& x, const ForwardOptions& opt, std::uint64_t& site) const;
  /// Attention across node positions for every sample.
  Streams attend_nodes(Tape& tape, const Bound& b, std::size_t layer, Streams h,
                       const EpisodeData<T>& x, const ForwardOptions& opt, std::uint64_t& site) const;
  Streams block(Tape& tape, const Bound& b, std::size_t layer, Streams h, const EpisodeData<T>& x,
                const ForwardOptions& opt, std::uint64_t& site) const;
  /// Mean-pool difference, decoder MLP, -inf at padded nodes. Returns [K_max].
  Var decode(Tape& tape, const Bound& b, Streams h, const EpisodeData<T>& x) const;

  Var forward(Tape& tape, const Bound& b, const EpisodeData<T>& x, const ForwardOptions& opt = {}) const;

  /// Inference without recording a backward graph.
  std::vector<T> logits(const scm::Episode& e) const;
  std::vector<T> logits(const EpisodeData<T>& x) const;

  /// Adds the gradients accumulated on the bound parameters into `out`.
  void accumulate_gradients(const Bound& b, Gradients<T>& out) const;

 private:
  Var self_or_cross(Tape& tape, const AttentionIndex& a, const Bound& b, Var q_in, Var kv_in) const;
  Var regularise(Var x, const ForwardOptions& opt, std::uint64_t& site) const;
  Var norm(const Bound& b, const NormIndex& n, Var x, const std::vector<std::uint8_t>& valid) const;

  ModelConfig cfg_;
  ParameterStore<T> store_;
  ModelIndex idx_;
};

extern template class Mace<float>;
extern template class Mace<double>;

}  // namespace prim::model
