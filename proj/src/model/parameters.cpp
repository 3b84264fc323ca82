#include "prim/model/parameters.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "prim/core/rng.hpp"

namespace prim::model {

template <typename T>
std::size_t ParameterStore<T>::add(std::string name, ad::Shape shape) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  Parameter<T> p;
  p.values.assign(ad::numel(shape), T(0));
  p.name = std::move(name);
  p.shape = std::move(shape);
  params_.push_back(std::move(p));
  return params_.size() - 1;
}

template <typename T>
bool ParameterStore<T>::contains(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return true;
  return false;
}

template <typename T>
std::size_t ParameterStore<T>::index(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].name == name) return i;
  throw std::out_of_range("unknown parameter: " + name);
}

template <typename T>
std::size_t ParameterStore<T>::count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.values.size();
  return n;
}

template <typename T>
bool ParameterStore<T>::all_finite() const {
  for (const auto& p : params_)
    for (T v : p.values)
      if (!std::isfinite(v)) return false;
  return true;
}

template <typename T>
std::uint64_t ParameterStore<T>::checksum(const std::vector<std::size_t>& which) const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) h = (h ^ b[i]) * 1099511628211ULL;
  };
  for (auto i : which) {
    const auto& p = params_.at(i);
    mix(p.name.data(), p.name.size());
    mix(p.values.data(), p.values.size() * sizeof(T));
  }
  return h;
}

template <typename T>
std::uint64_t ParameterStore<T>::checksum() const {
  std::vector<std::size_t> all(params_.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return checksum(all);
}

template <typename T>
Gradients<T> Gradients<T>::zeros_like(const ParameterStore<T>& store) {
  Gradients out;
  for (const auto& p : store) out.g.emplace_back(p.values.size(), T(0));
  return out;
}

template <typename T>
void Gradients<T>::zero() {
  for (auto& v : g) std::fill(v.begin(), v.end(), T(0));
}

template <typename T>
void Gradients<T>::add_scaled(const Gradients& other, T s) {
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = 0; j < g[i].size(); ++j) g[i][j] += s * other.g[i][j];
}

template <typename T>
T Gradients<T>::global_norm() const {
  double s = 0.0;
  for (const auto& v : g)
    for (T x : v) s += static_cast<double>(x) * static_cast<double>(x);
  return static_cast<T>(std::sqrt(s));
}

namespace {

template <typename T, typename Reg>
ModelIndex layout_with(const ModelConfig& cfg, Reg&& reg) {
  const std::size_t d = cfg.d, in = cfg.inner(), h = cfg.mlp_hidden;
  ModelIndex idx;
  idx.value_proj = reg("encoder.value_proj", ad::Shape{d});
  idx.node_embedding = reg("encoder.node_embedding", ad::Shape{cfg.k_max, d});
  idx.target_embedding = reg("encoder.target_embedding", ad::Shape{d});
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string b = "blocks." + std::to_string(l) + ".";
    auto attn = [&](const std::string& p) {
      return AttentionIndex{reg(b + p + ".wq", ad::Shape{d, in}), reg(b + p + ".wk", ad::Shape{d, in}),
                            reg(b + p + ".wv", ad::Shape{d, in}), reg(b + p + ".wo", ad::Shape{in, d}),
                            reg(b + p + ".bo", ad::Shape{d})};
    };
    auto norm = [&](const std::string& p) {
      return NormIndex{reg(b + p + ".gain", ad::Shape{d}), reg(b + p + ".bias", ad::Shape{d})};
    };
    BlockIndex blk;
    blk.sample_attn = attn("sample_attn");
    blk.sample_norm = norm("sample_norm");
    blk.node_attn = attn("node_attn");
    blk.node_norm = norm("node_norm");
    blk.mlp_w1 = reg(b + "mlp.w1", ad::Shape{d, h});
    blk.mlp_b1 = reg(b + "mlp.b1", ad::Shape{h});
    blk.mlp_w2 = reg(b + "mlp.w2", ad::Shape{h, d});
    blk.mlp_b2 = reg(b + "mlp.b2", ad::Shape{d});
    blk.mlp_norm = norm("mlp_norm");
    idx.blocks.push_back(blk);
  }
  idx.dec_w1 = reg("decoder.w1", ad::Shape{d, h});
  idx.dec_b1 = reg("decoder.b1", ad::Shape{h});
  idx.dec_w2 = reg("decoder.w2", ad::Shape{h, 1});
  idx.dec_b2 = reg("decoder.b2", ad::Shape{1});
  return idx;
}

}  // namespace

template <typename T>
ModelIndex build_layout(const ModelConfig& cfg, ParameterStore<T>& store) {
  cfg.validate();
  return layout_with<T>(cfg, [&](const std::string& n, ad::Shape s) { return store.add(n, std::move(s)); });
}

template <typename T>
ModelIndex find_layout(const ModelConfig& cfg, const ParameterStore<T>& store) {
  cfg.validate();
  std::size_t seen = 0;
  auto idx = layout_with<T>(cfg, [&](const std::string& n, const ad::Shape& s) {
    const auto i = store.index(n);
    if (store[i].shape != s)
      throw std::invalid_argument("parameter " + n + " has shape " + ad::shape_str(store[i].shape) +
                                  ", config expects " + ad::shape_str(s));
    ++seen;
    return i;
  });
  if (seen != store.size()) throw std::invalid_argument("store holds parameters unknown to the config");
  return idx;
}

template <typename T>
void initialize(const ModelConfig& cfg, const ModelIndex& idx, ParameterStore<T>& store,
                std::uint64_t seed) {
  Rng rng = make_rng(substream(seed, "init"));
  auto fill_uniform = [&](std::size_t i, double fan_in) {
    const double a = 1.0 / std::sqrt(fan_in);
    for (auto& v : store[i].values) v = static_cast<T>(uniform(rng, -a, a));
  };
  auto fill_normal = [&](std::size_t i) {
    for (auto& v : store[i].values) v = static_cast<T>(normal(rng));
  };
  auto fill_const = [&](std::size_t i, T c) { std::fill(store[i].values.begin(), store[i].values.end(), c); };
  const double d = static_cast<double>(cfg.d), in = static_cast<double>(cfg.inner()),
               h = static_cast<double>(cfg.mlp_hidden);

  fill_uniform(idx.value_proj, 1.0);
  fill_normal(idx.node_embedding);
  fill_normal(idx.target_embedding);
  for (const auto& b : idx.blocks) {
    for (const auto* a : {&b.sample_attn, &b.node_attn}) {
      fill_uniform(a->wq, d);
      fill_uniform(a->wk, d);
      fill_uniform(a->wv, d);
      fill_uniform(a->wo, in);
      fill_const(a->bo, T(0));
    }
    for (const auto* n : {&b.sample_norm, &b.node_norm, &b.mlp_norm}) {
      fill_const(n->gain, T(1));
      fill_const(n->bias, T(0));
    }
    fill_uniform(b.mlp_w1, d);
    fill_const(b.mlp_b1, T(0));
    fill_uniform(b.mlp_w2, h);
    fill_const(b.mlp_b2, T(0));
  }
  fill_uniform(idx.dec_w1, d);
  fill_const(idx.dec_b1, T(0));
  fill_const(idx.dec_w2, T(0));
  fill_const(idx.dec_b2, T(0));
}

std::size_t parameter_count(const ModelConfig& cfg) {
  const std::size_t d = cfg.d, in = cfg.inner(), h = cfg.mlp_hidden;
  const std::size_t attention = 3 * d * in + in * d + d;
  const std::size_t mlp = d * h + h + h * d + d;
  const std::size_t block = 2 * attention + 3 * 2 * d + mlp;
  return d + cfg.k_max * d + d + cfg.layers * block + d * h + h + h + 1;
}

template class ParameterStore<float>;
template class ParameterStore<double>;
template struct Gradients<float>;
template struct Gradients<double>;
template ModelIndex build_layout(const ModelConfig&, ParameterStore<float>&);
template ModelIndex build_layout(const ModelConfig&, ParameterStore<double>&);
template ModelIndex find_layout(const ModelConfig&, const ParameterStore<float>&);
template ModelIndex find_layout(const ModelConfig&, const ParameterStore<double>&);
template void initialize(const ModelConfig&, const ModelIndex&, ParameterStore<float>&, std::uint64_t);
template void initialize(const ModelConfig&, const ModelIndex&, ParameterStore<double>&, std::uint64_t);

}  // namespace prim::model
