#include "prim/model/mace.hpp"

#include <limits>
#include <stdexcept>

#include "prim/core/rng.hpp"

namespace prim::model {

template <typename T>
EpisodeData<T> to_model_input(const scm::Episode& e) {
  EpisodeData<T> x;
  x.k_max = e.k_max;
  x.n_obs = e.n_obs();
  x.n_int = e.n_int();
  x.obs.resize(x.k_max * x.n_obs);
  x.intv.resize(x.k_max * x.n_int);
  for (std::size_t k = 0; k < x.k_max; ++k) {
    const auto c = static_cast<Eigen::Index>(k);
    for (std::size_t s = 0; s < x.n_obs; ++s)
      x.obs[k * x.n_obs + s] = static_cast<T>(e.obs(static_cast<Eigen::Index>(s), c));
    for (std::size_t s = 0; s < x.n_int; ++s)
      x.intv[k * x.n_int + s] = static_cast<T>(e.intv(static_cast<Eigen::Index>(s), c));
  }
  x.mask = e.mask;
  x.pad_mask = e.pad_mask;
  x.valid.resize(x.k_max);
  for (std::size_t k = 0; k < x.k_max; ++k) x.valid[k] = e.pad_mask[k] ? 0 : 1;
  return x;
}

template <typename T>
Mace<T>::Mace(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  idx_ = build_layout(cfg_, store_);
  initialize(cfg_, idx_, store_, seed);
}

template <typename T>
Mace<T>::Mace(ModelConfig cfg, ParameterStore<T> params) : cfg_(std::move(cfg)), store_(std::move(params)) {
  idx_ = find_layout(cfg_, store_);
}

template <typename T>
typename Mace<T>::Bound Mace<T>::bind(Tape& tape) const {
  Bound b;
  b.p.reserve(store_.size());
  for (const auto& p : store_) b.p.push_back(tape.external(p.shape, p.values));
  return b;
}

template <typename T>
typename Mace<T>::Streams Mace<T>::encode(Tape& tape, const Bound& b, const EpisodeData<T>& x) const {
  if (x.k_max != cfg_.k_max)
    throw std::invalid_argument("episode K_max " + std::to_string(x.k_max) + " differs from model K_max " +
                                std::to_string(cfg_.k_max));
  (void)tape;
  Var w = b[idx_.value_proj], table = b[idx_.node_embedding];
  Var obs = ad::embed_scalars<T>(x.obs, x.k_max, x.n_obs, w, table);
  Var intv = ad::embed_scalars<T>(x.intv, x.k_max, x.n_int, w, table);
  intv = ad::add_vector_at(intv, b[idx_.target_embedding], x.mask);
  return {ad::zero_rows(obs, x.valid), ad::zero_rows(intv, x.valid)};
}

template <typename T>
typename Mace<T>::Var Mace<T>::self_or_cross(Tape&, const AttentionIndex& a, const Bound& b, Var q_in,
                                             Var kv_in) const {
  Var none;
  Var q = ad::linear(q_in, b[a.wq], none);
  Var k = ad::linear(kv_in, b[a.wk], none);
  Var v = ad::linear(kv_in, b[a.wv], none);
  Var o = ad::attention(q, k, v, std::span<const std::uint8_t>{}, cfg_.heads);
  return ad::linear(o, b[a.wo], b[a.bo]);
}

template <typename T>
typename Mace<T>::Var Mace<T>::regularise(Var x, const ForwardOptions& opt, std::uint64_t& site) const {
  const std::uint64_t s = site++;
  if (!opt.train || cfg_.dropout <= 0.0) return x;
  return ad::dropout(x, static_cast<T>(cfg_.dropout), substream(opt.seed, s));
}

template <typename T>
typename Mace<T>::Var Mace<T>::norm(const Bound& b, const NormIndex& n, Var x,
                                     const std::vector<std::uint8_t>& valid) const {
  return ad::zero_rows(ad::layer_norm(x, b[n.gain], b[n.bias], static_cast<T>(cfg_.ln_eps)), valid);
}

template <typename T>
typename Mace<T>::Streams Mace<T>::attend_samples(Tape& tape, const Bound& b, std::size_t layer, Streams h,
                                                  const EpisodeData<T>& x, const ForwardOptions& opt,
                                                  std::uint64_t& site) const {
  const auto& blk = idx_.blocks.at(layer);
  Var obs_att = self_or_cross(tape, blk.sample_attn, b, h.obs, h.obs);
  Var int_kv = cfg_.int_self_attention ? ad::concat_axis1(h.obs, h.intv) : h.obs;
  Var int_att = self_or_cross(tape, blk.sample_attn, b, h.intv, int_kv);
  Var obs = norm(b, blk.sample_norm, ad::add(h.obs, regularise(obs_att, opt, site)), x.valid);
  Var intv = norm(b, blk.sample_norm, ad::add(h.intv, regularise(int_att, opt, site)), x.valid);
  return {obs, intv};
}

template <typename T>
typename Mace<T>::Streams Mace<T>::attend_nodes(Tape&, const Bound& b, std::size_t layer, Streams h,
                                                const EpisodeData<T>& x, const ForwardOptions& opt,
                                                std::uint64_t& site) const {
  const auto& blk = idx_.blocks.at(layer);
  const auto& a = blk.node_attn;
  auto one = [&](Var s) {
    Var t = ad::swap01(s);  // [n, K, d]
    Var none;
    Var q = ad::linear(t, b[a.wq], none);
    Var k = ad::linear(t, b[a.wk], none);
    Var v = ad::linear(t, b[a.wv], none);
    Var o = ad::linear(ad::attention(q, k, v, std::span<const std::uint8_t>(x.pad_mask), cfg_.heads), b[a.wo],
                       b[a.bo]);
    return norm(b, blk.node_norm, ad::add(s, regularise(ad::swap01(o), opt, site)), x.valid);
  };
  Var obs = one(h.obs);
  Var intv = one(h.intv);
  return {obs, intv};
}

template <typename T>
typename Mace<T>::Streams Mace<T>::block(Tape& tape, const Bound& b, std::size_t layer, Streams h,
                                         const EpisodeData<T>& x, const ForwardOptions& opt,
                                         std::uint64_t& site) const {
  h = attend_samples(tape, b, layer, h, x, opt, site);
  h = attend_nodes(tape, b, layer, h, x, opt, site);
  const auto& blk = idx_.blocks[layer];
  auto mlp = [&](Var s) {
    Var hid = ad::relu(ad::linear(s, b[blk.mlp_w1], b[blk.mlp_b1]));
    Var out = ad::linear(hid, b[blk.mlp_w2], b[blk.mlp_b2]);
    return norm(b, blk.mlp_norm, ad::add(s, regularise(out, opt, site)), x.valid);
  };
  Var obs = mlp(h.obs);
  Var intv = mlp(h.intv);
  return {obs, intv};
}

template <typename T>
typename Mace<T>::Var Mace<T>::decode(Tape&, const Bound& b, Streams h, const EpisodeData<T>& x) const {
  Var delta = ad::sub(ad::mean_axis1(h.intv), ad::mean_axis1(h.obs));  // [K, d]
  Var hid = ad::relu(ad::linear(delta, b[idx_.dec_w1], b[idx_.dec_b1]));
  Var out = ad::reshape(ad::linear(hid, b[idx_.dec_w2], b[idx_.dec_b2]), ad::Shape{x.k_max});
  return ad::masked_fill(out, std::span<const std::uint8_t>(x.pad_mask), -std::numeric_limits<T>::infinity());
}

template <typename T>
typename Mace<T>::Var Mace<T>::forward(Tape& tape, const Bound& b, const EpisodeData<T>& x,
                                       const ForwardOptions& opt) const {
  std::uint64_t site = 0;
  Streams h = encode(tape, b, x);
  for (std::size_t l = 0; l < cfg_.layers; ++l) h = block(tape, b, l, h, x, opt, site);
  return decode(tape, b, h, x);
}

template <typename T>
std::vector<T> Mace<T>::logits(const EpisodeData<T>& x) const {
  Tape tape(false);
  auto b = bind(tape);
  auto v = forward(tape, b, x).value();
  return {v.begin(), v.end()};
}

template <typename T>
std::vector<T> Mace<T>::logits(const scm::Episode& e) const {
  return logits(to_model_input<T>(e));
}

template <typename T>
void Mace<T>::accumulate_gradients(const Bound& b, Gradients<T>& out) const {
  if (out.g.size() != store_.size()) throw std::invalid_argument("gradient buffer does not match the store");
  for (std::size_t i = 0; i < b.p.size(); ++i) {
    auto g = b.p[i].grad();
    if (g.empty()) continue;
    auto& dst = out.g[i];
    for (std::size_t j = 0; j < g.size(); ++j) dst[j] += g[j];
  }
}

template EpisodeData<float> to_model_input<float>(const scm::Episode&);
template EpisodeData<double> to_model_input<double>(const scm::Episode&);
template class Mace<float>;
template class Mace<double>;

}  // namespace prim::model
