#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "../support/finite_diff.hpp"
#include "prim/core/rng.hpp"
#include "prim/model/checkpoint.hpp"
#include "prim/model/ranking.hpp"

using namespace prim;
using namespace prim::model;

namespace {

scm::Episode random_episode(Rng& rng, std::size_t k_real, std::size_t k_max, std::size_t n_obs,
                            std::size_t n_int, std::size_t mask_node) {
  scm::Episode e;
  e.k_real = k_real;
  e.k_max = k_max;
  e.obs = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_obs), static_cast<Eigen::Index>(k_max));
  e.intv = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_int), static_cast<Eigen::Index>(k_max));
  for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(k_real); ++c) {
    for (Eigen::Index r = 0; r < e.obs.rows(); ++r) e.obs(r, c) = normal(rng);
    for (Eigen::Index r = 0; r < e.intv.rows(); ++r) e.intv(r, c) = normal(rng, 1.0, 2.0);
  }
  e.mask.assign(k_max, 0);
  e.mask[mask_node] = 1;
  e.pad_mask.assign(k_max, 0);
  for (std::size_t j = k_real; j < k_max; ++j) e.pad_mask[j] = 1;
  e.targets = {0};
  return e;
}

ModelConfig small_config(std::size_t k_max) {
  ModelConfig c;
  c.d = 8;
  c.layers = 1;
  c.heads = 2;
  c.head_dim = 0;
  c.mlp_hidden = 16;
  c.dropout = 0.0;
  c.k_max = k_max;
  return c;
}

// Fresh models have a zero decoder output layer; tests that need non-trivial
// logits fill it with random values.
template <typename T>
void randomize_decoder(Mace<T>& m, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  for (auto i : {m.index().dec_w2, m.index().dec_b2})
    for (auto& v : m.params()[i].values) v = static_cast<T>(normal(rng));
}

}  // namespace

TEST_CASE("parameter count of the full-size configuration") {
  const auto cfg = full_config();
  const std::size_t n = parameter_count(cfg);
  CHECK(n == 4047041);
  CHECK(std::abs(static_cast<double>(n) - 4046273.0) / 4046273.0 < 0.02);
  ParameterStore<float> store;
  build_layout(cfg, store);
  CHECK(store.count() == n);
  CHECK(parameter_count(tiny_config()) == [] {
    ParameterStore<float> s;
    build_layout(tiny_config(), s);
    return s.count();
  }());
}

TEST_CASE("config validation") {
  auto c = tiny_config();
  c.heads = 5;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = tiny_config();
  c.dropout = 1.0;
  CHECK_THROWS(c.validate());
  CHECK(model_config_from_json(to_json(full_config())) == full_config());
}

TEST_CASE("encode: zero input with zero node embeddings gives zero") {
  Mace<double> m(small_config(4), 1);
  std::fill(m.params()[m.index().node_embedding].values.begin(),
            m.params()[m.index().node_embedding].values.end(), 0.0);
  Rng rng = make_rng(2);
  auto e = random_episode(rng, 3, 4, 5, 2, 0);
  e.obs.setZero();
  e.intv.setZero();
  e.mask.assign(4, 0);
  ad::Tape<double> tape(false);
  auto b = m.bind(tape);
  auto h = m.encode(tape, b, to_model_input<double>(e));
  for (double v : h.obs.value()) CHECK(v == 0.0);
  for (double v : h.intv.value()) CHECK(v == 0.0);
}

TEST_CASE("encode: target embedding added only at the masked column; padding zeroed") {
  Mace<double> m(small_config(4), 3);
  Rng rng = make_rng(4);
  auto e = random_episode(rng, 3, 4, 5, 2, 1);
  e.obs(0, 3) = 7.0;  // garbage in a padded column
  e.intv(1, 3) = -3.0;
  auto x = to_model_input<double>(e);
  ad::Tape<double> tape(false);
  auto b = m.bind(tape);
  auto h = m.encode(tape, b, x);
  const auto& P = m.params();
  const auto& w = P[m.index().value_proj].values;
  const auto& emb = P[m.index().node_embedding].values;
  const auto& tgt = P[m.index().target_embedding].values;
  const std::size_t d = 8;
  auto hi = h.intv.value();
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t s = 0; s < 2; ++s)
      for (std::size_t j = 0; j < d; ++j) {
        const double base = x.intv[k * 2 + s] * w[j] + emb[k * d + j];
        const double extra = hi[(k * 2 + s) * d + j] - base;
        CHECK(extra == doctest::Approx(k == 1 ? tgt[j] : 0.0).epsilon(1e-14));
      }
  auto ho = h.obs.value();
  for (std::size_t s = 0; s < 5; ++s)
    for (std::size_t j = 0; j < d; ++j) CHECK(ho[(3 * 5 + s) * d + j] == 0.0);
  for (std::size_t s = 0; s < 2; ++s)
    for (std::size_t j = 0; j < d; ++j) CHECK(hi[(3 * 2 + s) * d + j] == 0.0);
}

TEST_CASE("mace_block: identical streams give identical sample-attention outputs") {
  Mace<double> m(small_config(4), 5);
  Rng rng = make_rng(6);
  auto e = random_episode(rng, 4, 4, 6, 6, 0);
  e.intv = e.obs;
  e.mask.assign(4, 0);
  auto x = to_model_input<double>(e);
  ad::Tape<double> tape(false);
  auto b = m.bind(tape);
  auto h = m.encode(tape, b, x);
  std::uint64_t site = 0;
  auto a = m.attend_samples(tape, b, 0, h, x, {}, site);
  auto o = a.obs.value(), i = a.intv.value();
  REQUIRE(o.size() == i.size());
  for (std::size_t t = 0; t < o.size(); ++t) CHECK(o[t] == i[t]);
}

TEST_CASE("mace_block: node attention puts zero weight on padded nodes") {
  Mace<double> m(small_config(5), 7);
  Rng rng = make_rng(8);
  auto e = random_episode(rng, 3, 5, 4, 2, 2);
  auto x = to_model_input<double>(e);
  ad::Tape<double> tape(false);
  auto b = m.bind(tape);
  auto h = m.encode(tape, b, x);
  const auto& a = m.index().blocks[0].node_attn;
  auto t = ad::swap01(h.obs);
  ad::Var<double> none;
  auto q = ad::linear(t, b[a.wq], none), k = ad::linear(t, b[a.wk], none);
  auto p = ad::attention_weights<double>(q.value(), k.value(), 4, 5, 5, 8, x.pad_mask, 2);
  for (std::size_t bi = 0; bi < 4; ++bi)
    for (std::size_t hd = 0; hd < 2; ++hd)
      for (std::size_t qi = 0; qi < 5; ++qi) {
        double total = 0.0;
        for (std::size_t ki = 0; ki < 5; ++ki) {
          const double w = p[((bi * 2 + hd) * 5 + qi) * 5 + ki];
          if (ki >= 3) CHECK(w == 0.0);
          total += w;
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
      }
}

TEST_CASE("mace_block: one obs sample makes obs self-attention a value projection") {
  const auto cfg = small_config(3);
  Mace<double> m(cfg, 9);
  Rng rng = make_rng(10);
  auto e = random_episode(rng, 3, 3, 1, 2, 0);
  auto x = to_model_input<double>(e);
  ad::Tape<double> tape(false);
  auto b = m.bind(tape);
  auto h = m.encode(tape, b, x);
  std::uint64_t site = 0;
  auto got = m.attend_samples(tape, b, 0, h, x, {}, site).obs;
  const auto& a = m.index().blocks[0].sample_attn;
  const auto& nrm = m.index().blocks[0].sample_norm;
  ad::Var<double> none;
  auto v = ad::linear(h.obs, b[a.wv], none);
  auto expect = ad::layer_norm(ad::add(h.obs, ad::linear(v, b[a.wo], b[a.bo])), b[nrm.gain], b[nrm.bias], 1e-5);
  auto g = got.value(), ex = expect.value();
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(g[i] == doctest::Approx(ex[i]).epsilon(1e-12));
}

TEST_CASE("forward: identical datasets with no mask give equal real-node logits") {
  Mace<double> m(small_config(5), 11);
  randomize_decoder(m, 12);
  Rng rng = make_rng(13);
  auto e = random_episode(rng, 4, 5, 7, 7, 0);
  e.intv = e.obs;
  e.mask.assign(5, 0);
  auto lg = m.logits(e);
  for (std::size_t k = 1; k < 4; ++k) CHECK(lg[k] == doctest::Approx(lg[0]).epsilon(1e-12));
  auto p = node_probabilities(lg, 4);
  for (std::size_t k = 0; k < 4; ++k) CHECK(p[k] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(std::isinf(lg[4]));
  CHECK(lg[4] < 0);
}

TEST_CASE("forward: fresh model outputs a uniform posterior") {
  Mace<float> m(tiny_config(5), 14);
  Rng rng = make_rng(15);
  auto e = random_episode(rng, 5, 5, 20, 5, 3);
  auto lg = m.logits(e);
  for (auto v : lg) CHECK(v == lg[0]);
}

TEST_CASE("forward: gradient matches central differences for every parameter") {
  const auto cfg = small_config(4);
  Mace<double> m(cfg, 16);
  randomize_decoder(m, 17);
  Rng rng = make_rng(18);
  auto e = random_episode(rng, 3, 4, 6, 3, 1);
  auto x = to_model_input<double>(e);
  std::vector<ad::Shape> shapes;
  std::vector<std::vector<double>> values;
  for (const auto& p : m.params()) {
    shapes.push_back(p.shape);
    values.push_back(p.values);
  }
  auto res = testing::check_gradients(shapes, values, [&](ad::Tape<double>& t, const std::vector<ad::Var<double>>& vars) {
    Mace<double>::Bound b{vars};
    auto lg = m.forward(t, b, x);
    return ad::softmax_cross_entropy(lg, 2, std::span<const std::uint8_t>(x.valid));
  });
  CAPTURE(res.max_rel);
  CHECK(res.checked == parameter_count(cfg));
  CHECK(res.max_rel < 1e-4);
}

TEST_CASE("forward: garbage in padded columns does not move real logits") {
  Mace<double> m(small_config(6), 19);
  randomize_decoder(m, 20);
  Rng rng = make_rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    auto e = random_episode(rng, 3, 6, 8, 4, static_cast<std::size_t>(trial % 3));
    auto clean = m.logits(e);
    for (Eigen::Index c = 3; c < 6; ++c) {
      for (Eigen::Index r = 0; r < e.obs.rows(); ++r) e.obs(r, c) = normal(rng, 0.0, 50.0);
      for (Eigen::Index r = 0; r < e.intv.rows(); ++r) e.intv(r, c) = normal(rng, 0.0, 50.0);
    }
    e.mask[4] = 1;  // a mask bit on padding is ignored too
    auto dirty = m.logits(e);
    for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(clean[k] - dirty[k]) < 1e-6);
  }
}

TEST_CASE("forward: sample order does not matter") {
  Mace<double> m(small_config(4), 22);
  randomize_decoder(m, 23);
  Rng rng = make_rng(24);
  auto e = random_episode(rng, 4, 4, 9, 5, 2);
  auto base = m.logits(e);
  for (int trial = 0; trial < 10; ++trial) {
    auto p = e;
    std::vector<Eigen::Index> ro(static_cast<std::size_t>(e.obs.rows())), ri(static_cast<std::size_t>(e.intv.rows()));
    std::iota(ro.begin(), ro.end(), 0);
    std::iota(ri.begin(), ri.end(), 0);
    std::shuffle(ro.begin(), ro.end(), rng);
    std::shuffle(ri.begin(), ri.end(), rng);
    for (std::size_t r = 0; r < ro.size(); ++r) p.obs.row(static_cast<Eigen::Index>(r)) = e.obs.row(ro[r]);
    for (std::size_t r = 0; r < ri.size(); ++r) p.intv.row(static_cast<Eigen::Index>(r)) = e.intv.row(ri[r]);
    auto lg = m.logits(p);
    for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(lg[k] - base[k]) < 1e-9);
  }
}

TEST_CASE("forward: probabilities sum to one with exact zeros at padding") {
  Mace<double> m(small_config(7), 25);
  randomize_decoder(m, 26);
  Rng rng = make_rng(27);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 2 + static_cast<std::size_t>(trial % 5);
    auto e = random_episode(rng, k, 7, 5, 3, 0);
    auto lg = m.logits(e);
    auto x = to_model_input<double>(e);
    auto p = ad::masked_softmax<double>(lg, x.valid);
    double total = 0.0;
    for (std::size_t j = 0; j < 7; ++j) {
      if (j >= k) CHECK(p[j] == 0.0);
      total += p[j];
    }
    CHECK(std::abs(total - 1.0) < 1e-9);
  }
}

TEST_CASE("forward: float and double agree; K mismatch is rejected") {
  Mace<double> md(small_config(4), 28);
  randomize_decoder(md, 29);
  Mace<float> mf(small_config(4), md.params().cast<float>());
  Rng rng = make_rng(30);
  auto e = random_episode(rng, 4, 4, 10, 4, 1);
  auto a = md.logits(e);
  auto b = mf.logits(e);
  for (std::size_t k = 0; k < 4; ++k) CHECK(b[k] == doctest::Approx(a[k]).epsilon(1e-4));
  auto wrong = random_episode(rng, 3, 5, 4, 2, 0);
  CHECK_THROWS_AS(md.logits(wrong), std::invalid_argument);
}

TEST_CASE("forward: int self-attention flag changes the int stream only when enabled") {
  auto cfg = small_config(3);
  Mace<double> off(cfg, 31);
  randomize_decoder(off, 32);
  cfg.int_self_attention = true;
  Mace<double> on(cfg, off.params());
  Rng rng = make_rng(33);
  auto e = random_episode(rng, 3, 3, 6, 4, 0);
  auto a = off.logits(e), b = on.logits(e);
  double diff = 0.0;
  for (std::size_t k = 0; k < 3; ++k) diff += std::abs(a[k] - b[k]);
  CHECK(diff > 1e-6);
}

TEST_CASE("forward: dropout only in training mode and reproducible by seed") {
  auto cfg = small_config(3);
  cfg.dropout = 0.3;
  Mace<double> m(cfg, 34);
  randomize_decoder(m, 35);
  Rng rng = make_rng(36);
  auto x = to_model_input<double>(random_episode(rng, 3, 3, 6, 4, 0));
  auto run = [&](ForwardOptions opt) {
    ad::Tape<double> tape(false);
    auto b = m.bind(tape);
    auto v = m.forward(tape, b, x, opt).value();
    return std::vector<double>(v.begin(), v.end());
  };
  CHECK(run({}) == m.logits(x));
  CHECK(run({true, 5}) == run({true, 5}));
  CHECK(run({true, 5}) != run({true, 6}));
}

TEST_CASE("predict_ranking examples") {
  std::vector<double> l1 = {2, 1, 0};
  CHECK(predict_ranking(l1, 3).order == std::vector<std::size_t>{0, 1, 2});
  std::vector<double> l2 = {0.5, 0.5, 0.5, 0.5};
  CHECK(predict_ranking(l2, 4).order == std::vector<std::size_t>{0, 1, 2, 3});
  std::vector<double> l3 = {0.1, 0.9, 5.0, 7.0};
  auto r = predict_ranking(l3, 2);
  CHECK(r.order == std::vector<std::size_t>{1, 0});
  CHECK(r.rank_of(1) == 1);
  CHECK(r.rank_of(3) == 0);
  std::vector<double> l4 = {1.0, 3.0, 3.0, -1.0};
  CHECK(predict_ranking(l4, 4).order == std::vector<std::size_t>{1, 2, 0, 3});
  CHECK_THROWS(predict_ranking(l1, 0));
}

TEST_CASE("checkpoint: round trip is bit-exact and validated") {
  const auto cfg = tiny_config(6);
  Mace<float> m(cfg, 37);
  const auto bytes = serialize_checkpoint(cfg, m.params(), Json{{"epoch", 3}});
  auto ck = parse_checkpoint(bytes);
  CHECK(ck.config == cfg);
  CHECK(ck.meta["epoch"] == 3);
  REQUIRE(ck.params.size() == m.params().size());
  for (std::size_t i = 0; i < ck.params.size(); ++i) {
    CHECK(ck.params[i].name == m.params()[i].name);
    CHECK(ck.params[i].shape == m.params()[i].shape);
    CHECK(std::memcmp(ck.params[i].values.data(), m.params()[i].values.data(),
                      ck.params[i].values.size() * sizeof(float)) == 0);
  }
  CHECK(ck.params.checksum() == m.params().checksum());

  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS(parse_checkpoint(bad));
  CHECK_THROWS(parse_checkpoint(bytes.substr(0, bytes.size() - 3)));
  // header config disagreeing with the records
  auto other = cfg;
  other.k_max = 7;
  auto mismatched = serialize_checkpoint(other, m.params(), Json::object());
  CHECK_THROWS(parse_checkpoint(mismatched));
}

TEST_CASE("parameter store: names unique, checksum sensitive") {
  ParameterStore<float> s;
  s.add("a", {2});
  CHECK_THROWS(s.add("a", {3}));
  const auto c0 = s.checksum();
  s.at("a").values[1] = 1.0f;
  CHECK(s.checksum() != c0);
  CHECK(s.all_finite());
  s.at("a").values[0] = std::nanf("");
  CHECK_FALSE(s.all_finite());
}
