#include "prim/autodiff/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "prim/core/rng.hpp"

namespace prim::ad {
namespace {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapC = Eigen::Map<const Mat<T>>;
template <typename T>
using MapM = Eigen::Map<Mat<T>>;
template <typename T>
using StrideC = Eigen::Map<const Mat<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using StrideM = Eigen::Map<Mat<T>, 0, Eigen::OuterStride<>>;

template <typename T>
void require_same(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.tape() != b.tape()) throw std::logic_error(std::string(op) + ": vars on different tapes");
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

template <typename T>
std::vector<T> copy_of(const Var<T>& a) {
  auto v = a.value();
  return {v.begin(), v.end()};
}

// Adds g into the gradient of node `id` if that node tracks gradients.
template <typename T, typename F>
void accumulate(Tape<T>& t, std::size_t id, F&& fill) {
  if (!t.requires_grad(id)) return;
  fill(t.grad_buffer(id));
}

}  // namespace

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  require_same(a, b, "add");
  auto out = copy_of(a);
  auto bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const auto ia = a.id(), ib = b.id();
  return a.tape()->emit(a.shape(), std::move(out), {a, b}, [ia, ib](Tape<T>& t, std::size_t self) {
    auto g = t.grad(self);
    for (auto id : {ia, ib})
      accumulate(t, id, [&](std::span<T> dst) {
        for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
      });
  });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  require_same(a, b, "sub");
  auto out = copy_of(a);
  auto bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  const auto ia = a.id(), ib = b.id();
  return a.tape()->emit(a.shape(), std::move(out), {a, b}, [ia, ib](Tape<T>& t, std::size_t self) {
    auto g = t.grad(self);
    accumulate(t, ia, [&](std::span<T> dst) {
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
    });
    accumulate(t, ib, [&](std::span<T> dst) {
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] -= g[i];
    });
  });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  require_same(a, b, "mul");
  auto out = copy_of(a);
  auto bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const auto ia = a.id(), ib = b.id();
  return a.tape()->emit(a.shape(), std::move(out), {a, b}, [ia, ib](Tape<T>& t, std::size_t self) {
    auto g = t.grad(self);
    auto av = t.value(ia);
    auto bv = t.value(ib);
    accumulate(t, ia, [&](std::span<T> dst) {
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * bv[i];
    });
    accumulate(t, ib, [&](std::span<T> dst) {
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * av[i];
    });
  });
}

template <typename T>
Var<T> scale(Var<T> a, T s) {
  auto out = copy_of(a);
  for (auto& x : out) x *= s;
  const auto ia = a.id();
  return a.tape()->emit(a.shape(), std::move(out), {a}, [ia, s](Tape<T>& t, std::size_t self) {
    auto g = t.grad(self);
    accumulate(t, ia, [&](std::span<T> dst) {
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += s * g[i];
    });
  });
}

template <typename T>
Var<T> relu(Var<T> a) {
  auto out = copy_of(a);
  for (auto& x : out) x = x > T(0) ? x : T(0);
  const auto ia = a.id();
  return a.tape()->emit(a.shape(), std::move(out), {a}, [ia](Tape<T>& t, std::size_t self) {
    auto g = t.grad(self);
    auto av = t.value(ia);
    accumulate(t, ia, [&](std::span<T> dst) {
      for (std::size_t i = 0; i < g.size(); ++i)
        if (av[i] > T(0)) dst[i] += g[i];
    });
  });
}

template <typename T>
Var<T> softplus(Var<T> a) {
  auto out = copy_of(a);
  for (auto& x : out) x = x > T(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  const auto ia = a.id();
  return a.tape()->emit(a.shape(), std::move(out), {a}, [ia](Tape<T>& t, std::size_t self) {
    auto g = t.grad(self);
    auto av = t.value(ia);
    accumulate(t, ia, [&](std::span<T> dst) {
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] / (T(1) + std::exp(-av[i]));
    });
  });
}

template <typename T>
Var<T> sum(Var<T> a) {
  T s = 0;
  for (auto x : a.value()) s += x;
  const auto ia = a.id();
  return a.tape()->emit({}, {s}, {a}, [ia](Tape<T>& t, std::size_t self) {
    T g = t.grad(self)[0];
    accumulate(t, ia, [&](std::span<T> dst) {
      for (auto& d : dst) d += g;
    });
  });
}

template <typename T>
Var<T> mean(Var<T> a) {
  return scale(sum(a), T(1) / static_cast<T>(a.size()));
}

template <typename T>
Var<T> reshape(Var<T> a, Shape shape) {
  if (numel(shape) != a.size())
    throw ShapeError("reshape: " + shape_str(a.shape()) + " -> " + shape_str(shape));
  const auto ia = a.id();
  return a.tape()->emit(std::move(shape), copy_of(a), {a}, [ia](Tape<T>& t, std::size_t self) {
    auto g = t.grad(self);
    accumulate(t, ia, [&](std::span<T> dst) {
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
    });
  });
}

template <typename T>
Var<T> pick(Var<T> a, std::size_t index) {
  if (index >= a.size()) throw ShapeError("pick: index out of range");
  const auto ia = a.id();
  return a.tape()->emit({}, {a.value()[index]}, {a}, [ia, index](Tape<T>& t, std::size_t self) {
    T g = t.grad(self)[0];
    accumulate(t, ia, [&](std::span<T> dst) { dst[index] += g; });
  });
}

template <typename T>
Var<T> linear(Var<T> x, Var<T> w, Var<T> b) {
  const auto& xs = x.shape();
  const auto& ws = w.shape();
  if (xs.empty() || ws.size() != 2 || xs.back() != ws[0])
    throw ShapeError("linear: x " + shape_str(xs) + " w " + shape_str(ws));
  const std::size_t in = ws[0], out = ws[1], rows = x.size() / in;
  if (b.defined() && (b.shape().size() != 1 || b.shape()[0] != out))
    throw ShapeError("linear: bias " + shape_str(b.shape()));

  std::vector<T> y(rows * out);
  MapM<T> Y(y.data(), rows, out);
  MapC<T> X(x.value().data(), rows, in);
  MapC<T> W(w.value().data(), in, out);
  Y.noalias() = X * W;
  if (b.defined()) {
    Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> B(b.value().data(), out);
    Y.rowwise() += B;
  }
  Shape ys = xs;
  ys.back() = out;
  const auto ix = x.id(), iw = w.id();
  const bool has_b = b.defined();
  const auto ib = has_b ? b.id() : 0;
  return x.tape()->emit(std::move(ys), std::move(y), {x, w, b},
                        [=](Tape<T>& t, std::size_t self) {
                          MapC<T> G(t.grad(self).data(), rows, out);
                          accumulate(t, ix, [&](std::span<T> dst) {
                            MapC<T> W(t.value(iw).data(), in, out);
                            MapM<T>(dst.data(), rows, in).noalias() += G * W.transpose();
                          });
                          accumulate(t, iw, [&](std::span<T> dst) {
                            MapC<T> X(t.value(ix).data(), rows, in);
                            MapM<T>(dst.data(), in, out).noalias() += X.transpose() * G;
                          });
                          if (has_b)
                            accumulate(t, ib, [&](std::span<T> dst) {
                              // Plain loops: Eigen reductions vectorise differently with
                              // buffer alignment, which would break bitwise replay.
                              auto g = t.grad(self);
                              for (std::size_t r = 0; r < rows; ++r)
                                for (std::size_t c = 0; c < out; ++c) dst[c] += g[r * out + c];
                            });
                        });
}

template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gain, Var<T> bias, T eps) {
  const auto& xs = x.shape();
  if (xs.empty()) throw ShapeError("layer_norm: scalar input");
  const std::size_t d = xs.back(), rows = x.size() / d;
  if (gain.size() != d || bias.size() != d) throw ShapeError("layer_norm: gain/bias size");
  auto xv = x.value();
  auto gv = gain.value();
  auto bv = bias.value();
  auto xhat = std::make_shared<std::vector<T>>(x.size());
  auto rstd = std::make_shared<std::vector<T>>(rows);
  std::vector<T> y(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = xv.data() + r * d;
    T mu = 0;
    for (std::size_t j = 0; j < d; ++j) mu += in[j];
    mu /= static_cast<T>(d);
    T var = 0;
    for (std::size_t j = 0; j < d; ++j) var += (in[j] - mu) * (in[j] - mu);
    var /= static_cast<T>(d);
    const T rs = T(1) / std::sqrt(var + eps);
    (*rstd)[r] = rs;
    for (std::size_t j = 0; j < d; ++j) {
      const T h = (in[j] - mu) * rs;
      (*xhat)[r * d + j] = h;
      y[r * d + j] = h * gv[j] + bv[j];
    }
  }
  const auto ix = x.id(), ig = gain.id(), ib = bias.id();
  return x.tape()->emit(xs, std::move(y), {x, gain, bias},
                        [=](Tape<T>& t, std::size_t self) {
                          auto g = t.grad(self);
                          auto gv = t.value(ig);
                          const auto& xh = *xhat;
                          accumulate(t, ig, [&](std::span<T> dst) {
                            for (std::size_t i = 0; i < g.size(); ++i) dst[i % d] += g[i] * xh[i];
                          });
                          accumulate(t, ib, [&](std::span<T> dst) {
                            for (std::size_t i = 0; i < g.size(); ++i) dst[i % d] += g[i];
                          });
                          accumulate(t, ix, [&](std::span<T> dst) {
                            std::vector<T> dxh(d);
                            for (std::size_t r = 0; r < rows; ++r) {
                              T m1 = 0, m2 = 0;
                              for (std::size_t j = 0; j < d; ++j) {
                                dxh[j] = g[r * d + j] * gv[j];
                                m1 += dxh[j];
                                m2 += dxh[j] * xh[r * d + j];
                              }
                              m1 /= static_cast<T>(d);
                              m2 /= static_cast<T>(d);
                              const T rs = (*rstd)[r];
                              for (std::size_t j = 0; j < d; ++j)
                                dst[r * d + j] += rs * (dxh[j] - m1 - xh[r * d + j] * m2);
                            }
                          });
                        });
}

namespace {

// In-place exp over a row using Eigen's packet exp. The tail is padded into a
// full packet so every element goes through the same code path; results do
// not depend on buffer alignment.
#pragma GCC diagnostic push
#pragma GCC diagnostic ignored "-Wignored-attributes"
template <typename T>
void exp_inplace(T* x, std::size_t n) {
  using Packet = typename Eigen::internal::packet_traits<T>::type;
  constexpr std::size_t W = Eigen::internal::unpacket_traits<Packet>::size;
  std::size_t j = 0;
  for (; j + W <= n; j += W)
    Eigen::internal::pstoreu(x + j, Eigen::internal::pexp(Eigen::internal::ploadu<Packet>(x + j)));
  if (j < n) {
    T buf[W] = {};
    std::copy(x + j, x + n, buf);
    Eigen::internal::pstoreu(buf, Eigen::internal::pexp(Eigen::internal::ploadu<Packet>(buf)));
    std::copy(buf, buf + (n - j), x + j);
  }
}
#pragma GCC diagnostic pop

// Sum with a fixed lane layout: the grouping depends only on n, so the result
// is reproducible and the inner loop vectorises.
template <typename T>
T lane_sum(const T* x, std::size_t n) {
  constexpr std::size_t L = 16;
  T acc[L] = {};
  std::size_t j = 0;
  for (; j + L <= n; j += L)
    for (std::size_t l = 0; l < L; ++l) acc[l] += x[j + l];
  for (std::size_t l = 0; j + l < n; ++l) acc[l] += x[j + l];
  T s = 0;
  for (std::size_t l = 0; l < L; ++l) s += acc[l];
  return s;
}

template <typename T>
T lane_max(const T* x, std::size_t n) {
  constexpr std::size_t L = 16;
  T acc[L];
  std::fill(acc, acc + L, -std::numeric_limits<T>::infinity());
  std::size_t j = 0;
  for (; j + L <= n; j += L)
    for (std::size_t l = 0; l < L; ++l) acc[l] = acc[l] < x[j + l] ? x[j + l] : acc[l];
  for (std::size_t l = 0; j + l < n; ++l) acc[l] = acc[l] < x[j + l] ? x[j + l] : acc[l];
  return *std::max_element(acc, acc + L);
}

// Masked row softmax in place on an nq x nk block. Fully masked rows become
// all-zero.
template <typename T>
void softmax_rows(T* s, std::size_t nq, std::size_t nk, const std::uint8_t* mask) {
  const T neg_inf = -std::numeric_limits<T>::infinity();
  for (std::size_t i = 0; i < nq; ++i) {
    T* row = s + i * nk;
    if (mask)
      for (std::size_t j = 0; j < nk; ++j)
        if (mask[j]) row[j] = neg_inf;
    const T mx = lane_max(row, nk);
    if (mx == neg_inf) {
      std::fill(row, row + nk, T(0));
      continue;
    }
    for (std::size_t j = 0; j < nk; ++j) row[j] -= mx;
    exp_inplace(row, nk);
    if (mask)
      for (std::size_t j = 0; j < nk; ++j)
        if (mask[j]) row[j] = 0;
    const T inv = T(1) / lane_sum(row, nk);
    for (std::size_t j = 0; j < nk; ++j) row[j] *= inv;
  }
}

struct AttnDims {
  std::size_t b, nq, nk, dim, heads, dh;
};

template <typename T>
AttnDims attention_dims(const Shape& qs, const Shape& ks, const Shape& vs,
                        std::size_t mask_size, std::size_t heads) {
  if (qs.size() != 3 || ks.size() != 3 || vs != ks || qs[0] != ks[0] || qs[2] != ks[2])
    throw ShapeError("attention: q " + shape_str(qs) + " k " + shape_str(ks) + " v " +
                     shape_str(vs));
  if (heads == 0 || qs[2] % heads != 0) throw ShapeError("attention: dim not divisible by heads");
  AttnDims a{qs[0], qs[1], ks[1], qs[2], heads, qs[2] / heads};
  if (mask_size != 0 && mask_size != a.nk && mask_size != a.b * a.nk)
    throw ShapeError("attention: key_mask size " + std::to_string(mask_size));
  return a;
}

template <typename T>
const std::uint8_t* mask_for(std::span<const std::uint8_t> m, const AttnDims& a, std::size_t bi) {
  if (m.empty()) return nullptr;
  if (m.size() == a.nk) return m.data();
  return m.data() + bi * a.nk;
}

// Fills probs[b, h, nq, nk].
template <typename T>
void attention_probs(const T* q, const T* k, const AttnDims& a,
                     std::span<const std::uint8_t> key_mask, T* probs) {
  const T sc = T(1) / std::sqrt(static_cast<T>(a.dh));
  const auto D = static_cast<Eigen::Index>(a.dim);
  for (std::size_t bi = 0; bi < a.b; ++bi) {
    const std::uint8_t* mk = mask_for<T>(key_mask, a, bi);
    for (std::size_t h = 0; h < a.heads; ++h) {
      StrideC<T> Q(q + bi * a.nq * a.dim + h * a.dh, a.nq, a.dh, Eigen::OuterStride<>(D));
      StrideC<T> K(k + bi * a.nk * a.dim + h * a.dh, a.nk, a.dh, Eigen::OuterStride<>(D));
      T* p = probs + (bi * a.heads + h) * a.nq * a.nk;
      MapM<T> P(p, a.nq, a.nk);
      P.noalias() = (Q * K.transpose()) * sc;
      softmax_rows(p, a.nq, a.nk, mk);
    }
  }
}

}  // namespace

template <typename T>
std::vector<T> attention_weights(std::span<const T> q, std::span<const T> k, std::size_t b,
                                 std::size_t nq, std::size_t nk, std::size_t dim,
                                 std::span<const std::uint8_t> key_mask, std::size_t heads) {
  auto a = attention_dims<T>({b, nq, dim}, {b, nk, dim}, {b, nk, dim}, key_mask.size(), heads);
  if (q.size() != b * nq * dim || k.size() != b * nk * dim)
    throw ShapeError("attention_weights: buffer sizes");
  std::vector<T> probs(b * heads * nq * nk);
  attention_probs(q.data(), k.data(), a, key_mask, probs.data());
  return probs;
}

template <typename T>
Var<T> attention(Var<T> q, Var<T> k, Var<T> v, std::span<const std::uint8_t> key_mask,
                 std::size_t heads) {
  const AttnDims a = attention_dims<T>(q.shape(), k.shape(), v.shape(), key_mask.size(), heads);
  auto probs = std::make_shared<std::vector<T>>(a.b * a.heads * a.nq * a.nk);
  attention_probs(q.value().data(), k.value().data(), a, key_mask, probs->data());

  std::vector<T> out(a.b * a.nq * a.dim);
  const auto D = static_cast<Eigen::Index>(a.dim);
  const T* vv = v.value().data();
  for (std::size_t bi = 0; bi < a.b; ++bi)
    for (std::size_t h = 0; h < a.heads; ++h) {
      MapC<T> P(probs->data() + (bi * a.heads + h) * a.nq * a.nk, a.nq, a.nk);
      StrideC<T> V(vv + bi * a.nk * a.dim + h * a.dh, a.nk, a.dh, Eigen::OuterStride<>(D));
      StrideM<T> O(out.data() + bi * a.nq * a.dim + h * a.dh, a.nq, a.dh, Eigen::OuterStride<>(D));
      O.noalias() = P * V;
    }

  const auto iq = q.id(), ik = k.id(), iv = v.id();
  return q.tape()->emit(
      q.shape(), std::move(out), {q, k, v}, [=](Tape<T>& t, std::size_t self) {
        const T sc = T(1) / std::sqrt(static_cast<T>(a.dh));
        const T* g = t.grad(self).data();
        const T* qv = t.value(iq).data();
        const T* kv = t.value(ik).data();
        const T* vv = t.value(iv).data();
        T* dq = t.requires_grad(iq) ? t.grad_buffer(iq).data() : nullptr;
        T* dk = t.requires_grad(ik) ? t.grad_buffer(ik).data() : nullptr;
        T* dv = t.requires_grad(iv) ? t.grad_buffer(iv).data() : nullptr;
        Mat<T> dP(a.nq, a.nk);
        for (std::size_t bi = 0; bi < a.b; ++bi)
          for (std::size_t h = 0; h < a.heads; ++h) {
            const std::size_t qo = bi * a.nq * a.dim + h * a.dh;
            const std::size_t ko = bi * a.nk * a.dim + h * a.dh;
            MapC<T> P(probs->data() + (bi * a.heads + h) * a.nq * a.nk, a.nq, a.nk);
            StrideC<T> G(g + qo, a.nq, a.dh, Eigen::OuterStride<>(D));
            StrideC<T> V(vv + ko, a.nk, a.dh, Eigen::OuterStride<>(D));
            if (dv) StrideM<T>(dv + ko, a.nk, a.dh, Eigen::OuterStride<>(D)).noalias() +=
                        P.transpose() * G;
            if (!dq && !dk) continue;
            dP.noalias() = G * V.transpose();
            // softmax backward: dS = P * (dP - rowsum(P * dP))
            for (Eigen::Index i = 0; i < dP.rows(); ++i) {
              T r = 0;
              for (Eigen::Index j = 0; j < dP.cols(); ++j) r += P(i, j) * dP(i, j);
              dP.row(i) = (P.row(i).array() * (dP.row(i).array() - r)).matrix();
            }
            dP *= sc;
            if (dq) {
              StrideC<T> K(kv + ko, a.nk, a.dh, Eigen::OuterStride<>(D));
              StrideM<T>(dq + qo, a.nq, a.dh, Eigen::OuterStride<>(D)).noalias() += dP * K;
            }
            if (dk) {
              StrideC<T> Q(qv + qo, a.nq, a.dh, Eigen::OuterStride<>(D));
              StrideM<T>(dk + ko, a.nk, a.dh, Eigen::OuterStride<>(D)).noalias() +=
                  dP.transpose() * Q;
            }
          }
      });
}

template <typename T>
Var<T> swap01(Var<T> x) {
  const auto& xs = x.shape();
  if (xs.size() < 2) throw ShapeError("swap01: rank < 2");
  const std::size_t A = xs[0], B = xs[1], C = x.size() / (A * B);
  std::vector<T> out(x.size());
  auto xv = x.value();
  for (std::size_t i = 0; i < A; ++i)
    for (std::size_t j = 0; j < B; ++j)
      std::copy_n(xv.data() + (i * B + j) * C, C, out.data() + (j * A + i) * C);
  Shape ys = xs;
  std::swap(ys[0], ys[1]);
  const auto ix = x.id();
  return x.tape()->emit(std::move(ys), std::move(out), {x}, [=](Tape<T>& t, std::size_t self) {
    auto g = t.grad(self);
    accumulate(t, ix, [&](std::span<T> dst) {
      for (std::size_t i = 0; i < A; ++i)
        for (std::size_t j = 0; j < B; ++j) {
          const T* src = g.data() + (j * A + i) * C;
          T* d = dst.data() + (i * B + j) * C;
          for (std::size_t c = 0; c < C; ++c) d[c] += src[c];
        }
    });
  });
}

template <typename T>
Var<T> zero_rows(Var<T> x, std::span<const std::uint8_t> keep) {
  const auto& xs = x.shape();
  if (xs.empty() || keep.size() != xs[0]) throw ShapeError("zero_rows: keep size");
  const std::size_t slab = x.size() / xs[0];
  auto out = copy_of(x);
  for (std::size_t i = 0; i < xs[0]; ++i)
    if (!keep[i]) std::fill_n(out.data() + i * slab, slab, T(0));
  std::vector<std::uint8_t> kp(keep.begin(), keep.end());
  const auto ix = x.id();
  return x.tape()->emit(xs, std::move(out), {x}, [=](Tape<T>& t, std::size_t self) {
    auto g = t.grad(self);
    accumulate(t, ix, [&](std::span<T> dst) {
      for (std::size_t i = 0; i < kp.size(); ++i)
        if (kp[i])
          for (std::size_t c = 0; c < slab; ++c) dst[i * slab + c] += g[i * slab + c];
    });
  });
}

template <typename T>
Var<T> embed_scalars(std::span<const T> data, std::size_t rows, std::size_t n, Var<T> w,
                     Var<T> table) {
  if (data.size() != rows * n) throw ShapeError("embed_scalars: data size");
  if (w.shape().size() != 1) throw ShapeError("embed_scalars: w must be rank 1");
  const std::size_t d = w.size();
  if (table.shape().size() != 2 || table.shape()[1] != d || table.shape()[0] < rows)
    throw ShapeError("embed_scalars: table " + shape_str(table.shape()));
  auto wv = w.value();
  auto tv = table.value();
  std::vector<T> out(rows * n * d);
  for (std::size_t k = 0; k < rows; ++k)
    for (std::size_t s = 0; s < n; ++s) {
      const T x = data[k * n + s];
      T* o = out.data() + (k * n + s) * d;
      for (std::size_t j = 0; j < d; ++j) o[j] = x * wv[j] + tv[k * d + j];
    }
  std::vector<T> xs(data.begin(), data.end());
  const auto iw = w.id(), it = table.id();
  return w.tape()->emit({rows, n, d}, std::move(out), {w, table},
                        [=, xs = std::move(xs)](Tape<T>& t, std::size_t self) {
                          auto g = t.grad(self);
                          accumulate(t, iw, [&](std::span<T> dst) {
                            for (std::size_t r = 0; r < rows * n; ++r)
                              for (std::size_t j = 0; j < d; ++j) dst[j] += xs[r] * g[r * d + j];
                          });
                          accumulate(t, it, [&](std::span<T> dst) {
                            for (std::size_t k = 0; k < rows; ++k)
                              for (std::size_t s = 0; s < n; ++s)
                                for (std::size_t j = 0; j < d; ++j)
                                  dst[k * d + j] += g[(k * n + s) * d + j];
                          });
                        });
}

template <typename T>
Var<T> add_vector_at(Var<T> h, Var<T> v, std::span<const std::uint8_t> select) {
  const auto& hs = h.shape();
  if (hs.size() < 2 || select.size() != hs[0] || v.size() != hs.back())
    throw ShapeError("add_vector_at: h " + shape_str(hs) + " v " + shape_str(v.shape()));
  const std::size_t d = v.size(), per = h.size() / hs[0] / d;
  auto out = copy_of(h);
  auto vv = v.value();
  for (std::size_t k = 0; k < hs[0]; ++k) {
    if (!select[k]) continue;
    for (std::size_t s = 0; s < per; ++s)
      for (std::size_t j = 0; j < d; ++j) out[(k * per + s) * d + j] += vv[j];
  }
  std::vector<std::uint8_t> sel(select.begin(), select.end());
  const auto ih = h.id(), iv = v.id();
  return h.tape()->emit(hs, std::move(out), {h, v}, [=](Tape<T>& t, std::size_t self) {
    auto g = t.grad(self);
    accumulate(t, ih, [&](std::span<T> dst) {
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
    });
    accumulate(t, iv, [&](std::span<T> dst) {
      for (std::size_t k = 0; k < sel.size(); ++k) {
        if (!sel[k]) continue;
        for (std::size_t s = 0; s < per; ++s)
          for (std::size_t j = 0; j < d; ++j) dst[j] += g[(k * per + s) * d + j];
      }
    });
  });
}

template <typename T>
Var<T> mean_axis1(Var<T> x) {
  const auto& xs = x.shape();
  if (xs.size() != 3 || xs[1] == 0) throw ShapeError("mean_axis1: " + shape_str(xs));
  const std::size_t A = xs[0], B = xs[1], C = xs[2];
  auto xv = x.value();
  std::vector<T> out(A * C, T(0));
  const T inv = T(1) / static_cast<T>(B);
  for (std::size_t a = 0; a < A; ++a) {
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t c = 0; c < C; ++c) out[a * C + c] += xv[(a * B + b) * C + c];
    for (std::size_t c = 0; c < C; ++c) out[a * C + c] *= inv;
  }
  const auto ix = x.id();
  return x.tape()->emit({A, C}, std::move(out), {x}, [=](Tape<T>& t, std::size_t self) {
    auto g = t.grad(self);
    accumulate(t, ix, [&](std::span<T> dst) {
      for (std::size_t a = 0; a < A; ++a)
        for (std::size_t b = 0; b < B; ++b)
          for (std::size_t c = 0; c < C; ++c) dst[(a * B + b) * C + c] += g[a * C + c] * inv;
    });
  });
}

template <typename T>
Var<T> concat_axis1(Var<T> a, Var<T> b) {
  const auto& as = a.shape();
  const auto& bs = b.shape();
  if (as.size() != 3 || bs.size() != 3 || as[0] != bs[0] || as[2] != bs[2])
    throw ShapeError("concat_axis1: " + shape_str(as) + " + " + shape_str(bs));
  const std::size_t B = as[0], n1 = as[1], n2 = bs[1], C = as[2];
  std::vector<T> out(B * (n1 + n2) * C);
  auto av = a.value();
  auto bv = b.value();
  for (std::size_t i = 0; i < B; ++i) {
    std::copy_n(av.data() + i * n1 * C, n1 * C, out.data() + i * (n1 + n2) * C);
    std::copy_n(bv.data() + i * n2 * C, n2 * C, out.data() + (i * (n1 + n2) + n1) * C);
  }
  const auto ia = a.id(), ib = b.id();
  return a.tape()->emit({B, n1 + n2, C}, std::move(out), {a, b},
                        [=](Tape<T>& t, std::size_t self) {
                          auto g = t.grad(self);
                          accumulate(t, ia, [&](std::span<T> dst) {
                            for (std::size_t i = 0; i < B; ++i)
                              for (std::size_t c = 0; c < n1 * C; ++c)
                                dst[i * n1 * C + c] += g[i * (n1 + n2) * C + c];
                          });
                          accumulate(t, ib, [&](std::span<T> dst) {
                            for (std::size_t i = 0; i < B; ++i)
                              for (std::size_t c = 0; c < n2 * C; ++c)
                                dst[i * n2 * C + c] += g[(i * (n1 + n2) + n1) * C + c];
                          });
                        });
}

template <typename T>
Var<T> dropout(Var<T> x, T rate, std::uint64_t seed) {
  if (rate <= T(0)) return x;
  if (rate >= T(1)) throw std::invalid_argument("dropout: rate must be < 1");
  const T keep_scale = T(1) / (T(1) - rate);
  const auto threshold = static_cast<std::uint64_t>(static_cast<double>(rate) * 18446744073709551616.0);
  auto mask = std::make_shared<std::vector<T>>(x.size());
  auto out = copy_of(x);
  std::uint64_t state = splitmix64(seed);
  for (std::size_t i = 0; i < out.size(); ++i) {
    state = splitmix64(state);
    const T m = state < threshold ? T(0) : keep_scale;
    (*mask)[i] = m;
    out[i] *= m;
  }
  const auto ix = x.id();
  return x.tape()->emit(x.shape(), std::move(out), {x}, [=](Tape<T>& t, std::size_t self) {
    auto g = t.grad(self);
    accumulate(t, ix, [&](std::span<T> dst) {
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * (*mask)[i];
    });
  });
}

template <typename T>
Var<T> masked_fill(Var<T> x, std::span<const std::uint8_t> mask, T value) {
  if (mask.size() != x.size()) throw ShapeError("masked_fill: mask size");
  auto out = copy_of(x);
  for (std::size_t i = 0; i < out.size(); ++i)
    if (mask[i]) out[i] = value;
  std::vector<std::uint8_t> mk(mask.begin(), mask.end());
  const auto ix = x.id();
  return x.tape()->emit(x.shape(), std::move(out), {x}, [=](Tape<T>& t, std::size_t self) {
    auto g = t.grad(self);
    accumulate(t, ix, [&](std::span<T> dst) {
      for (std::size_t i = 0; i < g.size(); ++i)
        if (!mk[i]) dst[i] += g[i];
    });
  });
}

template <typename T>
std::vector<T> masked_softmax(std::span<const T> logits, std::span<const std::uint8_t> valid) {
  if (valid.size() != logits.size()) throw ShapeError("masked_softmax: valid size");
  std::vector<std::uint8_t> excluded(valid.size());
  for (std::size_t i = 0; i < valid.size(); ++i) excluded[i] = valid[i] ? 0 : 1;
  std::vector<T> p(logits.begin(), logits.end());
  softmax_rows(p.data(), 1, p.size(), excluded.data());
  return p;
}

template <typename T>
Var<T> softmax_cross_entropy(Var<T> logits, std::size_t target,
                             std::span<const std::uint8_t> valid) {
  const std::size_t K = logits.size();
  if (valid.size() != K) throw ShapeError("softmax_cross_entropy: valid size");
  if (target >= K || !valid[target])
    throw std::invalid_argument("softmax_cross_entropy: target " + std::to_string(target) +
                                " is not a valid position");
  auto lv = logits.value();
  T mx = -std::numeric_limits<T>::infinity();
  for (std::size_t i = 0; i < K; ++i)
    if (valid[i]) mx = std::max(mx, lv[i]);
  T z = 0;
  for (std::size_t i = 0; i < K; ++i)
    if (valid[i]) z += std::exp(lv[i] - mx);
  const T loss = std::log(z) + mx - lv[target];
  auto p = std::make_shared<std::vector<T>>(masked_softmax(lv, valid));
  const auto il = logits.id();
  return logits.tape()->emit({}, {loss}, {logits}, [=](Tape<T>& t, std::size_t self) {
    const T g = t.grad(self)[0];
    accumulate(t, il, [&](std::span<T> dst) {
      for (std::size_t i = 0; i < K; ++i) dst[i] += g * ((*p)[i] - (i == target ? T(1) : T(0)));
    });
  });
}

#define PRIM_INSTANTIATE(T)                                                                     \
  template Var<T> add(Var<T>, Var<T>);                                                          \
  template Var<T> sub(Var<T>, Var<T>);                                                          \
  template Var<T> mul(Var<T>, Var<T>);                                                          \
  template Var<T> scale(Var<T>, T);                                                             \
  template Var<T> relu(Var<T>);                                                                 \
  template Var<T> softplus(Var<T>);                                                             \
  template Var<T> sum(Var<T>);                                                                  \
  template Var<T> mean(Var<T>);                                                                 \
  template Var<T> reshape(Var<T>, Shape);                                                       \
  template Var<T> pick(Var<T>, std::size_t);                                                    \
  template Var<T> linear(Var<T>, Var<T>, Var<T>);                                               \
  template Var<T> layer_norm(Var<T>, Var<T>, Var<T>, T);                                        \
  template Var<T> attention(Var<T>, Var<T>, Var<T>, std::span<const std::uint8_t>,              \
                            std::size_t);                                                       \
  template std::vector<T> attention_weights(std::span<const T>, std::span<const T>, std::size_t, \
                                            std::size_t, std::size_t, std::size_t,              \
                                            std::span<const std::uint8_t>, std::size_t);        \
  template Var<T> swap01(Var<T>);                                                               \
  template Var<T> zero_rows(Var<T>, std::span<const std::uint8_t>);                             \
  template Var<T> embed_scalars(std::span<const T>, std::size_t, std::size_t, Var<T>, Var<T>);  \
  template Var<T> add_vector_at(Var<T>, Var<T>, std::span<const std::uint8_t>);                 \
  template Var<T> mean_axis1(Var<T>);                                                           \
  template Var<T> concat_axis1(Var<T>, Var<T>);                                                 \
  template Var<T> dropout(Var<T>, T, std::uint64_t);                                            \
  template Var<T> masked_fill(Var<T>, std::span<const std::uint8_t>, T);                        \
  template Var<T> softmax_cross_entropy(Var<T>, std::size_t, std::span<const std::uint8_t>);    \
  template std::vector<T> masked_softmax(std::span<const T>, std::span<const std::uint8_t>);

PRIM_INSTANTIATE(float)
PRIM_INSTANTIATE(double)

}  // namespace prim::ad
