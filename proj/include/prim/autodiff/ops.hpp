#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "prim/autodiff/tape.hpp"

namespace prim::ad {

// Elementwise ops require identical shapes; there is no implicit broadcasting.
template <typename T> Var<T> add(Var<T> a, Var<T> b);
template <typename T> Var<T> sub(Var<T> a, Var<T> b);
template <typename T> Var<T> mul(Var<T> a, Var<T> b);
template <typename T> Var<T> scale(Var<T> a, T s);
template <typename T> Var<T> relu(Var<T> a);
template <typename T> Var<T> softplus(Var<T> a);
template <typename T> Var<T> sum(Var<T> a);
template <typename T> Var<T> mean(Var<T> a);
template <typename T> Var<T> reshape(Var<T> a, Shape shape);
/// Scalar element a[index] as a rank-0 node.
template <typename T> Var<T> pick(Var<T> a, std::size_t index);

/// x[..., in] @ w[in, out] + b[out]. `b` may be undefined.
template <typename T> Var<T> linear(Var<T> x, Var<T> w, Var<T> b);

template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gain, Var<T> bias, T eps);

/// Multi-head scaled dot-product attention over q[b,nq,D], k/v[b,nk,D].
/// key_mask (1 = excluded) has size nk (shared by all batches) or b*nk, or is
/// empty. A query whose keys are all excluded produces a zero row.
template <typename T>
Var<T> attention(Var<T> q, Var<T> k, Var<T> v, std::span<const std::uint8_t> key_mask,
                 std::size_t heads);

/// Attention probabilities [b, heads, nq, nk] for inspection; not recorded.
template <typename T>
std::vector<T> attention_weights(std::span<const T> q, std::span<const T> k, std::size_t b,
                                 std::size_t nq, std::size_t nk, std::size_t dim,
                                 std::span<const std::uint8_t> key_mask, std::size_t heads);

/// [A, B, rest...] -> [B, A, rest...]
template <typename T> Var<T> swap01(Var<T> x);

/// Zeroes the slabs x[i, ...] where keep[i] == 0.
template <typename T> Var<T> zero_rows(Var<T> x, std::span<const std::uint8_t> keep);

/// h[k, s, :] = data[k * n + s] * w + table[k, :] for k < rows, s < n.
template <typename T>
Var<T> embed_scalars(std::span<const T> data, std::size_t rows, std::size_t n, Var<T> w,
                     Var<T> table);

/// h[k, s, :] += v for every row k with select[k] != 0.
template <typename T>
Var<T> add_vector_at(Var<T> h, Var<T> v, std::span<const std::uint8_t> select);

/// x[A, B, C] -> mean over B -> [A, C]
template <typename T> Var<T> mean_axis1(Var<T> x);

/// Concatenates a[B, n1, C] and b[B, n2, C] along axis 1.
template <typename T> Var<T> concat_axis1(Var<T> a, Var<T> b);

/// Inverted dropout with an explicit seed. Identity when rate == 0.
template <typename T> Var<T> dropout(Var<T> x, T rate, std::uint64_t seed);

/// Replaces entries with mask[i] != 0 by `value`; those entries pass no gradient.
template <typename T>
Var<T> masked_fill(Var<T> x, std::span<const std::uint8_t> mask, T value);

/// -log softmax(logits over valid entries)[target]. valid[i] != 0 marks a
/// candidate; invalid entries get probability zero.
template <typename T>
Var<T> softmax_cross_entropy(Var<T> logits, std::size_t target,
                             std::span<const std::uint8_t> valid);

/// Softmax over valid entries; invalid entries are exactly zero.
template <typename T>
std::vector<T> masked_softmax(std::span<const T> logits, std::span<const std::uint8_t> valid);

}  // namespace prim::ad
