#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "swcap/tensor.hpp"

namespace swcap {

// Batched matrix product [..,p,q] x [..,q,r] -> [..,p,r]. Leading extents
// broadcast numpy-style; 1-D operands are not promoted.
Tensor matmul(const Tensor& a, const Tensor& b);

// Elementwise with numpy-style broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, Real factor);

Tensor relu(const Tensor& x);

// Stable (max-subtracted) softmax / log-softmax along `axis` (negative counts
// from the back).
Tensor softmax(const Tensor& x, int axis = -1);
Tensor log_softmax(const Tensor& x, int axis = -1);

inline constexpr Real kLayerNormEps = 1e-5;

// Normalizes over the last axis, then applies gain and bias of that extent.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  Real eps = kLayerNormEps);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// [m, D] -> [D]
Tensor mean_pool(const Tensor& x);

// Concatenation along the last axis; leading extents must match.
Tensor concat_last(const Tensor& a, const Tensor& b);
// Concatenates along axis 0. A 1-D [D] operand counts as one row.
Tensor stack_rows(std::span<const Tensor> rows);
Tensor stack_rows(std::initializer_list<Tensor> rows);

// table [V, D], ids -> [n, D]
Tensor embedding_lookup(const Tensor& table, std::span<const int> ids);
// Selects slices along axis 0: out[i] = x[index[i]]. Repeats allowed.
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index);
// x [n, V] -> [n]; out[i] = x[i, ids[i]].
Tensor pick(const Tensor& x, std::span<const int> ids);

Tensor reshape(const Tensor& x, Shape shape);
Tensor transpose_last2(const Tensor& x);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);

// [.., L, D] -> [.., h, L, D/h] with head i taking columns [i*D/h, (i+1)*D/h).
Tensor split_heads(const Tensor& x, std::size_t heads);
// Inverse of split_heads.
Tensor merge_heads(const Tensor& x);

// Inverted dropout; identity when p == 0.
Tensor dropout(const Tensor& x, Real p, std::mt19937_64& rng);

}  // namespace swcap
