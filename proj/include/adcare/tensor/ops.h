#pragma once

#include <span>
#include <vector>

#include "adcare/tensor/tensor.h"

// Differentiable operations. Every op records a backward rule when any input
// requires grad; otherwise the result is a plain constant.
namespace adcare {

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);

// x[m, n] + y tiled along rows. y is [n] (bias) or [r, n] with m % r == 0.
Tensor add_broadcast(const Tensor& x, const Tensor& y);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor mean_over_axis(const Tensor& x, std::size_t axis);

Tensor reshape(const Tensor& x, Shape shape);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);

Tensor gelu(const Tensor& x);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);
Tensor softmax_rows(const Tensor& x);
// Row i is a softmax over columns 0..i; columns past i are exactly zero.
Tensor causal_softmax(const Tensor& scores);
Tensor log_softmax_rows(const Tensor& x);
Tensor l2_normalize_rows(const Tensor& x);

Tensor embedding(const Tensor& table, std::span<const int> indices);
// out[l] = x[l, indices[l]] for x of shape [L, V].
Tensor pick(const Tensor& x, std::span<const int> indices);

/// Mean over positions of -log softmax(logits)[target].
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> targets);

}  // namespace adcare
