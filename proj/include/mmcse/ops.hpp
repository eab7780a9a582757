#pragma once

#include <vector>

#include "mmcse/tensor.hpp"

// The primitive set of the autodiff engine. Every op records an adjoint rule
// when gradients are enabled and any input requires them. Inputs are never
// mutated; each op allocates fresh output storage.

namespace mmcse::ops {

// elementwise, same shape
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor abs(const Tensor& x);
// Gradient passes only strictly inside (lo, hi).
Tensor clamp(const Tensor& x, double lo, double hi);

// a: [M,K], b: [K,N] -> [M,N]
Tensor matmul(const Tensor& a, const Tensor& b);
// a: [B,M,K], b: [B,K,N] -> [B,M,N]
Tensor bmm(const Tensor& a, const Tensor& b);

// [..., R, C] -> [..., C, R]
Tensor transpose_last2(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);
Tensor concat_last(const std::vector<Tensor>& parts);
Tensor slice_last(const Tensor& x, index_t offset, index_t length);
std::vector<Tensor> split_last(const Tensor& x, const std::vector<index_t>& sizes);
// Inserts a new axis of extent `n` at `axis` by repetition.
Tensor broadcast_axis(const Tensor& x, int axis, index_t n);

Tensor sum_axis(const Tensor& x, int axis);
Tensor mean_axis(const Tensor& x, int axis);
Tensor sum_all(const Tensor& x);   // -> [1]
Tensor mean_all(const Tensor& x);  // -> [1]

// Max-subtracted softmax over the last axis; rejects non-finite input.
Tensor softmax_last(const Tensor& x);
// Each last-axis slice divided by max(L2 norm, eps); all-zero slices stay zero.
Tensor l2_normalize_last(const Tensor& x, double eps = 1e-12);

// y = x @ w (+ bias broadcast over rows). x: [..., in], w: [in, out],
// b: [out] or undefined for no bias. Composite of the primitives above.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

}  // namespace mmcse::ops
