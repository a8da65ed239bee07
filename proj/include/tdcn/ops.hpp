#pragma once

#include <vector>

#include "tdcn/tensor.hpp"

namespace tdcn {

// Forward ops. Passing tape == nullptr runs inference only (no recording,
// outputs never require grad). All shape violations throw ShapeError naming
// the offending dimension.

// x: (N,C,H,W), w: (O,I,K,K), b: (O) or default-constructed for none.
Tensor conv2d(Tape* tape, const Tensor& x, const Tensor& w, const Tensor& b,
              int stride = 1, int pad = 0);

// x: (N,D), w: (M,D), b: (M). out = x w^T + b.
Tensor linear(Tape* tape, const Tensor& x, const Tensor& w, const Tensor& b);

Tensor relu(Tape* tape, const Tensor& x);

// Non-overlapping k x k max; H, W must divide by k. Ties take the first
// index in row-major scan.
Tensor maxpool2d(Tape* tape, const Tensor& x, int k = 2);

// Nearest-neighbour upsampling by an integer factor >= 1.
Tensor upsample_nearest(Tape* tape, const Tensor& x, int factor);

enum class SoftmaxAxis {
    Classes, // over dim 1 of (N,D)
    Spatial, // over H*W of (N,C,H,W), per (n,c) plane
};
Tensor softmax(Tape* tape, const Tensor& x, SoftmaxAxis axis);

// -mean_n log p[n, target_n], p clamped to [1e-12, 1]. probs: (N,D).
Tensor cross_entropy_hard(Tape* tape, const Tensor& probs,
                          const std::vector<int>& targets);

// -mean_n sum_i t[n,i] log p[n,i]; each target row must be nonnegative and
// sum to 1 within 1e-5.
Tensor cross_entropy_soft(Tape* tape, const Tensor& probs, const Tensor& target);

enum class EwiseOp { Add, Mul };

// Elementwise with limited broadcasting of b: same shape as a, a rank-1
// per-channel vector (C) against (...,C,H,W), or a trailing-shape tensor
// broadcast over a's leading batch dim. Broadcast backward sums over the
// broadcast dims.
Tensor ewise(Tape* tape, const Tensor& a, const Tensor& b, EwiseOp op);

inline Tensor add(Tape* t, const Tensor& a, const Tensor& b) {
    return ewise(t, a, b, EwiseOp::Add);
}
inline Tensor mul(Tape* t, const Tensor& a, const Tensor& b) {
    return ewise(t, a, b, EwiseOp::Mul);
}

Tensor sum(Tape* tape, const Tensor& x);
Tensor scale(Tape* tape, const Tensor& x, real alpha);

// Row `row` of E (T x C), broadcast to (C, H, W). Gradients accumulate only
// into that row.
Tensor embed_row_broadcast(Tape* tape, const Tensor& E, int row, int H, int W);

// argmax over dim 1 of (N,D); plain helper, not differentiable.
std::vector<int> argmax_rows(const Tensor& t);

} // namespace tdcn
