#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hsmgnn/tensor.hpp"

// Differentiable tensor operations. Shapes written "[...xPxQ]" accept any
// number of leading batch dimensions.

namespace hsmgnn::ops {

/// [...xPxQ] x [...xQxR] -> [...xPxR]; batch dimensions broadcast
/// numpy-style (right-aligned, size-1 or missing dims stretch).
Tensor matmul(const Tensor& a, const Tensor& b);

/// X X^T for X [...xNxK] -> [...xNxN]. Each off-diagonal pair is computed
/// once and mirrored, so the result is exactly symmetric.
Tensor gram(const Tensor& x);

/// Cross-correlation with "same" zero padding along the last axis.
/// x: [BxC_in xLen], weight: [C_out x C_in x K] with K odd, bias: [C_out] or
/// undefined.
Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias = {});

// Broadcasting elementwise arithmetic.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
/// Numerically stable softmax over the last axis.
Tensor softmax_rows(const Tensor& x);

/// Swaps the last two axes.
Tensor transpose(const Tensor& x);
Tensor permute(const Tensor& x, const std::vector<std::size_t>& axes);
Tensor reshape(const Tensor& x, Shape shape);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
/// Elements [start, start + length) along `axis`.
Tensor slice(const Tensor& x, std::size_t axis, std::size_t start,
             std::size_t length);

Tensor sum_axis(const Tensor& x, std::size_t axis, bool keepdim = false);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// Mean of (pred - target)^2 over all elements; shapes must match.
Tensor mse_loss(const Tensor& pred, const Tensor& target);
/// Mean softmax cross-entropy; logits [BxK], labels in [0, K).
Tensor cross_entropy(const Tensor& logits, std::span<const int> labels);

}  // namespace hsmgnn::ops
