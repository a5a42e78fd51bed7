#pragma once

#include <cstddef>

#include "hsmgnn/tensor.hpp"

// Submanifold-cross-segment embedding: raw series -> non-overlapping blocks
// -> temporal CNN features P -> sliding-window second-moment matrices U on
// the SPD cone.

namespace hsmgnn::scs {

struct ScsConfig {
  std::size_t patch_length = 10;  // W_p
  double delta = 0.3;             // cross-decomposition ratio, in (0, 1)
  std::size_t feature_blocks = 3; // D
  std::size_t cnn_hidden = 16;
  std::size_t kernel_size = 3;
  double spd_jitter = 1e-6;
};

/// z_s = max(1, round(delta * W_p)).
std::size_t cross_window_length(const ScsConfig& cfg);
/// M = W_p - z_s + 1.
std::size_t window_count(const ScsConfig& cfg);
/// L = floor(T / W_p).
std::size_t block_count(const ScsConfig& cfg, std::size_t series_length);

/// Throws ConfigError unless the configuration is admissible for series of
/// length `series_length`.
void validate(const ScsConfig& cfg, std::size_t series_length);

/// [NxTxC] or [BxNxTxC] -> [N'xW_pxL] or [BxN'xW_pxL] with N' = N*C
/// (virtual sensor n*C + c). Trailing T mod W_p steps are dropped.
Tensor block_partition(const Tensor& series, const ScsConfig& cfg);

struct TemporalCnnWeights {
  Tensor conv1_weight;  // [hidden x L x k]
  Tensor conv1_bias;    // [hidden]
  Tensor conv2_weight;  // [D x hidden x k]
  Tensor conv2_bias;    // [D]
};

/// P = relu(W2 * relu(W1 * X)) convolving along the within-block axis with
/// the L blocks as input channels. [...xNxW_pxL] -> [...xNxW_pxD].
Tensor temporal_cnn(const Tensor& blocks, const TemporalCnnWeights& weights);

/// U[..., :, :, m] = P_m P_m^T + jitter * I for the M = W_p - z_s + 1
/// stride-1 windows P_m = P[..., :, m:m+z_s]. Only the upper triangle is
/// computed; the result is exactly symmetric. [...xNxW_p] -> [...xNxNxM].
Tensor window_covariance(const Tensor& features, std::size_t window, double jitter);

/// Stack of window covariance tensors for every feature block.
struct SpdFeatureTensor {
  Tensor values;  // [...xNxNxMxD]
  double jitter = 0.0;

  std::size_t blocks() const { return values.shape().back(); }
  /// U_d as [...xNxNxM].
  Tensor block(std::size_t d) const;
};

/// P [...xNxW_pxD] -> U^s [...xNxNxMxD].
SpdFeatureTensor build_spd_tensor(const Tensor& features, const ScsConfig& cfg);

/// Feature block d of P [...xNxW_pxD] as [...xNxW_p].
Tensor feature_block(const Tensor& features, std::size_t d);

}  // namespace hsmgnn::scs
