#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hsmgnn/adb.hpp"
#include "hsmgnn/task.hpp"
#include "hsmgnn/tensor.hpp"

// Fusion graph convolution: multi-hop propagation on the SPD and Euclidean
// block graphs, per-branch projection, weighted fusion and the MLP head.

namespace hsmgnn::fusion {

struct FusionConfig {
  std::size_t hops_spd = 2;     // r_s
  std::size_t hops_euclid = 2;  // r_e
  std::size_t proj_spd = 8;     // F_s
  std::size_t proj_euclid = 8;  // F_e
  double weight_spd = 0.5;      // w_s
  double weight_euclid = 0.5;   // w_e
  std::vector<std::size_t> mlp_widths{64, 32, 16};
  Task task = Task::kRegression;
  std::size_t num_classes = 0;  // classification only

  std::size_t output_width() const { return task == Task::kRegression ? 1 : num_classes; }
};

void validate(const FusionConfig& cfg);

/// softmax_rows(relu(P_k P_k^T)) for P_k [...xNxW_p].
adb::AdjacencyMatrix euclidean_adjacency(const Tensor& block_features);

/// sum_{j=1..hops} A^j U for U [...xNxF], A [...xNxN]; powers by repeated
/// multiplication. Throws ConfigError when hops == 0.
Tensor multihop_conv(const Tensor& features, const adb::AdjacencyMatrix& adjacency,
                     std::size_t hops);

/// Projects every block output [...xNxF_raw] with the shared affine map and
/// stacks them in block order: [...xDxNxF_target].
Tensor branch_features(const std::vector<Tensor>& block_outputs, const adb::Affine& projection);

struct MlpHead {
  std::vector<adb::Affine> layers;  // three hidden (relu) + one linear output
};

/// MLP over flatten(cat(w_s U_s_c, w_e U_e_c)). Either branch may be
/// undefined (ablations). Inputs are [BxDxNxF]; returns [Bxoutput_width].
Tensor fuse_and_predict(const Tensor& spd_branch, const Tensor& euclid_branch,
                        const MlpHead& head, const FusionConfig& cfg);

/// Regression: MSE of pred [Bx1] against targets. Classification: softmax
/// cross-entropy of logits [BxK] against integer-valued labels. Throws
/// ContractError on an empty batch.
Tensor loss(const Tensor& pred, std::span<const double> targets, Task task);

}  // namespace hsmgnn::fusion
