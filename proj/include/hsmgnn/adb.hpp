#pragma once

#include <cstddef>

#include "hsmgnn/tensor.hpp"

// Adaptive distance bank: refines the per-block SPD adjacency with a
// per-sensor factor alpha computed from the bilinear projection of U_d onto a
// trainable memory matrix. No eigen or Cholesky decomposition is used.

namespace hsmgnn::adb {

/// Non-negative graph weights, [...xNxN].
struct AdjacencyMatrix {
  Tensor weights;
};

/// Affine map y = x W + b with W stored as [in x out].
struct Affine {
  Tensor weight;
  Tensor bias;

  /// x [...xin] -> [...xout].
  Tensor apply(const Tensor& x) const;
};

struct DistanceBank {
  Tensor memory;  // Xi, [N x M_q]
  Affine hidden;  // M_q^2 * M -> M_d
  Affine output;  // M_d -> N
};

/// softmax_rows(relu(Z Z^T)) with Z the [...xNx(N*M)] flattening of U_d.
AdjacencyMatrix base_adjacency(const Tensor& spd_block);

/// Q[..., :, :, m] = Xi^T U_d[..., :, :, m] Xi. [...xNxNxM] -> [...xM_qxM_qxM].
Tensor bilinear_query(const Tensor& spd_block, const Tensor& memory);

/// alpha = sigmoid(W2 relu(W1 flatten(Q) + b1) + b2), [...xN], in (0,1).
Tensor ndv(const Tensor& query, const DistanceBank& bank);

/// Row i of A_base scaled by (1 + alpha_i). Throws ContractError on negative
/// alpha.
AdjacencyMatrix refine_adjacency(const Tensor& alpha, const AdjacencyMatrix& base);

/// Full pipeline for one block: base adjacency refined by the bank.
struct AdbOutput {
  AdjacencyMatrix base;
  Tensor alpha;
  AdjacencyMatrix refined;
};
AdbOutput forward(const Tensor& spd_block, const DistanceBank& bank);

}  // namespace hsmgnn::adb
