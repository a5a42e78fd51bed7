#include "hsmgnn/adb.hpp"

#include <algorithm>

#include "hsmgnn/error.hpp"
#include "hsmgnn/ops.hpp"

namespace hsmgnn::adb {

namespace {

void check_spd_block(const Tensor& u, const char* where) {
  if (u.rank() < 3 || u.shape()[u.rank() - 2] != u.shape()[u.rank() - 3]) {
    throw ShapeError(std::string(where) + ": expected [...xNxNxM], got " +
                     shape_to_string(u.shape()));
  }
}

}  // namespace

Tensor Affine::apply(const Tensor& x) const {
  if (weight.rank() != 2 || x.rank() == 0 || x.shape().back() != weight.dim(0)) {
    throw ShapeError("affine: input " + shape_to_string(x.shape()) +
                     " does not match weight " + shape_to_string(weight.shape()));
  }
  const std::size_t in = weight.dim(0);
  const std::size_t out = weight.dim(1);
  Shape out_shape(x.shape().begin(), x.shape().end() - 1);
  out_shape.push_back(out);
  Tensor y = ops::matmul(ops::reshape(x, {x.numel() / in, in}), weight);
  if (bias.defined()) y = ops::add(y, bias);
  return ops::reshape(y, std::move(out_shape));
}

AdjacencyMatrix base_adjacency(const Tensor& spd_block) {
  check_spd_block(spd_block, "base_adjacency");
  const Shape& s = spd_block.shape();
  const std::size_t n = s[s.size() - 3];
  const std::size_t m = s[s.size() - 1];
  Shape flat(s.begin(), s.end() - 1);
  flat.back() = n * m;
  return {ops::softmax_rows(ops::relu(ops::gram(ops::reshape(spd_block, std::move(flat)))))};
}

Tensor bilinear_query(const Tensor& spd_block, const Tensor& memory) {
  check_spd_block(spd_block, "bilinear_query");
  const std::size_t r = spd_block.rank();
  const std::size_t n = spd_block.shape()[r - 3];
  if (memory.rank() != 2 || memory.dim(0) != n) {
    throw ShapeError("bilinear_query: memory " + shape_to_string(memory.shape()) +
                     " incompatible with " + shape_to_string(spd_block.shape()));
  }
  // [...xNxNxM] -> [...xMxNxN]
  std::vector<std::size_t> to_windows(r);
  for (std::size_t i = 0; i + 3 < r; ++i) to_windows[i] = i;
  to_windows[r - 3] = r - 1;
  to_windows[r - 2] = r - 3;
  to_windows[r - 1] = r - 2;
  Tensor per_window = ops::permute(spd_block, to_windows);
  Tensor q = ops::matmul(ops::matmul(ops::transpose(memory), per_window), memory);
  // [...xMxQxQ] -> [...xQxQxM]
  std::vector<std::size_t> back(r);
  for (std::size_t i = 0; i + 3 < r; ++i) back[i] = i;
  back[r - 3] = r - 2;
  back[r - 2] = r - 1;
  back[r - 1] = r - 3;
  return ops::permute(q, back);
}

Tensor ndv(const Tensor& query, const DistanceBank& bank) {
  if (query.rank() < 3) {
    throw ShapeError("ndv: expected [...xM_qxM_qxM], got " + shape_to_string(query.shape()));
  }
  const Shape& s = query.shape();
  Shape flat(s.begin(), s.end() - 3);
  flat.push_back(s[s.size() - 3] * s[s.size() - 2] * s[s.size() - 1]);
  Tensor h = ops::relu(bank.hidden.apply(ops::reshape(query, std::move(flat))));
  return ops::sigmoid(bank.output.apply(h));
}

AdjacencyMatrix refine_adjacency(const Tensor& alpha, const AdjacencyMatrix& base) {
  const Tensor& a = base.weights;
  if (a.rank() < 2 || alpha.rank() != a.rank() - 1 || alpha.shape().back() != a.shape().back() ||
      !std::equal(alpha.shape().begin(), alpha.shape().end() - 1, a.shape().begin())) {
    throw ShapeError("refine_adjacency: alpha " + shape_to_string(alpha.shape()) +
                     " does not match adjacency " + shape_to_string(a.shape()));
  }
  const auto values = alpha.data();
  if (std::any_of(values.begin(), values.end(), [](double v) { return v < 0.0; })) {
    throw ContractError("refine_adjacency: distance factors must be non-negative");
  }
  Shape column = alpha.shape();
  column.push_back(1);
  Tensor gain = ops::add(ops::reshape(alpha, std::move(column)), Tensor::scalar(1.0));
  return {ops::mul(a, gain)};
}

AdbOutput forward(const Tensor& spd_block, const DistanceBank& bank) {
  AdbOutput out;
  out.base = base_adjacency(spd_block);
  out.alpha = ndv(bilinear_query(spd_block, bank.memory), bank);
  out.refined = refine_adjacency(out.alpha, out.base);
  return out;
}

}  // namespace hsmgnn::adb
