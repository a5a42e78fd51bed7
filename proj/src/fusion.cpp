#include "hsmgnn/fusion.hpp"

#include <cmath>

#include "hsmgnn/error.hpp"
#include "hsmgnn/ops.hpp"

namespace hsmgnn {

std::string_view task_name(Task task) {
  return task == Task::kRegression ? "regression" : "classification";
}

Task parse_task(std::string_view name) {
  if (name == "regression") return Task::kRegression;
  if (name == "classification") return Task::kClassification;
  throw ConfigError("unknown task '" + std::string(name) + "'");
}

}  // namespace hsmgnn

namespace hsmgnn::fusion {

void validate(const FusionConfig& cfg) {
  if (cfg.hops_spd == 0 || cfg.hops_euclid == 0) throw ConfigError("hop counts must be >= 1");
  if (cfg.proj_spd == 0 || cfg.proj_euclid == 0) throw ConfigError("projection widths must be positive");
  if (!(cfg.weight_spd >= 0.0) || !(cfg.weight_euclid >= 0.0)) {
    throw ConfigError("fusion weights must be non-negative");
  }
  if (cfg.mlp_widths.size() != 3) throw ConfigError("mlp_widths must list exactly 3 hidden widths");
  for (std::size_t w : cfg.mlp_widths) {
    if (w == 0) throw ConfigError("mlp widths must be positive");
  }
  if (cfg.task == Task::kClassification && cfg.num_classes < 2) {
    throw ConfigError("classification needs at least 2 classes");
  }
}

adb::AdjacencyMatrix euclidean_adjacency(const Tensor& block_features) {
  return {ops::softmax_rows(ops::relu(ops::gram(block_features)))};
}

Tensor multihop_conv(const Tensor& features, const adb::AdjacencyMatrix& adjacency,
                     std::size_t hops) {
  if (hops == 0) throw ConfigError("multihop_conv: hop count must be >= 1");
  Tensor hop = ops::matmul(adjacency.weights, features);
  Tensor total = hop;
  for (std::size_t j = 2; j <= hops; ++j) {
    hop = ops::matmul(adjacency.weights, hop);
    total = ops::add(total, hop);
  }
  return total;
}

Tensor branch_features(const std::vector<Tensor>& block_outputs, const adb::Affine& projection) {
  if (block_outputs.empty()) throw ShapeError("branch_features: no block outputs");
  const Shape& first = block_outputs.front().shape();
  std::vector<Tensor> parts;
  parts.reserve(block_outputs.size());
  for (const Tensor& block : block_outputs) {
    if (block.shape() != first) {
      throw ShapeError("branch_features: block output " + shape_to_string(block.shape()) +
                       " differs from " + shape_to_string(first));
    }
    Tensor projected = projection.apply(block);
    Shape s = projected.shape();
    s.insert(s.end() - 2, 1);
    parts.push_back(ops::reshape(projected, std::move(s)));
  }
  return ops::concat(parts, parts.front().rank() - 3);
}

namespace {

Tensor flatten_branch(const Tensor& branch, double weight, std::size_t& batch) {
  if (branch.rank() < 3) {
    throw ShapeError("fuse_and_predict: branch must be [Bx...xNxF], got " +
                     shape_to_string(branch.shape()));
  }
  const std::size_t b = branch.rank() == 3 ? 1 : branch.dim(0);
  if (batch != 0 && batch != b) throw ShapeError("fuse_and_predict: branch batch sizes differ");
  batch = b;
  return ops::scale(ops::reshape(branch, {b, branch.numel() / b}), weight);
}

}  // namespace

Tensor fuse_and_predict(const Tensor& spd_branch, const Tensor& euclid_branch,
                        const MlpHead& head, const FusionConfig& cfg) {
  std::size_t batch = 0;
  std::vector<Tensor> parts;
  if (spd_branch.defined()) parts.push_back(flatten_branch(spd_branch, cfg.weight_spd, batch));
  if (euclid_branch.defined()) {
    parts.push_back(flatten_branch(euclid_branch, cfg.weight_euclid, batch));
  }
  if (parts.empty()) throw ShapeError("fuse_and_predict: both branches are absent");
  Tensor u = parts.size() == 1 ? parts.front() : ops::concat(parts, 1);
  if (head.layers.empty() || head.layers.front().weight.dim(0) != u.dim(1)) {
    throw ShapeError("fuse_and_predict: fused width " + std::to_string(u.dim(1)) +
                     " does not match MLP input " +
                     (head.layers.empty() ? std::string("(none)")
                                          : shape_to_string(head.layers.front().weight.shape())));
  }
  Tensor h = u;
  for (std::size_t i = 0; i + 1 < head.layers.size(); ++i) h = ops::relu(head.layers[i].apply(h));
  return head.layers.back().apply(h);
}

Tensor loss(const Tensor& pred, std::span<const double> targets, Task task) {
  if (targets.empty()) throw ContractError("loss: empty batch");
  if (pred.rank() == 0 || pred.dim(0) != targets.size()) {
    throw ShapeError("loss: prediction " + shape_to_string(pred.shape()) + " vs " +
                     std::to_string(targets.size()) + " targets");
  }
  if (task == Task::kRegression) {
    if (pred.numel() != targets.size()) {
      throw ShapeError("loss: regression expects one output per sample, got " +
                       shape_to_string(pred.shape()));
    }
    Tensor target = Tensor::from_data(pred.shape(), {targets.begin(), targets.end()});
    return ops::mse_loss(pred, target);
  }
  std::vector<int> labels(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    labels[i] = static_cast<int>(std::lround(targets[i]));
  }
  return ops::cross_entropy(pred, labels);
}

}  // namespace hsmgnn::fusion
