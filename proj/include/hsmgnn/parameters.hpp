#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hsmgnn/tensor.hpp"

namespace hsmgnn {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Ordered collection of named trainable tensors. Insertion order is the
/// canonical order for optimizers and checkpoints.
class ParameterSet {
 public:
  /// Registers a new trainable leaf; names must be unique.
  Tensor add(std::string name, Tensor tensor);

  bool contains(std::string_view name) const;
  Tensor& at(std::string_view name);
  const Tensor& at(std::string_view name) const;

  std::vector<NamedTensor>& entries() { return entries_; }
  const std::vector<NamedTensor>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;

  void zero_grads();

  /// Snapshot of all values, in order.
  std::vector<std::vector<double>> values() const;
  void assign_values(const std::vector<std::vector<double>>& values);

 private:
  std::vector<NamedTensor> entries_;
};

}  // namespace hsmgnn
