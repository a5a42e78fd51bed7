#include "hsmgnn/adam.hpp"

#include <cmath>

#include "hsmgnn/error.hpp"

namespace hsmgnn {

void AdamState::step(ParameterSet& params) {
  auto& entries = params.entries();
  if (m_.empty()) {
    for (const auto& e : entries) {
      m_.emplace_back(e.tensor.numel(), 0.0);
      v_.emplace_back(e.tensor.numel(), 0.0);
    }
  }
  if (m_.size() != entries.size()) {
    throw ShapeError("adam: parameter count changed between steps");
  }
  for (std::size_t p = 0; p < entries.size(); ++p) {
    const Tensor& t = entries[p].tensor;
    if (m_[p].size() != t.numel()) {
      throw ShapeError("adam: moment buffer shape mismatch for '" + entries[p].name + "'");
    }
    if (!t.has_grad()) continue;
    for (double g : t.grad()) {
      if (!std::isfinite(g)) {
        throw NumericalError("adam: non-finite gradient in parameter '" + entries[p].name +
                             "' at step " + std::to_string(step_ + 1));
      }
    }
  }

  ++step_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double t = static_cast<double>(step_);
  const double correction1 = 1.0 - std::pow(b1, t);
  const double correction2 = 1.0 - std::pow(b2, t);
  for (std::size_t p = 0; p < entries.size(); ++p) {
    Tensor& param = entries[p].tensor;
    auto values = param.mutable_data();
    const bool has_grad = param.has_grad();
    const std::span<const double> grad = has_grad ? param.grad() : std::span<const double>{};
    auto& m = m_[p];
    auto& v = v_[p];
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = has_grad ? grad[i] : 0.0;
      m[i] = b1 * m[i] + (1.0 - b1) * g;
      v[i] = b2 * v[i] + (1.0 - b2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      values[i] -= options_.learning_rate * m_hat / (std::sqrt(v_hat) + options_.epsilon);
    }
  }
}

}  // namespace hsmgnn
