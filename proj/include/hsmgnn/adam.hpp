#pragma once

#include <cstdint>
#include <vector>

#include "hsmgnn/parameters.hpp"

namespace hsmgnn {

struct AdamOptions {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment buffers and step counter for bias-corrected Adam.
class AdamState {
 public:
  explicit AdamState(AdamOptions options = {}) : options_(options) {}

  const AdamOptions& options() const { return options_; }
  void set_learning_rate(double lr) { options_.learning_rate = lr; }
  std::uint64_t step_count() const { return step_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }

  /// One update of every parameter from its accumulated gradient. Parameters
  /// without a gradient are treated as having a zero gradient. Throws
  /// NumericalError naming the offending parameter if a gradient is not
  /// finite; in that case no parameter is modified.
  void step(ParameterSet& params);

 private:
  AdamOptions options_;
  std::uint64_t step_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace hsmgnn
