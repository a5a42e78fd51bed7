#pragma once

// Shared test oracles: seeded tensors and central finite differences.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "hsmgnn/random.hpp"
#include "hsmgnn/tensor.hpp"

namespace hsmgnn::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0,
                            bool requires_grad = false) {
  std::vector<double> data(shape_numel(shape));
  for (double& v : data) v = rng.uniform(lo, hi);
  return Tensor::from_data(std::move(shape), std::move(data), requires_grad);
}

inline double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

/// ||a - f|| / max(||a||, ||f||), or 0 when both norms are below `floor`.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& f,
                             double floor = 1e-8) {
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - f[i];
  const double scale = std::max(norm2(a), norm2(f));
  if (scale < floor) return 0.0;
  return norm2(d) / scale;
}

/// Central differences of a scalar function with respect to every element
/// of `x` (perturbed in place and restored).
inline std::vector<double> numeric_gradient(Tensor& x, const std::function<double()>& f,
                                            double h = 1e-6) {
  auto data = x.mutable_data();
  std::vector<double> g(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double saved = data[i];
    data[i] = saved + h;
    const double up = f();
    data[i] = saved - h;
    const double down = f();
    data[i] = saved;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

inline std::vector<double> analytic_gradient(const Tensor& x) {
  if (!x.has_grad()) return std::vector<double>(x.numel(), 0.0);
  return {x.grad().begin(), x.grad().end()};
}

/// Builds the loss, backpropagates and compares every input's gradient with
/// finite differences. Returns the worst relative error.
inline double gradient_check(std::vector<Tensor> inputs, const std::function<Tensor()>& loss,
                             double h = 1e-6) {
  for (auto& t : inputs) t.zero_grad();
  loss().backward();
  double worst = 0.0;
  for (auto& t : inputs) {
    const auto analytic = analytic_gradient(t);
    const auto numeric = numeric_gradient(t, [&] {
      NoGradGuard guard;
      return loss().item();
    }, h);
    worst = std::max(worst, relative_error(analytic, numeric));
  }
  return worst;
}

}  // namespace hsmgnn::testing
