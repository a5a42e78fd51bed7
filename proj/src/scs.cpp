#include "hsmgnn/scs.hpp"

#include <cmath>
#include <memory>

#include "hsmgnn/error.hpp"
#include "hsmgnn/kernels.hpp"
#include "hsmgnn/ops.hpp"

namespace hsmgnn::scs {

using detail::Node;

std::size_t cross_window_length(const ScsConfig& cfg) {
  const double raw = std::round(cfg.delta * static_cast<double>(cfg.patch_length));
  return raw < 1.0 ? 1 : static_cast<std::size_t>(raw);
}

std::size_t window_count(const ScsConfig& cfg) {
  return cfg.patch_length - cross_window_length(cfg) + 1;
}

std::size_t block_count(const ScsConfig& cfg, std::size_t series_length) {
  return series_length / cfg.patch_length;
}

void validate(const ScsConfig& cfg, std::size_t series_length) {
  if (cfg.patch_length == 0) throw ConfigError("patch_length must be positive");
  if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) {
    throw ConfigError("delta must lie in (0, 1), got " + std::to_string(cfg.delta));
  }
  if (series_length < cfg.patch_length) {
    throw ConfigError("series length " + std::to_string(series_length) +
                      " is shorter than patch_length " + std::to_string(cfg.patch_length));
  }
  if (cross_window_length(cfg) > cfg.patch_length) {
    throw ConfigError("cross window longer than patch");
  }
  if (cfg.feature_blocks == 0) throw ConfigError("feature_blocks must be positive");
  if (cfg.cnn_hidden == 0) throw ConfigError("cnn_hidden must be positive");
  if (cfg.kernel_size % 2 == 0) {
    throw ConfigError("kernel_size must be odd, got " + std::to_string(cfg.kernel_size));
  }
  if (!(cfg.spd_jitter >= 0.0)) throw ConfigError("spd_jitter must be non-negative");
}

Tensor block_partition(const Tensor& series, const ScsConfig& cfg) {
  if (series.rank() != 3 && series.rank() != 4) {
    throw ShapeError("block_partition: expected [NxTxC] or [BxNxTxC], got " +
                     shape_to_string(series.shape()));
  }
  const bool batched = series.rank() == 4;
  const std::size_t batch = batched ? series.dim(0) : 1;
  const std::size_t n = series.dim(batched ? 1 : 0);
  const std::size_t t_len = series.dim(batched ? 2 : 1);
  const std::size_t c = series.dim(batched ? 3 : 2);
  if (cfg.patch_length == 0 || t_len < cfg.patch_length) {
    throw ConfigError("block_partition: series length " + std::to_string(t_len) +
                      " shorter than patch_length " + std::to_string(cfg.patch_length));
  }
  const std::size_t wp = cfg.patch_length;
  const std::size_t blocks = t_len / wp;
  const std::size_t sensors = n * c;

  // index[k] = flat source position of destination element k.
  auto index = std::make_shared<std::vector<std::size_t>>();
  index->reserve(batch * sensors * wp * blocks);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t s = 0; s < sensors; ++s) {
      const std::size_t sensor = s / c;
      const std::size_t channel = s % c;
      for (std::size_t t = 0; t < wp; ++t) {
        for (std::size_t l = 0; l < blocks; ++l) {
          const std::size_t time = l * wp + t;
          index->push_back(((b * n + sensor) * t_len + time) * c + channel);
        }
      }
    }
  }
  std::vector<double> out(index->size());
  const auto in = series.data();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = in[(*index)[k]];
  Shape shape = batched ? Shape{batch, sensors, wp, blocks} : Shape{sensors, wp, blocks};
  return detail::make_result(std::move(shape), std::move(out), {series}, [index](Node& self) {
    auto& g = self.inputs[0]->ensure_grad();
    for (std::size_t k = 0; k < index->size(); ++k) g[(*index)[k]] += self.grad[k];
  });
}

Tensor temporal_cnn(const Tensor& blocks, const TemporalCnnWeights& w) {
  if (blocks.rank() < 3) {
    throw ShapeError("temporal_cnn: expected [...xNxW_pxL], got " +
                     shape_to_string(blocks.shape()));
  }
  const Shape& s = blocks.shape();
  const std::size_t wp = s[s.size() - 2];
  const std::size_t l = s[s.size() - 1];
  const std::size_t rows = blocks.numel() / (wp * l);
  Tensor x = ops::permute(ops::reshape(blocks, {rows, wp, l}), {0, 2, 1});
  Tensor h = ops::relu(ops::conv1d(x, w.conv1_weight, w.conv1_bias));
  Tensor p = ops::relu(ops::conv1d(h, w.conv2_weight, w.conv2_bias));
  const std::size_t d = p.dim(1);
  Shape out_shape(s.begin(), s.end() - 1);
  out_shape.push_back(d);
  return ops::reshape(ops::permute(p, {0, 2, 1}), std::move(out_shape));
}

Tensor window_covariance(const Tensor& features, std::size_t window, double jitter) {
  if (features.rank() < 2) {
    throw ShapeError("window_covariance: expected [...xNxW_p], got " +
                     shape_to_string(features.shape()));
  }
  const Shape& s = features.shape();
  const std::size_t n = s[s.size() - 2];
  const std::size_t wp = s[s.size() - 1];
  if (window == 0 || window > wp) {
    throw ConfigError("window_covariance: window length " + std::to_string(window) +
                      " must lie in [1, " + std::to_string(wp) + "]");
  }
  const std::size_t m_count = wp - window + 1;
  const std::size_t batch = features.numel() / (n * wp);
  const auto& kt = kernels::active();

  std::vector<double> out(batch * n * n * m_count);
  const double* in = features.data().data();
  for (std::size_t b = 0; b < batch; ++b) {
    const double* pb = in + b * n * wp;
    double* ub = out.data() + b * n * n * m_count;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i; j < n; ++j) {
        for (std::size_t m = 0; m < m_count; ++m) {
          double v = kt.dot(pb + i * wp + m, pb + j * wp + m, window);
          if (i == j) v += jitter;
          ub[(i * n + j) * m_count + m] = v;
          ub[(j * n + i) * m_count + m] = v;
        }
      }
    }
  }

  Shape out_shape(s.begin(), s.end() - 1);
  out_shape.push_back(n);
  out_shape.push_back(m_count);
  return detail::make_result(
      std::move(out_shape), std::move(out), {features},
      [batch, n, wp, window, m_count](Node& self) {
        Node& in_node = *self.inputs[0];
        auto& gp = in_node.ensure_grad();
        std::vector<double> sym(n * n);
        for (std::size_t b = 0; b < batch; ++b) {
          const double* g = self.grad.data() + b * n * n * m_count;
          const double* pb = in_node.data.data() + b * n * wp;
          double* gb = gp.data() + b * n * wp;
          for (std::size_t m = 0; m < m_count; ++m) {
            for (std::size_t i = 0; i < n; ++i) {
              for (std::size_t j = 0; j < n; ++j) {
                sym[i * n + j] = g[(i * n + j) * m_count + m] + g[(j * n + i) * m_count + m];
              }
            }
            for (std::size_t i = 0; i < n; ++i) {
              for (std::size_t j = 0; j < n; ++j) {
                const double sij = sym[i * n + j];
                if (sij == 0.0) continue;
                for (std::size_t k = 0; k < window; ++k) {
                  gb[i * wp + m + k] += sij * pb[j * wp + m + k];
                }
              }
            }
          }
        }
      });
}

Tensor feature_block(const Tensor& features, std::size_t d) {
  if (features.rank() < 3) {
    throw ShapeError("feature_block: expected [...xNxW_pxD], got " +
                     shape_to_string(features.shape()));
  }
  Shape shape(features.shape().begin(), features.shape().end() - 1);
  return ops::reshape(ops::slice(features, features.rank() - 1, d, 1), std::move(shape));
}

Tensor SpdFeatureTensor::block(std::size_t d) const {
  Shape shape(values.shape().begin(), values.shape().end() - 1);
  return ops::reshape(ops::slice(values, values.rank() - 1, d, 1), std::move(shape));
}

SpdFeatureTensor build_spd_tensor(const Tensor& features, const ScsConfig& cfg) {
  const std::size_t window = cross_window_length(cfg);
  const std::size_t blocks = features.shape().back();
  std::vector<Tensor> parts;
  parts.reserve(blocks);
  for (std::size_t d = 0; d < blocks; ++d) {
    Tensor u = window_covariance(feature_block(features, d), window, cfg.spd_jitter);
    Shape shape = u.shape();
    shape.push_back(1);
    parts.push_back(ops::reshape(u, std::move(shape)));
  }
  const std::size_t axis = parts.front().rank() - 1;
  return {ops::concat(parts, axis), cfg.spd_jitter};
}

}  // namespace hsmgnn::scs
