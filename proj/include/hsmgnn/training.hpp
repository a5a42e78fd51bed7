#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hsmgnn/data.hpp"
#include "hsmgnn/metrics.hpp"
#include "hsmgnn/model.hpp"

namespace hsmgnn::training {

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t epochs = 80;
  double learning_rate = 1e-4;
  std::size_t patience = 10;
  std::uint64_t seed = 0;
  double valid_fraction = 0.1;
  std::size_t max_steps = 0;  // 0: no cap

  void validate() const;
};

/// Copies the input geometry and task of `data` into `base`.
ModelConfig fit_to_data(ModelConfig base, const data::SampleSet& data);

/// [BxNxTxC] batch of the selected windows.
Tensor make_batch(const data::SampleSet& set, std::span<const std::size_t> indices);

/// Raw model outputs, one row of output_width() per sample, in sample order.
std::vector<double> predict(const HsmgnnModel& model, const data::SampleSet& set,
                            std::size_t batch_size = 256);

/// Metrics over the whole set; no gradients are recorded.
metrics::MetricsReport evaluate(const HsmgnnModel& model, const data::SampleSet& set,
                                std::size_t batch_size = 256);

using EpochCallback = std::function<void(const metrics::EpochRecord&)>;

/// Trains in place with Adam and seeded per-epoch shuffling. The monitored
/// metric is validation RMSE (regression) or accuracy (classification); with
/// an empty `valid` set it is the epoch's mean training loss. Training stops
/// after `patience` epochs without strict improvement, after `epochs`, or
/// once `max_steps` optimizer steps have run. The best-monitored parameters
/// are restored before returning. The returned report carries the curve and
/// the metrics of the restored model on `valid` (or `train` if `valid` is
/// empty).
metrics::MetricsReport train(HsmgnnModel& model, const TrainConfig& cfg, const data::SampleSet& train,
                             const data::SampleSet& valid, const EpochCallback& on_epoch = {});

struct RunResult {
  ModelConfig model;
  std::uint64_t seed = 0;
  metrics::MetricsReport valid;
  std::optional<metrics::MetricsReport> test;
  ParameterSet parameters;
};

/// Carves a validation split from `data` (whole groups when group ids are
/// present), trains a fresh model seeded with cfg.seed and evaluates the
/// restored model on `test` when given.
RunResult run_experiment(const ModelConfig& model_cfg, const TrainConfig& cfg,
                         const data::SampleSet& data, const data::SampleSet* test,
                         const EpochCallback& on_epoch = {});

// ---------------------------------------------------------------------------
// Ablation and sensitivity sweeps

struct StudyRow {
  std::string param;  // "variant" for ablations
  std::string value;
  RunResult result;
};

/// One run per (variant, seed), collated in argument order. `jobs` > 1 runs
/// them on worker threads; results do not depend on it.
std::vector<StudyRow> run_ablation(std::span<const Variant> variants, std::span<const std::uint64_t> seeds,
                                   const ModelConfig& base, const TrainConfig& cfg,
                                   const data::SampleSet& data, const data::SampleSet* test,
                                   std::size_t jobs = 1);

enum class SweepParam { kDelta, kMd, kMq, kFusionWeights, kMdMq };

std::string_view sweep_param_name(SweepParam p);
/// "delta", "m_d", "m_q", "fusion_weights" or "m_d_m_q".
SweepParam parse_sweep_param(std::string_view name);

struct SweepPoint {
  std::string value;
  ModelConfig model;
};

/// Parses and validates every value before anything is trained. Pairs are
/// written "a:b" (w_s:w_e for fusion_weights, M_d:M_q for m_d_m_q).
std::vector<SweepPoint> sweep_points(SweepParam param, std::span<const std::string> values,
                                     const ModelConfig& base);

std::vector<StudyRow> run_sweep(SweepParam param, std::span<const SweepPoint> points,
                                const TrainConfig& cfg, const data::SampleSet& data,
                                const data::SampleSet* test, std::size_t jobs = 1);

/// One row per study run: param, value, seed, then validation and (if any)
/// test metrics.
std::string study_csv(std::span<const StudyRow> rows);
std::string study_json(std::span<const StudyRow> rows);

}  // namespace hsmgnn::training
