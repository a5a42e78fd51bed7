#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hsmgnn/task.hpp"

namespace hsmgnn::metrics {

struct RegressionMetrics {
  double mae = 0.0;
  double mse = 0.0;
  double rmse = 0.0;
};

struct ClassificationMetrics {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

/// Sums in index order, so the result does not depend on how predictions
/// were batched.
RegressionMetrics regression(std::span<const double> predictions, std::span<const double> targets);

/// Macro F1 averages per-class F1 over every class that occurs in either
/// the targets or the predictions; a class with no true or predicted
/// members cannot contribute.
ClassificationMetrics classification(std::span<const int> predictions, std::span<const int> targets);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double valid_metric = 0.0;  // RMSE (regression) or accuracy (classification)
};

struct MetricsReport {
  Task task = Task::kRegression;
  std::size_t samples = 0;
  RegressionMetrics regression;
  ClassificationMetrics classification;
  std::vector<EpochRecord> curve;
  std::size_t best_epoch = 0;
  std::size_t steps = 0;
  double wall_clock_seconds = 0.0;
};

/// The headline scalar: RMSE for regression, accuracy for classification.
double headline(const MetricsReport& report);

std::string to_json(const MetricsReport& report);
/// Header plus one row per epoch, or a single summary row when the curve is
/// empty.
std::string to_csv(const MetricsReport& report);

}  // namespace hsmgnn::metrics
