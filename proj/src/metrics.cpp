#include "hsmgnn/metrics.hpp"

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hsmgnn/error.hpp"

namespace hsmgnn::metrics {

RegressionMetrics regression(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.size() != targets.size()) {
    throw ContractError("regression metrics: " + std::to_string(predictions.size()) +
                        " predictions for " + std::to_string(targets.size()) + " targets");
  }
  if (targets.empty()) throw ContractError("regression metrics: empty set");
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double e = predictions[i] - targets[i];
    abs_sum += std::abs(e);
    sq_sum += e * e;
  }
  const double n = static_cast<double>(targets.size());
  RegressionMetrics m;
  m.mae = abs_sum / n;
  m.mse = sq_sum / n;
  m.rmse = std::sqrt(m.mse);
  return m;
}

ClassificationMetrics classification(std::span<const int> predictions, std::span<const int> targets) {
  if (predictions.size() != targets.size()) {
    throw ContractError("classification metrics: size mismatch");
  }
  if (targets.empty()) throw ContractError("classification metrics: empty set");
  std::map<int, std::size_t> tp, fp, fn;
  std::set<int> classes;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    classes.insert(targets[i]);
    classes.insert(predictions[i]);
    if (predictions[i] == targets[i]) {
      ++correct;
      ++tp[targets[i]];
    } else {
      ++fp[predictions[i]];
      ++fn[targets[i]];
    }
  }
  double f1_sum = 0.0;
  for (int c : classes) {
    const double t = static_cast<double>(tp[c]);
    const double denom = 2.0 * t + static_cast<double>(fp[c]) + static_cast<double>(fn[c]);
    f1_sum += denom > 0.0 ? 2.0 * t / denom : 0.0;
  }
  ClassificationMetrics m;
  m.accuracy = static_cast<double>(correct) / static_cast<double>(targets.size());
  m.macro_f1 = f1_sum / static_cast<double>(classes.size());
  return m;
}

double headline(const MetricsReport& report) {
  return report.task == Task::kRegression ? report.regression.rmse : report.classification.accuracy;
}

std::string to_json(const MetricsReport& report) {
  nlohmann::ordered_json j;
  j["task"] = std::string(task_name(report.task));
  j["samples"] = report.samples;
  if (report.task == Task::kRegression) {
    j["mae"] = report.regression.mae;
    j["mse"] = report.regression.mse;
    j["rmse"] = report.regression.rmse;
  } else {
    j["accuracy"] = report.classification.accuracy;
    j["macro_f1"] = report.classification.macro_f1;
  }
  j["best_epoch"] = report.best_epoch;
  j["steps"] = report.steps;
  j["wall_clock_seconds"] = report.wall_clock_seconds;
  auto curve = nlohmann::ordered_json::array();
  for (const auto& e : report.curve) {
    curve.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"valid_metric", e.valid_metric}});
  }
  j["curve"] = std::move(curve);
  return j.dump(2) + "\n";
}

std::string to_csv(const MetricsReport& report) {
  std::ostringstream out;
  out.precision(17);
  const bool reg = report.task == Task::kRegression;
  out << "epoch,train_loss,valid_metric," << (reg ? "mae,mse,rmse" : "accuracy,macro_f1") << '\n';
  const auto tail = [&] {
    if (reg) {
      out << report.regression.mae << ',' << report.regression.mse << ',' << report.regression.rmse;
    } else {
      out << report.classification.accuracy << ',' << report.classification.macro_f1;
    }
    out << '\n';
  };
  if (report.curve.empty()) {
    out << "0,,,";
    tail();
  }
  for (std::size_t i = 0; i < report.curve.size(); ++i) {
    const auto& e = report.curve[i];
    out << e.epoch << ',' << e.train_loss << ',' << e.valid_metric << ',';
    // Final test metrics only on the last row; earlier rows leave them blank.
    if (i + 1 == report.curve.size()) {
      tail();
    } else {
      out << (reg ? ",,\n" : ",\n");
    }
  }
  return out.str();
}

}  // namespace hsmgnn::metrics
