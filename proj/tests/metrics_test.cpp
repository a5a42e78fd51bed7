#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "hsmgnn/error.hpp"
#include "hsmgnn/metrics.hpp"
#include "hsmgnn/random.hpp"

namespace hsmgnn {
namespace {

TEST(Metrics, RegressionAnchors) {
  const std::vector<double> t{3, 3};
  const auto zero = metrics::regression(t, t);
  EXPECT_EQ(zero.mae, 0.0);
  EXPECT_EQ(zero.mse, 0.0);
  EXPECT_EQ(zero.rmse, 0.0);
  const auto m = metrics::regression(std::vector<double>{0, 0}, t);
  EXPECT_EQ(m.mse, 9.0);
  EXPECT_EQ(m.rmse, 3.0);
  EXPECT_EQ(m.mae, 3.0);
  EXPECT_THROW(metrics::regression(std::vector<double>{1}, t), ContractError);
}

TEST(Metrics, RmseSquaredEqualsMse) {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> p(37), t(37);
    for (auto& v : p) v = rng.uniform(-100, 100);
    for (auto& v : t) v = rng.uniform(-100, 100);
    const auto m = metrics::regression(p, t);
    EXPECT_NEAR(m.rmse * m.rmse, m.mse, 1e-12 * std::max(1.0, m.mse));
  }
}

// F1 per class from an explicit confusion matrix.
double brute_macro_f1(const std::vector<int>& pred, const std::vector<int>& truth) {
  std::set<int> classes(pred.begin(), pred.end());
  classes.insert(truth.begin(), truth.end());
  std::map<std::pair<int, int>, int> confusion;
  for (std::size_t i = 0; i < pred.size(); ++i) ++confusion[{truth[i], pred[i]}];
  double total = 0.0;
  for (int c : classes) {
    double tp = confusion[{c, c}], row = 0, col = 0;
    for (int k : classes) {
      row += confusion[{c, k}];
      col += confusion[{k, c}];
    }
    const double precision = col > 0 ? tp / col : 0.0;
    const double recall = row > 0 ? tp / row : 0.0;
    total += precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
  }
  return total / static_cast<double>(classes.size());
}

TEST(Metrics, ThreeClassMacroF1MatchesConfusionMatrix) {
  const std::vector<int> truth{0, 0, 0, 1, 1, 2, 2, 2, 2};
  const std::vector<int> pred{0, 1, 0, 1, 2, 2, 2, 0, 2};
  const auto m = metrics::classification(pred, truth);
  // Class 0: P 2/3, R 2/3 -> 2/3. Class 1: P 1/2, R 1/2 -> 1/2. Class 2: P 3/4, R 3/4 -> 3/4.
  EXPECT_NEAR(m.macro_f1, (2.0 / 3.0 + 0.5 + 0.75) / 3.0, 1e-15);
  EXPECT_NEAR(m.accuracy, 6.0 / 9.0, 1e-15);
  EXPECT_NEAR(m.macro_f1, brute_macro_f1(pred, truth), 1e-15);
}

TEST(Metrics, RandomConfusionMatricesAgreeWithBruteForce) {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int> p(20), t(20);
    for (auto& v : p) v = static_cast<int>(rng.below(4));
    for (auto& v : t) v = static_cast<int>(rng.below(4));
    const auto m = metrics::classification(p, t);
    EXPECT_NEAR(m.macro_f1, brute_macro_f1(p, t), 1e-14);
    EXPECT_GE(m.accuracy, 0.0);
    EXPECT_LE(m.accuracy, 1.0);
    EXPECT_GE(m.macro_f1, 0.0);
    EXPECT_LE(m.macro_f1, 1.0);
  }
}

TEST(Metrics, ReportSerialization) {
  metrics::MetricsReport r;
  r.regression = metrics::regression(std::vector<double>{0, 0}, std::vector<double>{3, 3});
  r.samples = 2;
  r.curve = {{1, 4.0, 3.5}, {2, 2.0, 3.0}};
  r.best_epoch = 2;
  const auto j = nlohmann::json::parse(metrics::to_json(r));
  EXPECT_EQ(j["rmse"].get<double>(), 3.0);
  EXPECT_EQ(j["curve"].size(), 2u);
  const std::string csv = metrics::to_csv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,train_loss,valid_metric,mae,mse,rmse");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

}  // namespace
}  // namespace hsmgnn
