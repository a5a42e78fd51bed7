#include <gtest/gtest.h>

#include <Eigen/Dense>

#include "hsmgnn/error.hpp"
#include "hsmgnn/ops.hpp"
#include "hsmgnn/scs.hpp"
#include "support.hpp"

namespace hsmgnn {
namespace {

using testing::gradient_check;
using testing::random_tensor;

TEST(Scs, WindowArithmetic) {
  scs::ScsConfig cfg;
  cfg.patch_length = 4;
  cfg.delta = 0.5;
  EXPECT_EQ(scs::cross_window_length(cfg), 2u);
  EXPECT_EQ(scs::window_count(cfg), 3u);
  cfg.patch_length = 10;
  cfg.delta = 0.3;
  EXPECT_EQ(scs::cross_window_length(cfg), 3u);
  EXPECT_EQ(scs::window_count(cfg), 8u);
  cfg.delta = 0.01;  // rounds to zero, clamped to one step
  EXPECT_EQ(scs::cross_window_length(cfg), 1u);
  EXPECT_EQ(scs::block_count(cfg, 35), 3u);
}

TEST(Scs, ValidateRejectsBadConfigs) {
  scs::ScsConfig cfg;
  EXPECT_NO_THROW(scs::validate(cfg, 30));
  EXPECT_THROW(scs::validate(cfg, 9), ConfigError);
  cfg.delta = 1.0;
  EXPECT_THROW(scs::validate(cfg, 30), ConfigError);
  cfg.delta = 0.0;
  EXPECT_THROW(scs::validate(cfg, 30), ConfigError);
  cfg = {};
  cfg.kernel_size = 4;
  EXPECT_THROW(scs::validate(cfg, 30), ConfigError);
}

TEST(Scs, BlockPartitionLayout) {
  Rng rng(1);
  const Tensor x = random_tensor({2, 3, 9, 2}, rng);  // B N T C
  scs::ScsConfig cfg;
  cfg.patch_length = 4;
  const Tensor blocks = scs::block_partition(x, cfg);
  ASSERT_EQ(blocks.shape(), (Shape{2, 6, 4, 2}));
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t n = 0; n < 3; ++n)
      for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t t = 0; t < 4; ++t)
          for (std::size_t l = 0; l < 2; ++l)
            EXPECT_EQ(blocks.at({b, n * 2 + c, t, l}), x.at({b, n, l * 4 + t, c}));
  EXPECT_THROW(scs::block_partition(random_tensor({3, 9}, rng), cfg), ShapeError);
}

TEST(Scs, WindowCovarianceMatchesSumOfOuterProducts) {
  Rng rng(2);
  Tensor p = random_tensor({2, 3, 5}, rng, -1, 1, true);
  const Tensor u = scs::window_covariance(p, 2, 1e-6);
  ASSERT_EQ(u.shape(), (Shape{2, 3, 3, 4}));
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j)
        for (std::size_t m = 0; m < 4; ++m) {
          double s = i == j ? 1e-6 : 0.0;
          for (std::size_t k = 0; k < 2; ++k) s += p.at({b, i, m + k}) * p.at({b, j, m + k});
          EXPECT_NEAR(u.at({b, i, j, m}), s, 1e-15);
        }
  Tensor w = random_tensor({2, 3, 3, 4}, rng);
  EXPECT_LT(gradient_check({p}, [&] { return ops::sum(ops::mul(scs::window_covariance(p, 2, 1e-6), w)); }),
            1e-7);
  EXPECT_THROW(scs::window_covariance(p, 6, 0.0), ConfigError);
}

class SpdProperty : public ::testing::TestWithParam<int> {};

TEST_P(SpdProperty, SlicesAreSymmetricPositiveDefinite) {
  Rng rng(100 + GetParam());
  scs::ScsConfig cfg;
  cfg.patch_length = 6;
  cfg.delta = 0.1 * static_cast<double>(1 + GetParam() % 9);
  cfg.feature_blocks = 2;
  const std::size_t n = 2 + static_cast<std::size_t>(GetParam()) % 6;
  // Features with rank-deficient windows (more sensors than window steps).
  const Tensor features = random_tensor({n, cfg.patch_length, cfg.feature_blocks}, rng, 0.0, 2.0);
  const auto spd = scs::build_spd_tensor(features, cfg);
  const std::size_t m_count = scs::window_count(cfg);
  for (std::size_t d = 0; d < cfg.feature_blocks; ++d) {
    for (std::size_t m = 0; m < m_count; ++m) {
      Eigen::MatrixXd u(n, n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) u(i, j) = spd.values.at({i, j, m, d});
      EXPECT_EQ(u, u.transpose());
      const double lambda_min = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(u).eigenvalues().minCoeff();
      EXPECT_GE(lambda_min, cfg.spd_jitter - 1e-9);
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Random, SpdProperty, ::testing::Range(0, 12));

TEST(Scs, TemporalCnnShapesAndGradients) {
  Rng rng(5);
  Tensor blocks = random_tensor({2, 3, 4, 2}, rng, -1, 1, true);  // B N W_p L
  scs::TemporalCnnWeights w{random_tensor({5, 2, 3}, rng, -1, 1, true), random_tensor({5}, rng, -1, 1, true),
                            random_tensor({2, 5, 3}, rng, -1, 1, true), random_tensor({2}, rng, -1, 1, true)};
  const Tensor p = scs::temporal_cnn(blocks, w);
  ASSERT_EQ(p.shape(), (Shape{2, 3, 4, 2}));
  for (double v : p.data()) EXPECT_GE(v, 0.0);
  Tensor probe = random_tensor({2, 3, 4, 2}, rng);
  EXPECT_LT(gradient_check({blocks, w.conv1_weight, w.conv1_bias, w.conv2_weight, w.conv2_bias},
                           [&] { return ops::sum(ops::mul(scs::temporal_cnn(blocks, w), probe)); }),
            1e-6);
}

TEST(Scs, FeatureBlockSelectsLastAxis) {
  Rng rng(6);
  const Tensor p = random_tensor({3, 4, 2}, rng);
  const Tensor p1 = scs::feature_block(p, 1);
  ASSERT_EQ(p1.shape(), (Shape{3, 4}));
  EXPECT_EQ(p1.at({2, 3}), p.at({2, 3, 1}));
}

}  // namespace
}  // namespace hsmgnn
