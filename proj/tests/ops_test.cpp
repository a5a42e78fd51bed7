#include <gtest/gtest.h>

#include <cmath>

#include "hsmgnn/error.hpp"
#include "hsmgnn/kernels.hpp"
#include "hsmgnn/ops.hpp"
#include "support.hpp"

namespace hsmgnn {
namespace {

using testing::gradient_check;
using testing::random_tensor;

constexpr double kGradTol = 1e-6;

// Runs a test body once per kernel table so both variants see the op suite.
class OpsTest : public ::testing::TestWithParam<const kernels::KernelTable*> {
 protected:
  void SetUp() override {
    if (GetParam() == nullptr) GTEST_SKIP() << "no AVX2 variant";
    saved_ = &kernels::active();
    kernels::set_active(*GetParam());
  }
  void TearDown() override {
    if (saved_ != nullptr) kernels::set_active(*saved_);
  }
  const kernels::KernelTable* saved_ = nullptr;
  Rng rng_{7};
};

INSTANTIATE_TEST_SUITE_P(Kernels, OpsTest,
                         ::testing::Values(&kernels::scalar_table(), kernels::avx2_table()),
                         [](const auto& info) {
                           return info.param == nullptr ? std::string("avx2")
                                                        : std::string(info.param->name);
                         });

TEST_P(OpsTest, MatmulMatchesTripleLoop) {
  const Tensor a = random_tensor({2, 3, 4}, rng_);
  const Tensor b = random_tensor({2, 4, 5}, rng_);
  const Tensor c = ops::matmul(a, b);
  ASSERT_EQ(c.shape(), (Shape{2, 3, 5}));
  for (std::size_t z = 0; z < 2; ++z) {
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 5; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < 4; ++k) s += a.at({z, i, k}) * b.at({z, k, j});
        EXPECT_NEAR(c.at({z, i, j}), s, 1e-13);
      }
    }
  }
}

TEST_P(OpsTest, MatmulBroadcastsBatch) {
  const Tensor a = random_tensor({3, 2, 4}, rng_);
  const Tensor b = random_tensor({4, 2}, rng_);
  const Tensor c = ops::matmul(a, b);
  ASSERT_EQ(c.shape(), (Shape{3, 2, 2}));
  for (std::size_t z = 0; z < 3; ++z) {
    double s = 0.0;
    for (std::size_t k = 0; k < 4; ++k) s += a.at({z, 1, k}) * b.at({k, 0});
    EXPECT_NEAR(c.at({z, 1, 0}), s, 1e-13);
  }
  EXPECT_THROW(ops::matmul(a, random_tensor({3, 2}, rng_)), ShapeError);
}

TEST_P(OpsTest, MatmulGradients) {
  Tensor a = random_tensor({2, 3, 4}, rng_, -1, 1, true);
  Tensor b = random_tensor({4, 5}, rng_, -1, 1, true);
  EXPECT_LT(gradient_check({a, b}, [&] { return ops::sum(ops::mul(ops::matmul(a, b), ops::matmul(a, b))); }),
            kGradTol);
}

TEST_P(OpsTest, GramIsExactlySymmetric) {
  Tensor x = random_tensor({3, 7, 13}, rng_, -1, 1, true);
  const Tensor g = ops::gram(x);
  for (std::size_t z = 0; z < 3; ++z) {
    for (std::size_t i = 0; i < 7; ++i) {
      for (std::size_t j = 0; j < 7; ++j) {
        EXPECT_EQ(g.at({z, i, j}), g.at({z, j, i}));
        double s = 0.0;
        for (std::size_t k = 0; k < 13; ++k) s += x.at({z, i, k}) * x.at({z, j, k});
        EXPECT_NEAR(g.at({z, i, j}), s, 1e-12);
      }
    }
  }
  Tensor w = random_tensor({3, 7, 7}, rng_);
  EXPECT_LT(gradient_check({x}, [&] { return ops::sum(ops::mul(ops::gram(x), w)); }), kGradTol);
}

TEST_P(OpsTest, Conv1dMatchesDirectSum) {
  Tensor x = random_tensor({2, 3, 6}, rng_, -1, 1, true);
  Tensor w = random_tensor({4, 3, 3}, rng_, -1, 1, true);
  Tensor bias = random_tensor({4}, rng_, -1, 1, true);
  const Tensor y = ops::conv1d(x, w, bias);
  ASSERT_EQ(y.shape(), (Shape{2, 4, 6}));
  for (std::size_t b = 0; b < 2; ++b) {
    for (std::size_t o = 0; o < 4; ++o) {
      for (std::size_t t = 0; t < 6; ++t) {
        double s = bias.at({o});
        for (std::size_t c = 0; c < 3; ++c) {
          for (std::size_t k = 0; k < 3; ++k) {
            const long src = static_cast<long>(t) + static_cast<long>(k) - 1;
            if (src >= 0 && src < 6) s += w.at({o, c, k}) * x.at({b, c, static_cast<std::size_t>(src)});
          }
        }
        EXPECT_NEAR(y.at({b, o, t}), s, 1e-13);
      }
    }
  }
  Tensor probe = random_tensor({2, 4, 6}, rng_);
  EXPECT_LT(gradient_check({x, w, bias}, [&] { return ops::sum(ops::mul(ops::conv1d(x, w, bias), probe)); }),
            kGradTol);
  EXPECT_THROW(ops::conv1d(x, random_tensor({4, 3, 2}, rng_)), ConfigError);
  EXPECT_THROW(ops::conv1d(x, random_tensor({4, 2, 3}, rng_)), ShapeError);
}

TEST_P(OpsTest, ElementwiseBroadcastGradients) {
  Tensor a = random_tensor({2, 3, 4}, rng_, -1, 1, true);
  Tensor b = random_tensor({3, 4}, rng_, -1, 1, true);
  Tensor c = random_tensor({2, 1, 4}, rng_, -1, 1, true);
  EXPECT_LT(gradient_check({a, b, c}, [&] {
              return ops::sum(ops::mul(ops::sub(ops::add(a, b), c), ops::mul(a, c)));
            }),
            kGradTol);
  const Tensor s = ops::add(a, c);
  EXPECT_DOUBLE_EQ(s.at({1, 2, 3}), a.at({1, 2, 3}) + c.at({1, 0, 3}));
  EXPECT_THROW(ops::add(a, random_tensor({3, 3}, rng_)), ShapeError);
}

TEST_P(OpsTest, NonlinearitiesAndGradients) {
  Tensor x = random_tensor({4, 5}, rng_, -2, 2, true);
  const Tensor r = ops::relu(x);
  const Tensor s = ops::sigmoid(x);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      EXPECT_EQ(r.at({i, j}), std::max(0.0, x.at({i, j})));
      EXPECT_NEAR(s.at({i, j}), 1.0 / (1.0 + std::exp(-x.at({i, j}))), 1e-15);
    }
  }
  Tensor w = random_tensor({4, 5}, rng_);
  EXPECT_LT(gradient_check({x}, [&] { return ops::sum(ops::mul(ops::relu(x), w)); }), kGradTol);
  EXPECT_LT(gradient_check({x}, [&] { return ops::sum(ops::mul(ops::sigmoid(x), w)); }), kGradTol);
}

TEST_P(OpsTest, SoftmaxRowsSumToOneAndIsStable) {
  Tensor x = Tensor::from_data({2, 3}, {1000.0, 1001.0, 1002.0, -5.0, 0.0, 5.0}, true);
  const Tensor p = ops::softmax_rows(x);
  for (std::size_t i = 0; i < 2; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < 3; ++j) row += p.at({i, j});
    EXPECT_NEAR(row, 1.0, 1e-15);
  }
  const double e0 = std::exp(-2.0), e1 = std::exp(-1.0);
  EXPECT_NEAR(p.at({0, 2}), 1.0 / (1.0 + e0 + e1), 1e-15);
  Tensor y = random_tensor({3, 4}, rng_, -1, 1, true);
  Tensor w = random_tensor({3, 4}, rng_);
  EXPECT_LT(gradient_check({y}, [&] { return ops::sum(ops::mul(ops::softmax_rows(y), w)); }), kGradTol);
}

TEST_P(OpsTest, ShapeOpsRoundTripAndGradients) {
  Tensor x = random_tensor({2, 3, 4}, rng_, -1, 1, true);
  const Tensor p = ops::permute(x, {2, 0, 1});
  ASSERT_EQ(p.shape(), (Shape{4, 2, 3}));
  EXPECT_EQ(p.at({3, 1, 2}), x.at({1, 2, 3}));
  const Tensor t = ops::transpose(x);
  EXPECT_EQ(t.at({1, 3, 2}), x.at({1, 2, 3}));
  const Tensor cat = ops::concat({x, ops::scale(x, 2.0)}, 1);
  ASSERT_EQ(cat.shape(), (Shape{2, 6, 4}));
  EXPECT_EQ(cat.at({1, 4, 3}), 2.0 * x.at({1, 1, 3}));
  const Tensor sl = ops::slice(x, 2, 1, 2);
  ASSERT_EQ(sl.shape(), (Shape{2, 3, 2}));
  EXPECT_EQ(sl.at({1, 2, 1}), x.at({1, 2, 2}));
  const Tensor sum1 = ops::sum_axis(x, 1, true);
  ASSERT_EQ(sum1.shape(), (Shape{2, 1, 4}));
  EXPECT_NEAR(sum1.at({1, 0, 2}), x.at({1, 0, 2}) + x.at({1, 1, 2}) + x.at({1, 2, 2}), 1e-15);
  EXPECT_THROW(ops::reshape(x, {5, 5}), ShapeError);

  Tensor w = random_tensor({4, 3, 2}, rng_);
  Tensor w2 = random_tensor({2, 3}, rng_);
  EXPECT_LT(gradient_check({x}, [&] {
              const Tensor a = ops::mul(ops::permute(x, {2, 1, 0}), w);
              const Tensor b = ops::reshape(ops::transpose(ops::slice(x, 2, 1, 2)), {2, 6});
              return ops::add(ops::add(ops::sum(a), ops::sum(ops::mul(b, b))),
                              ops::sum(ops::mul(ops::sum_axis(x, 2), w2)));
            }),
            kGradTol);
}

TEST_P(OpsTest, ConcatGradients) {
  Tensor a = random_tensor({2, 3}, rng_, -1, 1, true);
  Tensor b = random_tensor({2, 2}, rng_, -1, 1, true);
  Tensor w = random_tensor({2, 5}, rng_);
  EXPECT_LT(gradient_check({a, b}, [&] { return ops::sum(ops::mul(ops::concat({a, b}, 1), w)); }), kGradTol);
  EXPECT_THROW(ops::concat({a, random_tensor({3, 3}, rng_)}, 1), ShapeError);
}

TEST_P(OpsTest, LossesMatchFormulas) {
  Tensor pred = Tensor::from_data({2, 1}, {0.0, 0.0}, true);
  const Tensor target = Tensor::from_data({2, 1}, {3.0, 3.0});
  EXPECT_DOUBLE_EQ(ops::mse_loss(pred, target).item(), 9.0);

  Tensor logits = random_tensor({4, 3}, rng_, -2, 2, true);
  const std::vector<int> labels{0, 2, 1, 2};
  double expected = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    double z = 0.0;
    for (std::size_t k = 0; k < 3; ++k) z += std::exp(logits.at({i, k}));
    expected += std::log(z) - logits.at({i, static_cast<std::size_t>(labels[i])});
  }
  EXPECT_NEAR(ops::cross_entropy(logits, labels).item(), expected / 4.0, 1e-14);
  EXPECT_LT(gradient_check({logits}, [&] { return ops::cross_entropy(logits, labels); }), kGradTol);

  Tensor p = random_tensor({5, 1}, rng_, -1, 1, true);
  const Tensor t = random_tensor({5, 1}, rng_);
  EXPECT_LT(gradient_check({p}, [&] { return ops::mse_loss(p, t); }), kGradTol);
  EXPECT_THROW(ops::mse_loss(p, random_tensor({4, 1}, rng_)), ShapeError);
}

}  // namespace
}  // namespace hsmgnn
