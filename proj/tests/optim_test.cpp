#include "stv/optim.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace stv {
namespace {

TEST(AdamTest, ZeroGradientLeavesParameters) {
  ParamMap<double> p{{"w", Tensor<double>(Shape{3}, {1.0, -2.0, 0.5})}};
  const auto before = p.at("w").values();
  AdamState<double> s;
  adam_step(p, ParamMap<double>{{"w", Tensor<double>(Shape{3}, {0.3, -0.1, 0.2})}}, s, 1e-3);
  const auto m1 = s.m.at("w").values();
  const auto after_first = p.at("w").values();
  adam_step(p, ParamMap<double>{{"w", Tensor<double>(Shape{3})}}, s, 1e-3);
  const auto v = s.m.at("w").values();
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_DOUBLE_EQ(v[i], kAdamBeta1 * m1[i]);
    EXPECT_LT(std::abs(v[i]), std::abs(m1[i]));
  }
  (void)before;
  (void)after_first;

  ParamMap<double> q{{"w", Tensor<double>(Shape{2}, {1.0, 2.0})}};
  AdamState<double> fresh;
  adam_step(q, ParamMap<double>{{"w", Tensor<double>(Shape{2})}}, fresh, 1e-3);
  EXPECT_EQ(q.at("w").values(), (std::vector<double>{1.0, 2.0}));
  adam_step(q, ParamMap<double>{}, fresh, 1e-3);  // missing grads act as zero
  EXPECT_EQ(q.at("w").values(), (std::vector<double>{1.0, 2.0}));
}

TEST(AdamTest, FirstStepByHand) {
  const double lr = 1e-3;
  const std::vector<double> g{0.5, -4.0, 1e-3};
  ParamMap<double> p{{"w", Tensor<double>(Shape{3})}};
  AdamState<double> s;
  adam_step(p, ParamMap<double>{{"w", Tensor<double>(Shape{3}, g)}}, s, lr);
  EXPECT_EQ(s.step, 1u);
  for (std::size_t i = 0; i < 3; ++i) {
    const double m = (1 - kAdamBeta1) * g[i], v = (1 - kAdamBeta2) * g[i] * g[i];
    const double mhat = m / (1 - kAdamBeta1), vhat = v / (1 - kAdamBeta2);
    const double expect = -lr * mhat / (std::sqrt(vhat) + kAdamEpsilon);
    EXPECT_NEAR(p.at("w")[i], expect, 1e-15);
    EXPECT_NEAR(std::abs(p.at("w")[i]), lr, 1e-7 * lr / std::abs(g[i]) + 1e-12);
  }
}

TEST(AdamTest, ConstantGradientMovesMonotonically) {
  ParamMap<double> p{{"w", Tensor<double>(Shape{2}, {0.0, 0.0})}};
  AdamState<double> s;
  const ParamMap<double> g{{"w", Tensor<double>(Shape{2}, {2.0, -0.5})}};
  double prev0 = 0, prev1 = 0;
  for (int k = 0; k < 100; ++k) {
    adam_step(p, g, s, 1e-2);
    EXPECT_LT(p.at("w")[0], prev0);
    EXPECT_GT(p.at("w")[1], prev1);
    prev0 = p.at("w")[0];
    prev1 = p.at("w")[1];
  }
  EXPECT_EQ(s.step, 100u);
}

TEST(AdamTest, ShapeMismatch) {
  ParamMap<float> p{{"w", Tensor<float>(Shape{2})}};
  AdamState<float> s;
  EXPECT_THROW(adam_step(p, ParamMap<float>{{"w", Tensor<float>(Shape{3})}}, s, 1e-3), Error);
  EXPECT_THROW(adam_step(p, ParamMap<float>{{"other", Tensor<float>(Shape{2})}}, s, 1e-3), Error);
}

TEST(ScheduleTest, StepDecay) {
  Schedule s;
  EXPECT_DOUBLE_EQ(lr_schedule(s, 0), 1e-4);
  EXPECT_DOUBLE_EQ(lr_schedule(s, 29), 1e-4);
  EXPECT_NEAR(lr_schedule(s, 30), 1e-5, 1e-20);
  EXPECT_NEAR(lr_schedule(s, 59), 1e-5, 1e-20);
  EXPECT_NEAR(lr_schedule(s, 60), 1e-6, 1e-21);
  EXPECT_THROW(lr_schedule(s, -1), Error);
  Schedule flat{3e-3, 10, 1.0};
  EXPECT_DOUBLE_EQ(lr_schedule(flat, 95), 3e-3);
}

}  // namespace
}  // namespace stv
