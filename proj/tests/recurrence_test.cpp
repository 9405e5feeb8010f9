#include "stv/recurrence.hpp"

#include <gtest/gtest.h>

#include <random>

#include "stv/worker_pool.hpp"
#include "test_util.hpp"

namespace stv {
namespace {

using testing::random_tensor;

// Direct loop in plain vectors, written independently of the library kernel.
std::vector<std::vector<double>> direct_loop(const Tensor<double>& a, const Tensor<double>& b, const Tensor<double>& h0) {
  const std::size_t T = a.dim(0), N = a.dim(1);
  std::vector<double> h(h0.values());
  std::vector<std::vector<double>> out;
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < N; ++i) h[i] = a.at({t, i}) * h[i] + b.at({t, i});
    out.push_back(h);
  }
  return out;
}

// Closed form h_t = Π_{r<=t} a_r · h0 + Σ_s (Π_{s<r<=t} a_r) b_s.
double closed_form(const Tensor<double>& a, const Tensor<double>& b, const Tensor<double>& h0, std::size_t t,
                   std::size_t i) {
  double total = h0[i];
  for (std::size_t r = 0; r <= t; ++r) total *= a.at({r, i});
  for (std::size_t s = 0; s <= t; ++s) {
    double term = b.at({s, i});
    for (std::size_t r = s + 1; r <= t; ++r) term *= a.at({r, i});
    total += term;
  }
  return total;
}

TEST(RecurrenceTest, MemorylessLimit) {
  std::mt19937_64 rng(1);
  auto input = random_tensor({6, 3}, rng);
  auto h = linear_recurrence_sequential(Tensor<double>(Shape{6, 3}, 0.0), input, random_tensor({3}, rng));
  EXPECT_EQ(h.values(), input.values());
}

TEST(RecurrenceTest, IntegratorLimit) {
  auto h = linear_recurrence_sequential(Tensor<double>(Shape{5, 2}, 1.0), Tensor<double>(Shape{5, 2}, 1.0),
                                        Tensor<double>(Shape{2}, 0.0));
  for (std::size_t t = 0; t < 5; ++t) {
    EXPECT_EQ(h.at({t, 0}), double(t + 1));
    EXPECT_EQ(h.at({t, 1}), double(t + 1));
  }
}

TEST(RecurrenceTest, SequentialMatchesDirectLoopExactly) {
  std::mt19937_64 rng(2);
  auto a = random_tensor({16, 4}, rng, 0, 1), b = random_tensor({16, 4}, rng), h0 = random_tensor({4}, rng);
  auto h = linear_recurrence_sequential(a, b, h0);
  auto ref = direct_loop(a, b, h0);
  for (std::size_t t = 0; t < 16; ++t)
    for (std::size_t i = 0; i < 4; ++i) {
      EXPECT_EQ(h.at({t, i}), ref[t][i]);
      EXPECT_NEAR(h.at({t, i}), closed_form(a, b, h0, t, i), 1e-12);
    }
}

TEST(RecurrenceTest, SingleChunkIsBitwiseSequential) {
  std::mt19937_64 rng(3);
  auto a = random_tensor({37, 5}, rng, 0, 1), b = random_tensor({37, 5}, rng), h0 = random_tensor({5}, rng);
  EXPECT_EQ(linear_recurrence_scan(a, b, h0, 37).values(), linear_recurrence_sequential(a, b, h0).values());
  EXPECT_EQ(linear_recurrence_scan(a, b, h0, 100).values(), linear_recurrence_sequential(a, b, h0).values());
}

TEST(RecurrenceTest, ScanMatchesSequential) {
  std::mt19937_64 rng(4);
  auto a = random_tensor({64, 8}, rng, 0, 1), b = random_tensor({64, 8}, rng), h0 = random_tensor({8}, rng);
  auto seq = linear_recurrence_sequential(a, b, h0);
  auto scan = linear_recurrence_scan(a, b, h0, 8);
  EXPECT_LT(max_abs_diff(seq, scan), 1e-12);
}

TEST(RecurrenceTest, SingleStep) {
  auto a = Tensor<double>(Shape{1, 2}, std::vector<double>{0.5, 0.25});
  auto b = Tensor<double>(Shape{1, 2}, std::vector<double>{1.0, -2.0});
  auto h0 = Tensor<double>::vector({4.0, 8.0});
  auto h = linear_recurrence_scan(a, b, h0, 3);
  EXPECT_EQ(h.values(), (std::vector<double>{3.0, 0.0}));
}

TEST(RecurrenceTest, ScanResultIndependentOfThreadCount) {
  std::mt19937_64 rng(5);
  auto a = random_tensor({257, 6}, rng, 0, 1), b = random_tensor({257, 6}, rng), h0 = random_tensor({6}, rng);
  auto serial = linear_recurrence_scan(a, b, h0, 13);
  for (std::size_t threads : {2u, 3u, 4u}) {
    WorkerPool pool(threads);
    EXPECT_EQ(linear_recurrence_scan(a, b, h0, 13, &pool).values(), serial.values());
  }
}

TEST(RecurrenceTest, Float32ScanAgrees) {
  std::mt19937_64 rng(6);
  auto a = random_tensor({200, 4}, rng, 0, 0.95).cast<float>();
  auto b = random_tensor({200, 4}, rng).cast<float>();
  Tensor<float> h0(Shape{4});
  auto seq = linear_recurrence_sequential(a, b, h0);
  auto scan = linear_recurrence_scan(a, b, h0, 7);
  for (std::size_t i = 0; i < seq.size(); ++i) {
    EXPECT_LE(std::abs(seq[i] - scan[i]), 1e-5f * std::max(1.0f, std::abs(seq[i])));
  }
}

TEST(RecurrenceTest, ContractionBound) {
  std::mt19937_64 rng(8);
  const double gamma = 0.8;
  auto a = random_tensor({300, 5}, rng, 0, gamma), b = random_tensor({300, 5}, rng, -2, 2);
  double bound = 0;
  for (auto v : b.data()) bound = std::max(bound, std::abs(v));
  bound /= (1 - gamma);
  auto h = linear_recurrence_scan(a, b, Tensor<double>(Shape{5}), 16);
  for (auto v : h.data()) EXPECT_LE(std::abs(v), bound);
}

TEST(RecurrenceTest, ShapeErrors) {
  EXPECT_THROW(linear_recurrence_sequential(Tensor<double>(Shape{3, 2}), Tensor<double>(Shape{3, 3}),
                                            Tensor<double>(Shape{2})),
               Error);
  EXPECT_THROW(linear_recurrence_scan(Tensor<double>(Shape{3, 2}), Tensor<double>(Shape{3, 2}),
                                      Tensor<double>(Shape{3}), 1),
               Error);
  EXPECT_THROW(linear_recurrence_scan(Tensor<double>(Shape{3, 2}), Tensor<double>(Shape{3, 2}),
                                      Tensor<double>(Shape{2}), 0),
               Error);
  EXPECT_EQ(default_chunk(256, 4), 64u);
  EXPECT_EQ(default_chunk(7, 4), 2u);
  EXPECT_EQ(default_chunk(5, 1), 5u);
}

}  // namespace
}  // namespace stv
