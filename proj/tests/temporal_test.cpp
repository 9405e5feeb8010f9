#include "stv/temporal.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "stv/gradcheck.hpp"
#include "stv/worker_pool.hpp"
#include "test_util.hpp"

namespace stv {
namespace {

using testing::random_tensor;

ParamMap<double> random_temporal(std::size_t d, std::mt19937_64& rng) {
  ParamMap<double> p;
  for (const auto& [name, shape] : temporal_param_shapes(d)) p[name] = random_tensor(shape, rng, -0.6, 0.6);
  return p;
}

std::vector<FeatureMap<double>> feature_seq(const std::vector<Tensor<double>>& frames) {
  std::vector<FeatureMap<double>> out;
  for (std::size_t t = 0; t < frames.size(); ++t) out.push_back({ad::constant(frames[t]), t});
  return out;
}

std::vector<Tensor<double>> random_frames(std::size_t T, Shape shape, std::mt19937_64& rng) {
  std::vector<Tensor<double>> f;
  for (std::size_t t = 0; t < T; ++t) f.push_back(random_tensor(shape, rng));
  return f;
}

Tensor<double> run(const std::vector<Tensor<double>>& frames, const ParamMap<double>& p, TemporalMode mode,
                   std::size_t chunk = 0, WorkerPool* pool = nullptr) {
  const std::size_t d = frames.front().shape().back();
  TemporalOptions opt;
  opt.mode = mode;
  opt.chunk = chunk;
  opt.pool = pool;
  return temporal_forward(feature_seq(frames), bind_temporal(d, bind_params(p, false)), opt).values.value();
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

TEST(TemporalTest, SingleFrameHasNoHistory) {
  std::mt19937_64 rng(1);
  const std::size_t D = 3;
  const auto p = random_temporal(D, rng);
  const auto frames = random_frames(1, {2, 2, D}, rng);
  const auto g = run(frames, p, TemporalMode::parallel);
  // h_1 = a ⊙ 0 + (x W_in + b_in), G = h W_out.
  for (std::size_t pos = 0; pos < 4; ++pos) {
    std::vector<double> h(D);
    for (std::size_t j = 0; j < D; ++j) {
      h[j] = p.at("temporal.in.bias")[j];
      for (std::size_t i = 0; i < D; ++i) h[j] += frames[0][pos * D + i] * p.at("temporal.in.weight")[i * D + j];
    }
    for (std::size_t k = 0; k < D; ++k) {
      double expect = 0;
      for (std::size_t j = 0; j < D; ++j) expect += h[j] * p.at("temporal.out.weight")[j * D + k];
      EXPECT_NEAR(g[pos * D + k], expect, 1e-12);
    }
  }
}

TEST(TemporalTest, ZeroInputZeroBiasGivesZero) {
  std::mt19937_64 rng(2);
  auto p = random_temporal(4, rng);
  p["temporal.in.bias"] = Tensor<double>(Shape{4});
  p["temporal.gate.bias"] = Tensor<double>(Shape{4});
  std::vector<Tensor<double>> frames(5, Tensor<double>(Shape{3, 3, 4}));
  for (auto mode : {TemporalMode::sequential, TemporalMode::parallel}) {
    const auto g = run(frames, p, mode);
    for (double v : g.data()) EXPECT_EQ(v, 0.0);
  }
}

TEST(TemporalTest, ExplicitTwoStepRecurrence) {
  std::mt19937_64 rng(3);
  const std::size_t D = 2;
  const auto p = random_temporal(D, rng);
  const auto frames = random_frames(2, {1, 1, D}, rng);
  const auto g = run(frames, p, TemporalMode::sequential);
  std::vector<double> h(D, 0.0);
  for (std::size_t t = 0; t < 2; ++t) {
    std::vector<double> next(D);
    for (std::size_t j = 0; j < D; ++j) {
      double u = p.at("temporal.in.bias")[j], z = p.at("temporal.gate.bias")[j];
      for (std::size_t i = 0; i < D; ++i) {
        u += frames[t][i] * p.at("temporal.in.weight")[i * D + j];
        z += frames[t][i] * p.at("temporal.gate.weight")[i * D + j];
      }
      next[j] = logistic(z) * h[j] + u;
    }
    h = next;
    for (std::size_t k = 0; k < D; ++k) {
      double expect = 0;
      for (std::size_t j = 0; j < D; ++j) expect += h[j] * p.at("temporal.out.weight")[j * D + k];
      EXPECT_NEAR(g[t * D + k], expect, 1e-12);
    }
  }
}

TEST(TemporalTest, ModesAgree) {
  std::mt19937_64 rng(4);
  const auto p = random_temporal(8, rng);
  const auto frames = random_frames(8, {4, 4, 8}, rng);
  const auto seq = run(frames, p, TemporalMode::sequential);
  WorkerPool pool(4);
  for (std::size_t chunk : {0, 1, 3, 8}) {
    const auto par = run(frames, p, TemporalMode::parallel, chunk, chunk == 3 ? &pool : nullptr);
    EXPECT_LT(max_abs_diff(seq, par), 1e-10) << "chunk " << chunk;
  }
}

TEST(TemporalTest, ThreadCountDoesNotChangeOutput) {
  std::mt19937_64 rng(5);
  const auto p = random_temporal(6, rng);
  const auto frames = random_frames(17, {2, 3, 6}, rng);
  const auto one = run(frames, p, TemporalMode::parallel, 5);
  WorkerPool pool(3);
  EXPECT_EQ(one.values(), run(frames, p, TemporalMode::parallel, 5, &pool).values());
}

TEST(TemporalTest, Causality) {
  std::mt19937_64 rng(6);
  const auto p = random_temporal(4, rng);
  auto frames = random_frames(6, {2, 2, 4}, rng);
  for (auto mode : {TemporalMode::sequential, TemporalMode::parallel}) {
    const auto base = run(frames, p, mode, 2);
    auto perturbed = frames;
    perturbed[4] = random_tensor({2, 2, 4}, rng);
    const auto other = run(perturbed, p, mode, 2);
    const std::size_t frame = 16;
    for (std::size_t i = 0; i < 4 * frame; ++i) EXPECT_EQ(base[i], other[i]);
    double changed = 0;
    for (std::size_t i = 4 * frame; i < 5 * frame; ++i) changed += std::abs(base[i] - other[i]);
    EXPECT_GT(changed, 0.0);
  }
}

TEST(TemporalTest, GradcheckBothModes) {
  std::mt19937_64 rng(7);
  const std::size_t D = 3;
  ParamMap<double> point = random_temporal(D, rng);
  for (std::size_t t = 0; t < 4; ++t) point["f" + std::to_string(t)] = random_tensor({2, 2, D}, rng);
  for (auto mode : {TemporalMode::sequential, TemporalMode::parallel}) {
    ScalarFn<double> f = [&](const VarMap<double>& v) {
      std::vector<FeatureMap<double>> seq;
      for (std::size_t t = 0; t < 4; ++t) seq.push_back({v.at("f" + std::to_string(t)), t});
      TemporalOptions opt;
      opt.mode = mode;
      opt.chunk = 3;
      const auto g = temporal_forward(seq, bind_temporal(D, v), opt).values;
      return ad::sum(ad::mul(g, g));
    };
    EXPECT_LT(gradcheck<double>(f, point, 1e-3).max_error, 1e-4) << temporal_mode_name(mode);
  }
}

TEST(TemporalTest, Errors) {
  std::mt19937_64 rng(8);
  const auto p = random_temporal(4, rng);
  const auto bound = bind_temporal(4, bind_params(p, false));
  EXPECT_THROW(temporal_forward<double>({}, bound, {}), Error);
  auto frames = random_frames(2, {2, 2, 4}, rng);
  frames[1] = random_tensor({2, 3, 4}, rng);
  EXPECT_THROW(temporal_forward(feature_seq(frames), bound, {}), Error);
  EXPECT_THROW(temporal_forward(feature_seq(random_frames(2, {2, 2, 5}, rng)), bound, {}), Error);
  EXPECT_THROW(bind_temporal(5, bind_params(p, false)), Error);
  EXPECT_EQ(parse_temporal_mode("sequential"), TemporalMode::sequential);
  EXPECT_THROW(parse_temporal_mode("both"), Error);
}

}  // namespace
}  // namespace stv
