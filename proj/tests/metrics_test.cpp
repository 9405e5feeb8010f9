#include "stv/metrics.hpp"

#include <gtest/gtest.h>

#include <random>

#include "mot_oracle.hpp"
#include "stv/error.hpp"

namespace stv {
namespace {

TEST(Top1Test, Examples) {
  EXPECT_EQ(top1_accuracy({1, 2, 3}, {1, 2, 3}), 1.0);
  EXPECT_EQ(top1_accuracy({0, 0}, {1, 1}), 0.0);
  EXPECT_EQ(top1_accuracy({0, 1, 2, 3}, {0, 1, 0, 0}), 0.5);
  EXPECT_THROW(top1_accuracy({0}, {0, 1}), Error);
  EXPECT_THROW(top1_accuracy({}, {}), Error);
}

TrackSet single_track(int frames) {
  TrackSet t;
  for (int f = 0; f < frames; ++f) t.add(1, f, Box{0.2 + 0.1 * f, 0.5, 0.2, 0.2});
  return t;
}

TEST(ClearMotTest, PerfectTracker) {
  TrackSet gt;
  for (int f = 0; f < 4; ++f) {
    gt.add(0, f, Box{0.2, 0.2 + 0.1 * f, 0.2, 0.2});
    gt.add(1, f, Box{0.7, 0.7, 0.1, 0.3});
  }
  const auto r = clear_mot(gt, gt);
  EXPECT_EQ(r.mota, 1.0);
  EXPECT_EQ(r.motp, 1.0);
  EXPECT_TRUE(r.motp_defined);
  EXPECT_EQ(r.fp + r.fn + r.idsw, 0u);
  EXPECT_EQ(r.matches, 8u);
}

TEST(ClearMotTest, EmptyPrediction) {
  const auto r = clear_mot(single_track(3), TrackSet{});
  EXPECT_EQ(r.mota, 0.0);
  EXPECT_EQ(r.fn, 3u);
  EXPECT_FALSE(r.motp_defined);
  EXPECT_EQ(r.motp, 0.0);
}

TEST(ClearMotTest, SingleIdentitySwitch) {
  const TrackSet gt = single_track(4);
  TrackSet pred;
  for (const auto& e : gt.tracks().at(1)) pred.add(e.frame < 2 ? 7 : 8, e.frame, e.box);
  const auto r = clear_mot(gt, pred);
  EXPECT_EQ(r.idsw, 1u);
  EXPECT_EQ(r.fp, 0u);
  EXPECT_EQ(r.fn, 0u);
  EXPECT_DOUBLE_EQ(r.mota, 0.75);
}

TEST(ClearMotTest, NegativeMotaAllowed) {
  const TrackSet gt = single_track(2);
  TrackSet pred;
  for (int f = 0; f < 2; ++f)
    for (int k = 0; k < 3; ++k) pred.add(k, f, Box{0.9, 0.1 + 0.3 * k, 0.1, 0.1});
  const auto r = clear_mot(gt, pred);
  EXPECT_EQ(r.fp, 6u);
  EXPECT_EQ(r.fn, 2u);
  EXPECT_DOUBLE_EQ(r.mota, 1.0 - 8.0 / 2.0);
}

TEST(ClearMotTest, CarryOverBeatsBetterOverlap) {
  // gt 0 keeps pred 5 in frame 1 even though pred 6 overlaps it better.
  TrackSet gt, pred;
  gt.add(0, 0, Box{0.5, 0.5, 0.2, 0.2});
  gt.add(0, 1, Box{0.5, 0.5, 0.2, 0.2});
  pred.add(5, 0, Box{0.5, 0.5, 0.2, 0.2});
  pred.add(5, 1, Box{0.52, 0.5, 0.2, 0.2});
  pred.add(6, 1, Box{0.5, 0.5, 0.2, 0.2});
  const auto r = clear_mot(gt, pred);
  EXPECT_EQ(r.idsw, 0u);
  EXPECT_EQ(r.fp, 1u);
  EXPECT_LT(r.motp, 1.0);
}

TEST(ClearMotTest, GateMatters) {
  TrackSet gt, pred;
  gt.add(0, 0, Box{0.5, 0.5, 0.2, 0.2});
  pred.add(0, 0, Box{0.56, 0.5, 0.2, 0.2});  // IoU 0.14 / 0.26 ≈ 0.538
  EXPECT_EQ(clear_mot(gt, pred, 0.5).matches, 1u);
  EXPECT_EQ(clear_mot(gt, pred, 0.6).matches, 0u);
  EXPECT_THROW(clear_mot(gt, pred, 0.0), Error);
  EXPECT_THROW(clear_mot(gt, pred, 1.0), Error);
  EXPECT_THROW(clear_mot(TrackSet{}, pred), Error);
}

TEST(ClearMotTest, MatchesExhaustiveOracle) {
  std::mt19937_64 rng(2024);
  std::size_t idsw = 0, fp = 0, fn = 0;
  for (int c = 0; c < 300; ++c) {
    const auto [gt, pred] = testing::random_mot_case(rng);
    const auto a = clear_mot(gt, pred);
    const auto b = testing::brute_force_mot(gt, pred, 0.5);
    ASSERT_EQ(a.fp, b.fp) << "case " << c;
    ASSERT_EQ(a.fn, b.fn) << "case " << c;
    ASSERT_EQ(a.idsw, b.idsw) << "case " << c;
    ASSERT_EQ(a.matches, b.matches) << "case " << c;
    ASSERT_EQ(a.mota, b.mota) << "case " << c;
    ASSERT_EQ(a.motp, b.motp) << "case " << c;
    EXPECT_LE(a.mota, 1.0);
    EXPECT_GE(a.motp, 0.0);
    EXPECT_LE(a.motp, 1.0);
    idsw += a.idsw;
    fp += a.fp;
    fn += a.fn;
  }
  EXPECT_GT(idsw, 20u);
  EXPECT_GT(fp, 20u);
  EXPECT_GT(fn, 20u);
}

TEST(ClearMotTest, CombineSumsCounts) {
  const TrackSet gt = single_track(4);
  TrackSet pred;
  for (const auto& e : gt.tracks().at(1)) pred.add(e.frame < 2 ? 7 : 8, e.frame, e.box);
  const auto a = clear_mot(gt, pred);
  const auto b = clear_mot(single_track(2), TrackSet{});
  const auto c = combine({a, b});
  EXPECT_EQ(c.gt_boxes, 6u);
  EXPECT_EQ(c.idsw, 1u);
  EXPECT_EQ(c.fn, 2u);
  EXPECT_DOUBLE_EQ(c.mota, 1.0 - 3.0 / 6.0);
  EXPECT_DOUBLE_EQ(c.motp, 1.0);
  EXPECT_THROW(combine({}), Error);
}

}  // namespace
}  // namespace stv
