#include "stv/train.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "stv/rng.hpp"
#include "stv/worker_pool.hpp"

namespace stv {
namespace {

RunConfig small_action() {
  RunConfig c = default_config(Task::action);
  c.data.clips = 60;
  c.epochs = 2;
  c.optimizer.batch_size = 8;
  c.optimizer.schedule.initial = 1e-3;
  return c;
}

RunConfig small_tracking() {
  RunConfig c = default_config(Task::tracking);
  c.data.clips = 10;
  c.epochs = 2;
  c.optimizer.batch_size = 4;
  return c;
}

std::string csv(const RunConfig& c, const TrainResult& r) {
  std::ostringstream os;
  write_metrics_csv(os, c, r.history);
  return os.str();
}

std::string ckpt_bytes(const Checkpoint& c) {
  std::ostringstream os;
  write_checkpoint(os, c);
  return os.str();
}

TEST(DatasetTest, SplitAndLabels) {
  RunConfig c = small_action();
  c.data.clips = 23;
  const Dataset d = make_dataset(c);
  EXPECT_EQ(d.val.size(), 4u);
  EXPECT_EQ(d.train.size(), 19u);
  EXPECT_EQ(*d.val[0].label, 4 % 4);
  EXPECT_EQ(*d.val[1].label, 9 % 4);
  EXPECT_EQ(*d.train[4].label, 5 % 4);
  EXPECT_EQ(d.val[2].seed, derive_seed(c.seed, 14));
  const Dataset again = make_dataset(c);
  EXPECT_EQ(again.train[7].frames.values(), d.train[7].frames.values());
}

TEST(TrainTest, ZeroEpochsGivesInitialization) {
  RunConfig c = small_action();
  c.epochs = 0;
  const auto r = train(c);
  EXPECT_TRUE(r.history.empty());
  EXPECT_EQ(r.checkpoint.epoch, 0u);
  const auto init = init_params<float>(c.model, derive_seed(c.seed, kInitStream));
  ASSERT_EQ(r.checkpoint.params.size(), init.size());
  for (const auto& [name, t] : init) EXPECT_EQ(r.checkpoint.params.at(name).values(), t.values()) << name;
}

TEST(TrainTest, DeterministicAndThreadIndependent) {
  for (const RunConfig& base : {small_action(), small_tracking()}) {
    RunConfig one = base, three = base;
    three.threads = 3;
    const auto a = train(one), b = train(one), c = train(three);
    EXPECT_EQ(csv(one, a), csv(one, b));
    EXPECT_EQ(ckpt_bytes(a.checkpoint), ckpt_bytes(b.checkpoint));
    for (const auto& [name, t] : a.checkpoint.params) EXPECT_EQ(c.checkpoint.params.at(name).values(), t.values());
    ASSERT_EQ(a.history.size(), c.history.size());
    for (std::size_t e = 0; e < a.history.size(); ++e) {
      EXPECT_EQ(a.history[e].train_loss, c.history[e].train_loss);
      EXPECT_EQ(a.history[e].val.loss, c.history[e].val.loss);
    }
  }
}

TEST(TrainTest, SeedChangesResult) {
  RunConfig a = small_action(), b = small_action();
  b.seed = 2;
  EXPECT_NE(train(a).history.back().train_loss, train(b).history.back().train_loss);
}

TEST(TrainTest, CheckpointPreservesValidationMetrics) {
  for (const RunConfig& c : {small_action(), small_tracking()}) {
    const auto r = train(c);
    std::istringstream in(ckpt_bytes(r.checkpoint));
    const Checkpoint back = read_checkpoint(in);
    const Dataset data = make_dataset(back.config);
    const auto before = evaluate(c, r.checkpoint.params, data.val);
    const auto after = evaluate(back.config, back.params, data.val);
    EXPECT_EQ(before.loss, after.loss);
    EXPECT_EQ(before.top1, after.top1);
    EXPECT_EQ(before.mot.mota, after.mot.mota);
    EXPECT_EQ(before.loss, r.history.back().val.loss);
  }
}

TEST(TrainTest, EvaluationIndependentOfPool) {
  const RunConfig c = small_tracking();
  const auto params = init_params<float>(c.model, 3);
  const Dataset data = make_dataset(c);
  WorkerPool pool(3);
  const auto a = evaluate(c, params, data.val);
  const auto b = evaluate(c, params, data.val, &pool);
  EXPECT_EQ(a.loss, b.loss);
  EXPECT_EQ(a.mot.fp, b.mot.fp);
  EXPECT_EQ(a.mot.iou_sum, b.mot.iou_sum);
}

TEST(TrainTest, NonFiniteLossAborts) {
  RunConfig c = small_action();
  c.optimizer.schedule.initial = 1e30;
  c.epochs = 3;
  try {
    train(c);
    FAIL() << "expected a non-finite loss";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "non_finite_loss");
    EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("batch"), std::string::npos);
  }
}

TEST(TrainTest, MetricsCsvLayout) {
  const RunConfig c = small_action();
  const auto r = train(c);
  const std::string text = csv(c, r);
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "metric,value,config_hash,seed");
  const std::string tail = "," + hash_hex(config_hash(c)) + ",1";
  std::getline(in, line);
  EXPECT_EQ(line, "epoch0.lr,0.001" + tail);
  std::getline(in, line);
  EXPECT_EQ(line.rfind("epoch0.train_loss,", 0), 0u);
  std::size_t rows = 3;
  std::string last;
  while (std::getline(in, line)) {
    ++rows;
    last = line;
  }
  EXPECT_EQ(rows, 1u + 2 * (2 + 3) + 3);
  EXPECT_EQ(last.rfind("val_clips,12,", 0), 0u);
}

TEST(TrainTest, LossDecreasesOnDefaultActionConfig) {
  RunConfig c = default_config(Task::action);
  c.epochs = 5;
  const auto r = train(c);
  ASSERT_EQ(r.history.size(), 5u);
  for (std::size_t e = 1; e < 5; ++e)
    EXPECT_LT(r.history[e].train_loss, r.history[e - 1].train_loss) << "epoch " << e;
}

TEST(GradcheckTest, SmallModelsPass) {
  for (Task t : {Task::action, Task::tracking}) {
    RunConfig c = default_config(t);
    c.model.frames = 2;
    c.model.height = c.model.width = 8;
    c.model.layers = parse_layers("3:2:1:4:silu");
    c.model.features = 3;
    c.model.classes = 3;
    const auto report = model_gradcheck(c, 11, 1e-3);
    EXPECT_LT(report.max_error, 1e-4) << task_name(t);
    const auto groups = group_errors(report);
    EXPECT_TRUE(groups.count("encoder"));
    EXPECT_TRUE(groups.count("temporal"));
    EXPECT_TRUE(groups.count(t == Task::action ? "classifier" : "detector"));
  }
}

}  // namespace
}  // namespace stv
