// Acceptance checks. Usage: acceptance [N ...] runs the listed criteria (all
// when none are given) and prints one PASS/FAIL line for each.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>

#include "mot_oracle.hpp"
#include "stv/bench.hpp"
#include "stv/recurrence.hpp"
#include "stv/rng.hpp"
#include "stv/train.hpp"
#include "stv/worker_pool.hpp"
#include "test_util.hpp"

using namespace stv;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string config_path(const std::string& name) { return std::string(STV_CONFIG_DIR) + "/" + name; }

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

std::size_t desk_threads() {
  return std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, 4);
}

Outcome gradient_correctness() {
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::string missing;
  for (const char* file : {"action.ini", "tracking.ini"}) {
    const RunConfig config = load_config(config_path(file));
    std::set<std::string> expected;
    for (const auto& [name, shape] : model_param_shapes(config.model)) expected.insert(param_group(name));
    for (std::uint64_t seed : {1, 2, 3}) {
      const auto groups = group_errors(model_gradcheck(config, seed, 1e-3));
      for (const auto& g : expected)
        if (!groups.count(g)) missing += " " + g;
      for (const auto& [g, e] : groups) worst = std::max(worst, e);
    }
  }
  const double t = seconds_since(start);
  return {worst < 1e-4 && missing.empty() && t < 120.0,
          "max rel error " + fmt(worst) + " over 2 tasks x 3 seeds" + (missing.empty() ? "" : ", unchecked:" + missing) +
              ", " + fmt(t, 3) + " s"};
}

Outcome scan_oracle() {
  const auto start = std::chrono::steady_clock::now();
  WorkerPool pool(4);
  double worst = 0.0;
  int cases = 0;
  for (std::size_t T : {1, 2, 7, 64, 257}) {
    for (std::size_t chunk : {std::size_t{1}, std::size_t{3}, std::size_t{8}, T}) {
      for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        std::mt19937_64 rng(seed * 1000 + T * 10 + chunk);
        const std::size_t N = 16;
        const auto decay = testing::random_tensor({T, N}, rng, 0.0, 1.0);
        const auto input = testing::random_tensor({T, N}, rng);
        const auto h0 = testing::random_tensor({N}, rng);
        const auto ref = linear_recurrence_sequential(decay, input, h0);
        for (WorkerPool* p : {static_cast<WorkerPool*>(nullptr), &pool}) {
          const auto scan = linear_recurrence_scan(decay, input, h0, chunk, p);
          for (std::size_t i = 0; i < ref.size(); ++i)
            worst = std::max(worst, std::abs(scan[i] - ref[i]) / std::max(1.0, std::abs(ref[i])));
          ++cases;
        }
      }
    }
  }
  const double t = seconds_since(start);
  return {worst <= 1e-10 && t < 10.0,
          std::to_string(cases) + " cases, max rel diff " + fmt(worst) + ", " + fmt(t, 3) + " s"};
}

Outcome attention_invariants() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(77);
  int violations = 0;
  double worst_sum = 0.0, worst_shift = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t T = 1 + rng() % 6, H = 1 + rng() % 5, W = 1 + rng() % 5, D = 1 + rng() % 8;
    const auto g = testing::random_tensor({T, H, W, D}, rng, -4, 4);
    ParamMap<double> p;
    for (const auto& [name, shape] : attention_param_shapes(D)) p[name] = testing::random_tensor(shape, rng, -2, 2);
    const TemporalFeatures<double> feats{ad::constant(g)};
    const auto out = attend(feats, bind_attention(D, bind_params(p, false)), false);
    const auto& a = out.maps.spatial.value();
    const auto& b = out.maps.temporal.value();
    const auto& r = out.representation.value();
    double bsum = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      double s = 0.0;
      for (std::size_t i = 0; i < H * W; ++i) {
        violations += a[t * H * W + i] < 0.0;
        s += a[t * H * W + i];
      }
      worst_sum = std::max(worst_sum, std::abs(s - 1.0));
      violations += b[t] < 0.0;
      bsum += b[t];
    }
    worst_sum = std::max(worst_sum, std::abs(bsum - 1.0));
    for (std::size_t d = 0; d < D; ++d) {
      double lo = INFINITY, hi = -INFINITY;
      for (std::size_t i = 0; i < T * H * W; ++i) {
        lo = std::min(lo, g[i * D + d]);
        hi = std::max(hi, g[i * D + d]);
      }
      violations += r[d] < lo - 1e-12 || r[d] > hi + 1e-12;
    }
    auto shifted = p;
    std::uniform_real_distribution<double> c(-5, 5);
    shifted["attention.spatial.bias"][0] += c(rng);
    shifted["attention.temporal.bias"][0] += c(rng);
    const auto moved = attend(feats, bind_attention(D, bind_params(shifted, false)), false);
    worst_shift = std::max({worst_shift, max_abs_diff(moved.maps.spatial.value(), a),
                            max_abs_diff(moved.maps.temporal.value(), b)});
  }
  const double t = seconds_since(start);
  const bool ok = violations == 0 && worst_sum <= 1e-6 && worst_shift <= 1e-6 && t < 30.0;
  return {ok, "1000 inputs, " + std::to_string(violations) + " sign/hull violations, max |sum-1| " + fmt(worst_sum) +
                  ", max shift change " + fmt(worst_shift) + ", " + fmt(t, 3) + " s"};
}

Outcome fuse_oracle() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(5);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t T = 1 + rng() % 4, H = 1 + rng() % 4, W = 1 + rng() % 4, D = 1 + rng() % 6;
    const auto g = testing::random_tensor({T, H, W, D}, rng);
    auto a = testing::random_tensor({T, H, W}, rng, 0.0, 1.0);
    auto b = testing::random_tensor({T}, rng, 0.0, 1.0);
    double bs = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      double s = 0.0;
      for (std::size_t i = 0; i < H * W; ++i) s += a[t * H * W + i];
      for (std::size_t i = 0; i < H * W; ++i) a[t * H * W + i] /= s;
      bs += b[t];
    }
    for (std::size_t t = 0; t < T; ++t) b[t] /= bs;
    const auto r = ad::fuse(ad::constant(g), ad::constant(a), ad::constant(b)).value();
    for (std::size_t d = 0; d < D; ++d) {
      double expect = 0.0;
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t i = 0; i < H; ++i)
          for (std::size_t j = 0; j < W; ++j)
            expect += b[t] * a[(t * H + i) * W + j] * g[((t * H + i) * W + j) * D + d];
      worst = std::max(worst, std::abs(r[d] - expect));
    }
  }
  const double t = seconds_since(start);
  return {worst <= 1e-7 && t < 5.0, "100 instances, max abs diff " + fmt(worst) + ", " + fmt(t, 3) + " s"};
}

Outcome clear_mot_oracle() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(31337);
  int mismatches = 0;
  const int cases = 500;
  for (int c = 0; c < cases; ++c) {
    const auto [gt, pred] = testing::random_mot_case(rng);
    const auto a = clear_mot(gt, pred, 0.5);
    const auto b = testing::brute_force_mot(gt, pred, 0.5);
    mismatches += a.fp != b.fp || a.fn != b.fn || a.idsw != b.idsw || a.matches != b.matches || a.mota != b.mota ||
                  a.motp != b.motp;
  }
  TrackSet gt, pred;
  for (int f = 0; f < 4; ++f) {
    const Box box{0.2 + 0.1 * f, 0.5, 0.2, 0.2};
    gt.add(1, f, box);
    pred.add(f < 2 ? 10 : 11, f, box);
  }
  const auto example = clear_mot(gt, pred, 0.5);
  const double t = seconds_since(start);
  const bool ok = mismatches == 0 && example.idsw == 1 && example.mota == 0.75 && t < 10.0;
  return {ok, std::to_string(cases) + " cases, " + std::to_string(mismatches) + " mismatches; switch example IDSW " +
                  std::to_string(example.idsw) + " MOTA " + fmt(example.mota) + ", " + fmt(t, 3) + " s"};
}

Outcome action_task() {
  RunConfig config = load_config(config_path("action.ini"));
  config.threads = desk_threads();
  const auto start = std::chrono::steady_clock::now();
  const auto result = train(config);
  const double t = seconds_since(start);
  double best = 0.0;
  int first = -1;
  for (const auto& rec : result.history) {
    best = std::max(best, rec.val.top1);
    if (first < 0 && rec.val.top1 >= 0.9) first = rec.epoch;
  }
  const double final_top1 = result.history.empty() ? 0.0 : result.history.back().val.top1;
  return {first >= 0 && config.epochs <= 50 && t < 300.0 && parameter_count(config.model) <= 50000,
          std::to_string(parameter_count(config.model)) + " params, final val top-1 " + fmt(final_top1) +
              ", first >= 0.9 at epoch " + std::to_string(first) + ", " + fmt(t, 4) + " s, threads=" +
              std::to_string(config.threads)};
}

Outcome ablation_direction() {
  const RunConfig base = load_config(config_path("action_noisy.ini"));
  int wins = 0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    RunConfig full = base, ablated = base;
    full.seed = ablated.seed = seed;
    full.threads = ablated.threads = desk_threads();
    ablated.model.ablate_attention = true;
    const double a = train(full).history.back().val.top1;
    const double b = train(ablated).history.back().val.top1;
    wins += a > b;
    detail += " s" + std::to_string(seed) + " " + fmt(a, 3) + "/" + fmt(b, 3);
  }
  return {wins >= 4, std::to_string(wins) + "/5 seeds favour attention (full/ablated):" + detail};
}

Outcome efficiency() {
  const RunConfig config = load_config(config_path("bench.ini"));
  ClipSpec spec = config.clip_spec();
  spec.frames = 256;
  const VideoClip clip = gen_action_clip(0, spec, config.seed);
  const auto params = init_params<float>(config.model, derive_seed(config.seed, kInitStream));
  auto ratio = [&](std::size_t threads, double& seq, double& par) {
    seq = measure_throughput(config.model, params, clip, TemporalMode::sequential, threads, 1, 5).median;
    par = measure_throughput(config.model, params, clip, TemporalMode::parallel, threads, 1, 5).median;
    return par / seq;
  };
  double s4, p4, s1, p1;
  const double r4 = ratio(4, s4, p4);
  const double r1 = ratio(1, s1, p1);
  return {r4 >= 1.5 && r1 >= 0.8,
          "T=256 fps seq/par: 4 threads " + fmt(s4) + "/" + fmt(p4) + " (x" + fmt(r4, 3) + "), 1 thread " + fmt(s1) +
              "/" + fmt(p1) + " (x" + fmt(r1, 3) + "); hardware threads=" +
              std::to_string(std::thread::hardware_concurrency())};
}

Outcome tracking_task() {
  RunConfig config = load_config(config_path("tracking.ini"));
  config.threads = desk_threads();
  const auto start = std::chrono::steady_clock::now();
  const auto result = train(config);
  const double t = seconds_since(start);
  const MotResult& m = result.history.back().val.mot;
  return {m.mota >= 0.9 && m.motp >= 0.7 && config.tracking.eval_iou == 0.5 && t < 600.0,
          "val MOTA " + fmt(m.mota) + " MOTP " + fmt(m.motp) + " (FP " + std::to_string(m.fp) + " FN " +
              std::to_string(m.fn) + " IDSW " + std::to_string(m.idsw) + " of " + std::to_string(m.gt_boxes) +
              "), " + fmt(t, 4) + " s training"};
}

Outcome reproducibility() {
  std::string detail;
  bool ok = true;
  for (const char* file : {"action.ini", "tracking.ini"}) {
    RunConfig config = load_config(config_path(file));
    config.threads = 1;
    config.epochs = 2;
    config.data.clips = config.model.task == Task::action ? 400 : 100;
    std::string csv[2], ckpt[2];
    for (int run = 0; run < 2; ++run) {
      const auto result = train(config);
      std::ostringstream a, b;
      write_metrics_csv(a, config, result.history);
      write_checkpoint(b, result.checkpoint);
      csv[run] = a.str();
      ckpt[run] = b.str();
    }
    const bool same = csv[0] == csv[1] && ckpt[0] == ckpt[1];
    ok = ok && same;
    detail += std::string(detail.empty() ? "" : "; ") + task_name(config.model.task) + ": csv " +
              (csv[0] == csv[1] ? "identical" : "differs") + ", checkpoint " + std::to_string(ckpt[0].size()) +
              " bytes " + (ckpt[0] == ckpt[1] ? "identical" : "differs");
  }
  return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::pair<std::string, std::function<Outcome()>>> criteria{
      {1, {"gradient correctness", gradient_correctness}},
      {2, {"scan oracle", scan_oracle}},
      {3, {"attention invariants", attention_invariants}},
      {4, {"fusion oracle", fuse_oracle}},
      {5, {"CLEAR-MOT oracle", clear_mot_oracle}},
      {6, {"action task", action_task}},
      {7, {"attention ablation", ablation_direction}},
      {8, {"parallel throughput", efficiency}},
      {9, {"tracking task", tracking_task}},
      {10, {"reproducibility", reproducibility}},
  };
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::stoi(argv[i]));
  if (selected.empty())
    for (const auto& [n, c] : criteria) selected.push_back(n);

  int failures = 0;
  for (int n : selected) {
    auto it = criteria.find(n);
    if (it == criteria.end()) {
      std::cerr << "unknown criterion " << n << "\n";
      return 2;
    }
    Outcome o;
    try {
      o = it->second.second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << n << " (" << it->second.first << "): " << o.detail
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
