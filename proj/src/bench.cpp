#include "stv/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <ostream>

#include "stv/worker_pool.hpp"

namespace stv {

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw Error("bad_argument", "quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

Throughput measure_throughput(const ModelSpec& spec, const ParamMap<float>& params, const VideoClip& clip,
                              TemporalMode mode, std::size_t threads, int warmup, int measured) {
  if (warmup < 1 || measured < 3) throw Error("bad_argument", "benchmark needs warmup >= 1 and measured >= 3");
  if (threads == 0) throw Error("bad_argument", "thread count must be at least 1");
  ModelSpec s = spec;
  s.task = Task::action;
  s.temporal_mode = mode;
  s.frames = clip.length();
  const auto model = bind_model(s, bind_params(params, false));
  const Tensor<float> frames = clip_frames<float>(clip);

  std::unique_ptr<WorkerPool> pool;
  if (mode == TemporalMode::parallel && threads > 1) pool = std::make_unique<WorkerPool>(threads);

  Throughput out;
  out.mode = mode;
  out.threads = threads;
  out.frames = clip.length();
  volatile float sink = 0.0f;
  for (int i = 0; i < warmup + measured; ++i) {
    const auto start = std::chrono::steady_clock::now();
    const auto result = action_forward(s, model, frames, pool.get());
    const auto stop = std::chrono::steady_clock::now();
    sink = sink + result.logits.value()[0];
    if (i < warmup) continue;
    const double seconds = std::chrono::duration<double>(stop - start).count();
    out.fps.push_back(static_cast<double>(clip.length()) / std::max(seconds, 1e-9));
  }
  out.median = quantile(out.fps, 0.5);
  out.iqr = quantile(out.fps, 0.75) - quantile(out.fps, 0.25);
  return out;
}

void write_bench_csv(std::ostream& out, const std::vector<Throughput>& rows, bool header) {
  if (header) out << "mode,threads,T,fps_median,fps_iqr\n";
  for (const auto& r : rows) {
    out << temporal_mode_name(r.mode) << ',' << r.threads << ',' << r.frames << ',' << r.median << ',' << r.iqr
        << '\n';
  }
}

}  // namespace stv
