// Command-line front end: data generation, training, evaluation, tracking,
// benchmarking and gradient checking.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

#include "stv/bench.hpp"
#include "stv/rng.hpp"
#include "stv/train.hpp"
#include "stv/worker_pool.hpp"

using namespace stv;

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("io", "cannot write " + path);
  return out;
}

RunConfig config_or_default(const std::string& path, Task task) {
  return path.empty() ? default_config(task) : load_config(path);
}

int gen_data(const std::string& task_name, const std::string& out, std::size_t count, std::uint64_t seed,
             const std::string& config_path) {
  const Task task = parse_task(task_name);
  RunConfig config = config_or_default(config_path, task);
  config.model.task = task;
  validate_config(config);
  const auto clips = generate_clips(task, count, config.clip_spec(), config.data.objects, config.model.classes, seed);
  save_clips(out, clips);
  std::cerr << "wrote " << clips.size() << " " << task_name << " clips to " << out << "\n";
  return 0;
}

int run_train(RunConfig config) {
  validate_config(config);
  const auto result = train(config, &std::cerr);
  save_checkpoint(config.checkpoint, result.checkpoint);
  auto metrics = open_out(config.metrics);
  write_metrics_csv(metrics, config, result.history);
  std::cerr << "checkpoint " << config.checkpoint << ", metrics " << config.metrics << "\n";
  return 0;
}

int run_eval(const std::string& ckpt_path, const std::string& data_path, std::optional<std::size_t> threads,
             const std::string& attention_out, std::size_t attention_clip) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  RunConfig config = ckpt.config;
  if (threads) config.threads = *threads;
  const auto clips = load_clips(data_path);
  WorkerPool pool(config.threads);
  const Evaluation eval = evaluate(config, ckpt.params, clips, &pool);
  write_evaluation_csv(std::cout, config, eval);
  if (!attention_out.empty()) {
    if (config.model.task != Task::action) throw Error("bad_argument", "attention maps exist for the action task only");
    if (attention_clip >= clips.size()) throw Error("out_of_range", "attention clip index beyond the data file");
    const auto model = bind_model(config.model, bind_params(ckpt.params, false));
    const auto out = action_forward(config.model, model, clip_frames<float>(clips[attention_clip]));
    auto file = open_out(attention_out);
    write_attention_csv(file, out.attention.maps);
  }
  return 0;
}

int run_track(const std::string& ckpt_path, const std::string& data_path, const std::string& out_path) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const RunConfig& config = ckpt.config;
  if (config.model.task != Task::tracking) throw Error("bad_argument", "checkpoint is not a tracking model");
  const auto clips = load_clips(data_path);
  auto out = open_out(out_path);
  // Clips are concatenated: frames continue across clips and ids never repeat.
  int frame_offset = 0, id_offset = 0;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const TrackSet tracks = track_clip(config.model, ckpt.params, clips[i], config.tracking.tracker);
    write_mot_csv(out, tracks, static_cast<double>(clips[i].width()), static_cast<double>(clips[i].height()),
                  frame_offset, id_offset, i == 0);
    frame_offset += static_cast<int>(clips[i].length());
    int next = id_offset;
    for (const auto& [id, entries] : tracks.tracks()) next = std::max(next, id_offset + id + 1);
    id_offset = next;
  }
  return 0;
}

int run_bench(const std::string& config_path, std::size_t threads, std::size_t frames, int iters, int warmup) {
  RunConfig config = load_config(config_path);
  config.model.task = Task::action;
  config.model.frames = frames;
  validate_config(config);
  const auto params = init_params<float>(config.model, derive_seed(config.seed, kInitStream));
  ClipSpec spec = config.clip_spec();
  const VideoClip clip = gen_action_clip(0, spec, derive_seed(config.seed, 0));
  std::vector<Throughput> rows;
  rows.push_back(measure_throughput(config.model, params, clip, TemporalMode::sequential, threads, warmup, iters));
  rows.push_back(measure_throughput(config.model, params, clip, TemporalMode::parallel, threads, warmup, iters));
  write_bench_csv(std::cout, rows);
  return 0;
}

int run_gradcheck(const std::string& config_path, double eps, std::uint64_t seed) {
  const RunConfig config = load_config(config_path);
  const auto report = model_gradcheck(config, seed, eps);
  std::cout << "group,max_rel_error\n";
  for (const auto& [group, err] : group_errors(report)) std::cout << group << ',' << format_value(err) << '\n';
  std::cout << "all," << format_value(report.max_error) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatio-temporal video model: training, evaluation, tracking and benchmarks"};
  app.require_subcommand(1);

  std::string task = "action", out, config_path, checkpoint, data, attention_out, temporal_mode;
  std::size_t count = 100, attention_clip = 0, frames = 256;
  std::uint64_t seed = 1;
  std::optional<std::size_t> threads;
  std::optional<int> epochs;
  std::optional<std::uint64_t> train_seed;
  bool ablate = false;
  int iters = 5, warmup = 1;
  double eps = 1e-3;

  auto* gen = app.add_subcommand("gen-data", "Generate synthetic clips into an STVC file");
  gen->add_option("--task", task, "action or tracking")->check(CLI::IsMember({"action", "tracking"}));
  gen->add_option("--out", out, "Output path")->required();
  gen->add_option("--count", count, "Number of clips");
  gen->add_option("--seed", seed, "Base seed");
  gen->add_option("--config", config_path, "Config supplying clip geometry and noise");

  std::string train_checkpoint, train_metrics;
  auto* tr = app.add_subcommand("train", "Train a model and write a checkpoint and metrics CSV");
  tr->add_option("--config", config_path, "Config file")->required();
  tr->add_flag("--ablate-attention", ablate, "Replace attention with uniform weights");
  tr->add_option("--threads", threads, "Worker threads");
  tr->add_option("--temporal-mode", temporal_mode, "sequential or parallel")
      ->check(CLI::IsMember({"sequential", "parallel"}));
  tr->add_option("--epochs", epochs, "Override run.epochs");
  tr->add_option("--seed", train_seed, "Override run.seed");
  tr->add_option("--checkpoint", train_checkpoint, "Override run.checkpoint");
  tr->add_option("--metrics", train_metrics, "Override run.metrics");

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint; metrics CSV on stdout");
  ev->add_option("--checkpoint", checkpoint, "Checkpoint path")->required();
  ev->add_option("--data", data, "STVC clip file")->required();
  ev->add_option("--threads", threads, "Worker threads");
  ev->add_option("--attention-out", attention_out, "Write attention maps of one clip as CSV");
  ev->add_option("--attention-clip", attention_clip, "Clip index for --attention-out");

  auto* tk = app.add_subcommand("track", "Run the tracker and write MOT-style CSV");
  tk->add_option("--checkpoint", checkpoint, "Checkpoint path")->required();
  tk->add_option("--data", data, "STVC clip file")->required();
  tk->add_option("--out", out, "Output CSV path")->required();

  std::size_t bench_threads = 1;
  auto* bn = app.add_subcommand("bench", "Measure sequential and parallel inference throughput");
  bn->add_option("--config", config_path, "Config file")->required();
  bn->add_option("--threads", bench_threads, "Worker threads")->check(CLI::PositiveNumber);
  bn->add_option("--T", frames, "Clip length")->check(CLI::PositiveNumber);
  bn->add_option("--iters", iters, "Measured iterations")->check(CLI::Range(3, 100000));
  bn->add_option("--warmup", warmup, "Warmup iterations")->check(CLI::Range(1, 100000));

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of the full training loss");
  gc->add_option("--config", config_path, "Config file")->required();
  gc->add_option("--eps", eps, "Central difference step");
  gc->add_option("--seed", seed, "Initialization and clip seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error:usage: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*gen) return gen_data(task, out, count, seed, config_path);
    if (*tr) {
      RunConfig config = load_config(config_path);
      if (ablate) config.model.ablate_attention = true;
      if (threads) config.threads = *threads;
      if (!temporal_mode.empty()) config.model.temporal_mode = parse_temporal_mode(temporal_mode);
      if (epochs) config.epochs = *epochs;
      if (train_seed) config.seed = *train_seed;
      if (!train_checkpoint.empty()) config.checkpoint = train_checkpoint;
      if (!train_metrics.empty()) config.metrics = train_metrics;
      return run_train(config);
    }
    if (*ev) return run_eval(checkpoint, data, threads, attention_out, attention_clip);
    if (*tk) return run_track(checkpoint, data, out);
    if (*bn) return run_bench(config_path, bench_threads, frames, iters, warmup);
    if (*gc) return run_gradcheck(config_path, eps, seed);
  } catch (const Error& e) {
    std::cerr << "error:" << e.code() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error:internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
