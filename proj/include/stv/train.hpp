#pragma once

#include <iosfwd>
#include <vector>

#include "stv/checkpoint.hpp"
#include "stv/gradcheck.hpp"
#include "stv/metrics.hpp"

namespace stv {

struct Dataset {
  std::vector<VideoClip> train, val;
};

/// Clip i is generated from derive_seed(seed, i); every fifth clip
/// (i mod 5 == 4) is held out for validation. Action labels cycle through
/// the classes.
Dataset make_dataset(const RunConfig& config, WorkerPool* pool = nullptr);

std::vector<VideoClip> generate_clips(Task task, std::size_t count, const ClipSpec& spec, int objects,
                                      std::size_t classes, std::uint64_t seed, WorkerPool* pool = nullptr);

struct Evaluation {
  double loss = 0.0;  // mean per-clip loss
  double top1 = 0.0;  // action only
  MotResult mot;      // tracking only
  std::size_t clips = 0;
};

/// Clips are processed independently and combined in order, so the result
/// does not depend on the pool size.
Evaluation evaluate(const RunConfig& config, const ParamMap<float>& params, const std::vector<VideoClip>& clips,
                    WorkerPool* pool = nullptr);

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  Evaluation val;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochRecord> history;
};

/// Minibatch Adam on the synthetic split. Per-clip gradients run on the
/// worker pool and are summed in batch order, so results are identical for
/// every thread count.
TrainResult train(const RunConfig& config, std::ostream* log = nullptr);

/// `metric,value,config_hash,seed` rows: per-epoch records prefixed with
/// "epoch<N>." followed by the final validation metrics.
void write_metrics_csv(std::ostream& out, const RunConfig& config, const std::vector<EpochRecord>& history);

/// Final metric rows for one evaluation.
void write_evaluation_csv(std::ostream& out, const RunConfig& config, const Evaluation& eval, bool header = true,
                          const std::string& prefix = "");

std::string format_value(double v);

/// Seed stream used for parameter initialization.
inline constexpr std::uint64_t kInitStream = 1ULL << 40;

/// Finite-difference check of the full training loss in double precision at
/// a fresh initialization drawn from `seed`, on one generated clip.
GradcheckReport model_gradcheck(const RunConfig& config, std::uint64_t seed, double eps);

/// Worst error per parameter group (encoder, temporal, ...).
std::map<std::string, double> group_errors(const GradcheckReport& report);

}  // namespace stv
