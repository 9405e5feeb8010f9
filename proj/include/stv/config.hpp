#pragma once

#include <cstdint>
#include <string>

#include "stv/model.hpp"
#include "stv/optim.hpp"

namespace stv {

struct OptimizerConfig {
  Schedule schedule;           // learning_rate, decay_every, decay_factor
  std::size_t batch_size = 16;  // 16 for action, 8 for tracking
};

struct DataConfig {
  std::size_t clips = 2000;  // generated clips; every fifth goes to validation
  double noise = 0.0;
  double square = 4.0;
  double speed = 1.0;
  int objects = 3;  // tracking only
};

struct TrackingConfig {
  TrackerConfig tracker;
  double eval_iou = 0.5;  // IoU gate of the CLEAR-MOT evaluation
};

struct RunConfig {
  ModelSpec model;
  OptimizerConfig optimizer;
  DataConfig data;
  TrackingConfig tracking;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  int epochs = 50;
  std::string checkpoint = "model.stvk";
  std::string metrics = "metrics.csv";

  ClipSpec clip_spec() const;
};

/// Defaults for a task; the tracking model works on 32×32 frames with an
/// 8×8 feature grid.
RunConfig default_config(Task task);

/// Parses INI text. The task key picks the defaults; every other key
/// overrides one field. Unknown sections or keys are errors.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Canonical INI text listing every key; parse_config(format_config(c))
/// reproduces c exactly.
std::string format_config(const RunConfig& config);

/// FNV-1a 64 of the canonical text.
std::uint64_t config_hash(const RunConfig& config);
std::string hash_hex(std::uint64_t hash);

void validate_config(const RunConfig& config);

/// "3:2:1:8:silu, 3:2:1:8:silu" (kernel:stride:padding:channels:activation).
std::vector<ConvLayerSpec> parse_layers(const std::string& text);
std::string format_layers(const std::vector<ConvLayerSpec>& layers);

}  // namespace stv
