#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "stv/heads.hpp"
#include "stv/synth.hpp"

namespace stv {

enum class Task { action, tracking };

std::string task_name(Task t);
Task parse_task(const std::string& name);

/// Architecture of the full network for one task.
struct ModelSpec {
  Task task = Task::action;
  std::size_t frames = 8;  // T
  std::size_t height = 16, width = 16, channels = 1;
  std::size_t features = 8;   // D
  std::size_t classes = 4;    // K
  std::size_t embedding = 8;  // E
  std::vector<ConvLayerSpec> layers{ConvLayerSpec{}, ConvLayerSpec{}};
  TemporalMode temporal_mode = TemporalMode::parallel;
  std::size_t chunk = 0;
  bool ablate_attention = false;

  EncoderSpec encoder() const;
  FeatureShape grid() const { return encoder_output(encoder()); }
};

/// Every parameter of the model, in a fixed order.
std::vector<std::pair<std::string, Shape>> model_param_shapes(const ModelSpec& spec);

std::size_t parameter_count(const ModelSpec& spec);

/// Group of a parameter name: the text before the first '.'.
std::string param_group(const std::string& name);

/// Glorot-uniform weights and zero biases. Each tensor draws from its own
/// stream derived from `seed`, so the float and double models start from the
/// same values up to rounding.
template <typename S>
ParamMap<S> init_params(const ModelSpec& spec, std::uint64_t seed);

/// Throws naming the first parameter that is missing, unexpected or misshapen.
template <typename S>
void validate_params(const ModelSpec& spec, const ParamMap<S>& params);

template <typename S>
struct BoundModel {
  SpatialEncoderParams<S> encoder;
  TemporalParams<S> temporal;
  AttentionParams<S> attention;
  ClassifierParams<S> classifier;
  DetectorParams<S> detector;
};

template <typename S>
BoundModel<S> bind_model(const ModelSpec& spec, const VarMap<S>& params);

/// Runs encoder and temporal module; `pool` fans out frames, matmuls and the scan.
template <typename S>
TemporalFeatures<S> backbone(const ModelSpec& spec, const BoundModel<S>& model, const Tensor<S>& frames,
                             WorkerPool* pool = nullptr);

template <typename S>
struct ActionOutput {
  ad::Var<S> logits;
  AttentionOutput<S> attention;
};

template <typename S>
ActionOutput<S> action_forward(const ModelSpec& spec, const BoundModel<S>& model, const Tensor<S>& frames,
                               WorkerPool* pool = nullptr);

/// Raw detection head output, (T·H'·W')×(5+E).
template <typename S>
ad::Var<S> tracking_forward(const ModelSpec& spec, const BoundModel<S>& model, const Tensor<S>& frames,
                            WorkerPool* pool = nullptr);

/// Charbonnier scale for box regression.
inline constexpr double kBoxLossScale = 0.1;

/// Per-cell training targets for one tracking clip. Each ground-truth box
/// is owned by the grid cell containing its center; when two centers share
/// a cell the lower identity keeps it.
template <typename S>
struct DetectionTargets {
  Tensor<S> confidence;         // (T·P)×1, 1 on owning cells
  Tensor<S> boxes;              // (T·P)×4: dx, dy, w, h
  Tensor<S> box_mask;           // (T·P)×4
  std::vector<int> identities;  // per cell, -1 where no object
};

template <typename S>
DetectionTargets<S> detection_targets(const ModelSpec& spec, const TrackSet& tracks);

/// Training loss of one clip: cross entropy on the label for the action
/// task; for tracking, per-frame averages of confidence BCE summed over
/// cells, box regression and identity cross entropy on owning cells.
template <typename S>
ad::Var<S> clip_loss(const ModelSpec& spec, const BoundModel<S>& model, const VideoClip& clip,
                     WorkerPool* pool = nullptr);

template <typename S>
Tensor<S> clip_frames(const VideoClip& clip);

/// Inference: argmax of the logits.
template <typename S>
int predict_class(const ModelSpec& spec, const ParamMap<S>& params, const VideoClip& clip, WorkerPool* pool = nullptr);

struct TrackerConfig {
  double detect_threshold = 0.5;
  AssociationConfig association;
};

/// Inference: detections per frame, associated into tracks.
template <typename S>
TrackSet track_clip(const ModelSpec& spec, const ParamMap<S>& params, const VideoClip& clip,
                    const TrackerConfig& config, WorkerPool* pool = nullptr);

}  // namespace stv
