#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "stv/attention.hpp"
#include "stv/tracks.hpp"

namespace stv {

// ---------------------------------------------------------------------------
// Classification

std::vector<std::pair<std::string, Shape>> classifier_param_shapes(std::size_t features, std::size_t classes);

template <typename S>
struct ClassifierParams {
  ad::Var<S> weight;  // D×K
  ad::Var<S> bias;    // K
};

template <typename S>
ClassifierParams<S> bind_classifier(std::size_t features, std::size_t classes, const VarMap<S>& params);

/// Logits R W + b; no softmax.
template <typename S>
ad::Var<S> classify(const ad::Var<S>& representation, const ClassifierParams<S>& params);

// ---------------------------------------------------------------------------
// Detection

/// Per-cell output channels of the detection head.
namespace det {
inline constexpr std::size_t confidence = 0, dx = 1, dy = 2, width = 3, height = 4, embedding = 5;
inline constexpr std::size_t channels(std::size_t embedding_dim) { return embedding + embedding_dim; }
}  // namespace det

std::vector<std::pair<std::string, Shape>> detector_param_shapes(std::size_t features, std::size_t embedding_dim);

template <typename S>
struct DetectorParams {
  ad::Var<S> weight;  // D×(5+E)
  ad::Var<S> bias;    // 5+E
};

template <typename S>
DetectorParams<S> bind_detector(std::size_t features, std::size_t embedding_dim, const VarMap<S>& params);

/// 1×1 conv of every frame of G: (T·H'·W')×(5+E) raw head outputs.
template <typename S>
ad::Var<S> detection_maps(const TemporalFeatures<S>& g, const DetectorParams<S>& params, WorkerPool* pool = nullptr);

struct Detection {
  int frame = 0;
  Box box;  // normalized image coordinates
  std::vector<double> embedding;
  double confidence = 0.0;
};

/// Turns one frame of raw head outputs (H'·W' rows of 5+E channels) into
/// detections. Cell (i, j) predicts center ((j + 0.5 + dx)/W', (i + 0.5 + dy)/H')
/// and size (w/W', h/H'); all four regressed channels are in cell units.
/// Boxes are clamped to the unit square.
template <typename S>
std::vector<Detection> decode_detections(const Tensor<S>& raw, std::size_t grid_h, std::size_t grid_w, int frame,
                                         double threshold);

/// Runs the detection head on one frame slice H'×W'×D of G.
template <typename S>
std::vector<Detection> detect_objects(const Tensor<S>& g_t, const DetectorParams<S>& params, int frame,
                                      double threshold = 0.5);

// ---------------------------------------------------------------------------
// Association

struct AssociationConfig {
  double iou_gate = 0.1;        // pairs below this IoU are never matched
  double embedding_gate = 1.0;  // pairs with 1 − cosine above this are never matched
  double lambda = 1.0;          // weight of the embedding distance in the cost
  int max_age = 3;              // frames a track may go unmatched before it closes
};

double cosine_distance(const std::vector<double>& a, const std::vector<double>& b);

struct ActiveTrack {
  int id = 0;
  Box box;
  std::vector<double> embedding;
  int misses = 0;
};

struct TrackerState {
  TrackSet tracks;                  // every box ever assigned, by track id
  std::vector<ActiveTrack> active;  // ordered by id
  int next_id = 0;
  int last_frame = -1;
};

/// Adds one frame of detections: Hungarian matching of active tracks to
/// detections on (1 − IoU) + λ(1 − cosine), gated; unmatched detections open
/// new tracks. Frames must be consecutive.
void associate(TrackerState& state, int frame, const std::vector<Detection>& detections,
               const AssociationConfig& config);

}  // namespace stv
