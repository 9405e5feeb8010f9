#include "stv/heads.hpp"

#include <algorithm>
#include <cmath>

#include "stv/assignment.hpp"

namespace stv {

std::vector<std::pair<std::string, Shape>> classifier_param_shapes(std::size_t d, std::size_t k) {
  return {{"classifier.weight", {d, k}}, {"classifier.bias", {k}}};
}

template <typename S>
ClassifierParams<S> bind_classifier(std::size_t d, std::size_t k, const VarMap<S>& params) {
  return ClassifierParams<S>{require_param(params, "classifier.weight", {d, k}),
                             require_param(params, "classifier.bias", {k})};
}

template <typename S>
ad::Var<S> classify(const ad::Var<S>& representation, const ClassifierParams<S>& params) {
  const Shape& w = params.weight.shape();
  if (representation.shape().size() != 1 || w.size() != 2 || w[0] != representation.shape()[0]) {
    throw Error("shape_mismatch", "representation " + shape_string(representation.shape()) +
                                      " does not match classifier weight " + shape_string(w));
  }
  const std::size_t d = w[0], k = w[1];
  auto logits = ad::add_bias(ad::matmul(ad::reshape(representation, {1, d}), params.weight), params.bias);
  return ad::reshape(logits, {k});
}

std::vector<std::pair<std::string, Shape>> detector_param_shapes(std::size_t d, std::size_t e) {
  return {{"detector.weight", {d, det::channels(e)}}, {"detector.bias", {det::channels(e)}}};
}

template <typename S>
DetectorParams<S> bind_detector(std::size_t d, std::size_t e, const VarMap<S>& params) {
  return DetectorParams<S>{require_param(params, "detector.weight", {d, det::channels(e)}),
                           require_param(params, "detector.bias", {det::channels(e)})};
}

template <typename S>
ad::Var<S> detection_maps(const TemporalFeatures<S>& g, const DetectorParams<S>& params, WorkerPool* pool) {
  const Shape& s = g.values.shape();
  if (s.size() != 4 || params.weight.shape().size() != 2 || params.weight.shape()[0] != s[3]) {
    throw Error("shape_mismatch", "features " + shape_string(s) + " do not match detector weight " +
                                      shape_string(params.weight.shape()));
  }
  return ad::add_bias(ad::matmul(ad::reshape(g.values, {s[0] * s[1] * s[2], s[3]}), params.weight, pool),
                      params.bias);
}

template <typename S>
std::vector<Detection> decode_detections(const Tensor<S>& raw, std::size_t grid_h, std::size_t grid_w, int frame,
                                         double threshold) {
  if (raw.rank() != 2 || raw.dim(0) != grid_h * grid_w || raw.dim(1) < det::embedding) {
    throw Error("shape_mismatch", "detection output " + shape_string(raw.shape()) + " does not match a " +
                                      std::to_string(grid_h) + "x" + std::to_string(grid_w) + " grid");
  }
  const std::size_t C = raw.dim(1);
  std::vector<Detection> out;
  for (std::size_t i = 0; i < grid_h; ++i) {
    for (std::size_t j = 0; j < grid_w; ++j) {
      const S* cell = raw.data().data() + (i * grid_w + j) * C;
      const double conf = ad::logistic(static_cast<double>(cell[det::confidence]));
      if (!(conf > threshold)) continue;
      Detection d;
      d.frame = frame;
      d.confidence = conf;
      d.box.cx = (static_cast<double>(j) + 0.5 + cell[det::dx]) / static_cast<double>(grid_w);
      d.box.cy = (static_cast<double>(i) + 0.5 + cell[det::dy]) / static_cast<double>(grid_h);
      d.box.w = std::max(0.0, static_cast<double>(cell[det::width])) / static_cast<double>(grid_w);
      d.box.h = std::max(0.0, static_cast<double>(cell[det::height])) / static_cast<double>(grid_h);
      d.box = clamp_to_unit(d.box);
      d.embedding.assign(cell + det::embedding, cell + C);
      out.push_back(std::move(d));
    }
  }
  return out;
}

template <typename S>
std::vector<Detection> detect_objects(const Tensor<S>& g_t, const DetectorParams<S>& params, int frame,
                                      double threshold) {
  if (g_t.rank() != 3) throw Error("shape_mismatch", "detect_objects expects an H'×W'×D slice");
  require_finite(g_t, "detection input");
  const TemporalFeatures<S> one{ad::constant(g_t.reshaped({1, g_t.dim(0), g_t.dim(1), g_t.dim(2)}))};
  DetectorParams<S> frozen{ad::constant(params.weight.value()), ad::constant(params.bias.value())};
  const auto raw = detection_maps(one, frozen);
  return decode_detections(raw.value(), g_t.dim(0), g_t.dim(1), frame, threshold);
}

double cosine_distance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw Error("shape_mismatch", "embedding sizes differ");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 1.0;
  return 1.0 - std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

void associate(TrackerState& state, int frame, const std::vector<Detection>& detections,
               const AssociationConfig& config) {
  if (frame != state.last_frame + 1) {
    throw Error("track_order", "associate got frame " + std::to_string(frame) + " after frame " +
                                   std::to_string(state.last_frame));
  }
  for (const auto& d : detections) {
    if (d.frame != frame) {
      throw Error("track_order", "detection from frame " + std::to_string(d.frame) + " passed with frame " +
                                     std::to_string(frame));
    }
  }
  state.last_frame = frame;

  CostMatrix cost(state.active.size(), detections.size());
  for (std::size_t i = 0; i < state.active.size(); ++i) {
    for (std::size_t j = 0; j < detections.size(); ++j) {
      const double overlap = iou(state.active[i].box, detections[j].box);
      const double dist = cosine_distance(state.active[i].embedding, detections[j].embedding);
      cost.at(i, j) = (1.0 - overlap) + config.lambda * dist;
      cost.feasible[i * cost.cols + j] = overlap >= config.iou_gate && dist <= config.embedding_gate;
    }
  }
  const auto pairs = match(cost);

  std::vector<bool> track_hit(state.active.size(), false), det_used(detections.size(), false);
  for (const auto& [i, j] : pairs) {
    track_hit[i] = det_used[j] = true;
    auto& t = state.active[i];
    t.box = detections[j].box;
    t.embedding = detections[j].embedding;
    t.misses = 0;
    state.tracks.add(t.id, frame, t.box, detections[j].confidence);
  }
  std::vector<ActiveTrack> kept;
  for (std::size_t i = 0; i < state.active.size(); ++i) {
    auto& t = state.active[i];
    if (!track_hit[i] && ++t.misses > config.max_age) continue;
    kept.push_back(std::move(t));
  }
  for (std::size_t j = 0; j < detections.size(); ++j) {
    if (det_used[j]) continue;
    ActiveTrack t{state.next_id++, detections[j].box, detections[j].embedding, 0};
    state.tracks.add(t.id, frame, t.box, detections[j].confidence);
    kept.push_back(std::move(t));
  }
  state.active = std::move(kept);
}

template ClassifierParams<float> bind_classifier(std::size_t, std::size_t, const VarMap<float>&);
template ClassifierParams<double> bind_classifier(std::size_t, std::size_t, const VarMap<double>&);
template ad::Var<float> classify(const ad::Var<float>&, const ClassifierParams<float>&);
template ad::Var<double> classify(const ad::Var<double>&, const ClassifierParams<double>&);
template DetectorParams<float> bind_detector(std::size_t, std::size_t, const VarMap<float>&);
template DetectorParams<double> bind_detector(std::size_t, std::size_t, const VarMap<double>&);
template ad::Var<float> detection_maps(const TemporalFeatures<float>&, const DetectorParams<float>&, WorkerPool*);
template ad::Var<double> detection_maps(const TemporalFeatures<double>&, const DetectorParams<double>&, WorkerPool*);
template std::vector<Detection> decode_detections(const Tensor<float>&, std::size_t, std::size_t, int, double);
template std::vector<Detection> decode_detections(const Tensor<double>&, std::size_t, std::size_t, int, double);
template std::vector<Detection> detect_objects(const Tensor<float>&, const DetectorParams<float>&, int, double);
template std::vector<Detection> detect_objects(const Tensor<double>&, const DetectorParams<double>&, int, double);

}  // namespace stv
