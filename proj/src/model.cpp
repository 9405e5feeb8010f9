#include "stv/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "stv/rng.hpp"

namespace stv {

std::string task_name(Task t) { return t == Task::action ? "action" : "tracking"; }

Task parse_task(const std::string& name) {
  if (name == "action") return Task::action;
  if (name == "tracking") return Task::tracking;
  throw Error("config", "unknown task '" + name + "'");
}

EncoderSpec ModelSpec::encoder() const {
  EncoderSpec e;
  e.height = height;
  e.width = width;
  e.channels = channels;
  e.layers = layers;
  e.features = features;
  return e;
}

std::vector<std::pair<std::string, Shape>> model_param_shapes(const ModelSpec& spec) {
  auto shapes = encoder_param_shapes(spec.encoder());
  auto append = [&](const std::vector<std::pair<std::string, Shape>>& more) {
    shapes.insert(shapes.end(), more.begin(), more.end());
  };
  append(temporal_param_shapes(spec.features));
  if (spec.task == Task::action) {
    append(attention_param_shapes(spec.features));
    append(classifier_param_shapes(spec.features, spec.classes));
  } else {
    append(detector_param_shapes(spec.features, spec.embedding));
  }
  return shapes;
}

std::size_t parameter_count(const ModelSpec& spec) {
  std::size_t n = 0;
  for (const auto& [name, shape] : model_param_shapes(spec)) n += shape_numel(shape);
  return n;
}

std::string param_group(const std::string& name) { return name.substr(0, name.find('.')); }

template <typename S>
ParamMap<S> init_params(const ModelSpec& spec, std::uint64_t seed) {
  ParamMap<S> params;
  const auto shapes = model_param_shapes(spec);
  for (std::size_t index = 0; index < shapes.size(); ++index) {
    const auto& [name, shape] = shapes[index];
    Tensor<S> t(shape);
    if (shape.size() >= 2) {
      // Receptive field for conv kernels k×k×Cin×Cout, 1 for matrices.
      std::size_t field = 1;
      for (std::size_t i = 0; i + 2 < shape.size(); ++i) field *= shape[i];
      const double fan_in = static_cast<double>(field * shape[shape.size() - 2]);
      const double fan_out = static_cast<double>(field * shape.back());
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      Xorshift64Star rng(derive_seed(seed, index));
      for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<S>(rng.uniform(-limit, limit));
    }
    params.emplace(name, std::move(t));
  }
  return params;
}

template <typename S>
void validate_params(const ModelSpec& spec, const ParamMap<S>& params) {
  std::set<std::string> expected;
  for (const auto& [name, shape] : model_param_shapes(spec)) {
    expected.insert(name);
    auto it = params.find(name);
    if (it == params.end()) throw Error("config_mismatch", "parameter '" + name + "' missing for this config");
    if (it->second.shape() != shape) {
      throw Error("config_mismatch", "parameter '" + name + "' has shape " + shape_string(it->second.shape()) +
                                         ", config expects " + shape_string(shape));
    }
  }
  for (const auto& [name, value] : params) {
    if (!expected.count(name)) throw Error("config_mismatch", "parameter '" + name + "' is not part of this config");
  }
}

template <typename S>
BoundModel<S> bind_model(const ModelSpec& spec, const VarMap<S>& params) {
  BoundModel<S> m;
  m.encoder = bind_encoder(spec.encoder(), params);
  m.temporal = bind_temporal(spec.features, params);
  if (spec.task == Task::action) {
    m.attention = bind_attention(spec.features, params);
    m.classifier = bind_classifier(spec.features, spec.classes, params);
  } else {
    m.detector = bind_detector(spec.features, spec.embedding, params);
  }
  return m;
}

template <typename S>
TemporalFeatures<S> backbone(const ModelSpec& spec, const BoundModel<S>& model, const Tensor<S>& frames,
                             WorkerPool* pool) {
  const auto features = encode_clip(frames, model.encoder, pool);
  TemporalOptions options;
  options.mode = spec.temporal_mode;
  options.chunk = spec.chunk;
  options.pool = pool;
  return temporal_forward(features, model.temporal, options);
}

template <typename S>
ActionOutput<S> action_forward(const ModelSpec& spec, const BoundModel<S>& model, const Tensor<S>& frames,
                               WorkerPool* pool) {
  const auto g = backbone(spec, model, frames, pool);
  auto attended = attend(g, model.attention, spec.ablate_attention);
  auto logits = classify(attended.representation, model.classifier);
  return ActionOutput<S>{logits, attended};
}

template <typename S>
ad::Var<S> tracking_forward(const ModelSpec& spec, const BoundModel<S>& model, const Tensor<S>& frames,
                            WorkerPool* pool) {
  return detection_maps(backbone(spec, model, frames, pool), model.detector, pool);
}

template <typename S>
DetectionTargets<S> detection_targets(const ModelSpec& spec, const TrackSet& tracks) {
  const FeatureShape grid = spec.grid();
  const std::size_t T = spec.frames, P = grid.positions();
  DetectionTargets<S> out{Tensor<S>(Shape{T * P, 1}), Tensor<S>(Shape{T * P, 4}), Tensor<S>(Shape{T * P, 4}),
                          std::vector<int>(T * P, -1)};
  for (const auto& [id, entries] : tracks.tracks()) {
    if (id < 0 || static_cast<std::size_t>(id) >= spec.embedding) {
      throw Error("out_of_range", "track identity " + std::to_string(id) + " exceeds embedding size " +
                                      std::to_string(spec.embedding));
    }
    for (const auto& e : entries) {
      if (e.frame < 0 || static_cast<std::size_t>(e.frame) >= T) continue;
      const double gx = e.box.cx * static_cast<double>(grid.width);
      const double gy = e.box.cy * static_cast<double>(grid.height);
      const auto j = static_cast<std::size_t>(std::clamp(std::floor(gx), 0.0, static_cast<double>(grid.width - 1)));
      const auto i = static_cast<std::size_t>(std::clamp(std::floor(gy), 0.0, static_cast<double>(grid.height - 1)));
      const std::size_t cell = static_cast<std::size_t>(e.frame) * P + i * grid.width + j;
      if (out.identities[cell] >= 0) continue;  // ids are visited in ascending order
      out.identities[cell] = id;
      out.confidence[cell] = 1;
      const double target[4] = {gx - (static_cast<double>(j) + 0.5), gy - (static_cast<double>(i) + 0.5),
                                e.box.w * static_cast<double>(grid.width), e.box.h * static_cast<double>(grid.height)};
      for (std::size_t k = 0; k < 4; ++k) {
        out.boxes[cell * 4 + k] = static_cast<S>(target[k]);
        out.box_mask[cell * 4 + k] = 1;
      }
    }
  }
  return out;
}

template <typename S>
Tensor<S> clip_frames(const VideoClip& clip) {
  if constexpr (std::is_same_v<S, float>) {
    return clip.frames;
  } else {
    return clip.frames.template cast<S>();
  }
}

template <typename S>
ad::Var<S> clip_loss(const ModelSpec& spec, const BoundModel<S>& model, const VideoClip& clip, WorkerPool* pool) {
  const Tensor<S> frames = clip_frames<S>(clip);
  if (spec.task == Task::action) {
    if (!clip.label) throw Error("bad_argument", "action clip without a label");
    if (*clip.label < 0 || static_cast<std::size_t>(*clip.label) >= spec.classes) {
      throw Error("out_of_range", "label " + std::to_string(*clip.label) + " outside the classifier range");
    }
    return ad::cross_entropy(action_forward(spec, model, frames, pool).logits, static_cast<std::size_t>(*clip.label));
  }
  if (!clip.tracks) throw Error("bad_argument", "tracking clip without ground truth tracks");
  const auto raw = tracking_forward(spec, model, frames, pool);
  const auto targets = detection_targets<S>(spec, *clip.tracks);
  const std::size_t C = det::channels(spec.embedding);
  const Tensor<S> ones(targets.confidence.shape(), S(1));
  auto conf = ad::bce_with_logits(ad::columns(raw, det::confidence, det::dx), targets.confidence, ones);
  auto box = ad::charbonnier(ad::columns(raw, det::dx, det::embedding), targets.boxes, targets.box_mask,
                             static_cast<S>(kBoxLossScale));
  auto ident = ad::cross_entropy_rows(ad::columns(raw, det::embedding, C), targets.identities);
  return ad::scale(ad::add(ad::add(conf, box), ident), S(1) / static_cast<S>(frames.dim(0)));
}

template <typename S>
int predict_class(const ModelSpec& spec, const ParamMap<S>& params, const VideoClip& clip, WorkerPool* pool) {
  const auto model = bind_model(spec, bind_params(params, false));
  const auto logits = action_forward(spec, model, clip_frames<S>(clip), pool).logits.value();
  return static_cast<int>(std::max_element(logits.data().begin(), logits.data().end()) - logits.data().begin());
}

template <typename S>
TrackSet track_clip(const ModelSpec& spec, const ParamMap<S>& params, const VideoClip& clip,
                    const TrackerConfig& config, WorkerPool* pool) {
  const auto model = bind_model(spec, bind_params(params, false));
  const Tensor<S> raw = tracking_forward(spec, model, clip_frames<S>(clip), pool).value();
  const FeatureShape grid = spec.grid();
  const std::size_t P = grid.positions(), C = raw.dim(1);
  TrackerState state;
  for (std::size_t t = 0; t < clip.length(); ++t) {
    Tensor<S> frame(Shape{P, C}, std::vector<S>(raw.data().begin() + t * P * C, raw.data().begin() + (t + 1) * P * C));
    const int index = static_cast<int>(t);
    associate(state, index, decode_detections(frame, grid.height, grid.width, index, config.detect_threshold),
              config.association);
  }
  return state.tracks;
}

#define STV_MODEL_INSTANTIATE(S)                                                                                   \
  template ParamMap<S> init_params(const ModelSpec&, std::uint64_t);                                            \
  template void validate_params(const ModelSpec&, const ParamMap<S>&);                                          \
  template BoundModel<S> bind_model(const ModelSpec&, const VarMap<S>&);                                        \
  template TemporalFeatures<S> backbone(const ModelSpec&, const BoundModel<S>&, const Tensor<S>&, WorkerPool*); \
  template ActionOutput<S> action_forward(const ModelSpec&, const BoundModel<S>&, const Tensor<S>&, WorkerPool*); \
  template ad::Var<S> tracking_forward(const ModelSpec&, const BoundModel<S>&, const Tensor<S>&, WorkerPool*);  \
  template DetectionTargets<S> detection_targets(const ModelSpec&, const TrackSet&);                            \
  template Tensor<S> clip_frames(const VideoClip&);                                                             \
  template ad::Var<S> clip_loss(const ModelSpec&, const BoundModel<S>&, const VideoClip&, WorkerPool*);          \
  template int predict_class(const ModelSpec&, const ParamMap<S>&, const VideoClip&, WorkerPool*);              \
  template TrackSet track_clip(const ModelSpec&, const ParamMap<S>&, const VideoClip&, const TrackerConfig&,    \
                               WorkerPool*);

STV_MODEL_INSTANTIATE(float)
STV_MODEL_INSTANTIATE(double)

}  // namespace stv
