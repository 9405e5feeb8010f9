#include "stv/temporal.hpp"

#include "stv/worker_pool.hpp"

namespace stv {

std::string temporal_mode_name(TemporalMode m) { return m == TemporalMode::sequential ? "sequential" : "parallel"; }

TemporalMode parse_temporal_mode(const std::string& name) {
  if (name == "sequential") return TemporalMode::sequential;
  if (name == "parallel") return TemporalMode::parallel;
  throw Error("config", "unknown temporal mode '" + name + "'");
}

std::vector<std::pair<std::string, Shape>> temporal_param_shapes(std::size_t d) {
  return {{"temporal.in.weight", {d, d}},   {"temporal.in.bias", {d}},   {"temporal.gate.weight", {d, d}},
          {"temporal.gate.bias", {d}},      {"temporal.out.weight", {d, d}}};
}

template <typename S>
TemporalParams<S> bind_temporal(std::size_t features, const VarMap<S>& params) {
  auto get = [&](const std::string& name, const Shape& shape) { return require_param(params, name, shape); };
  const std::size_t d = features;
  return TemporalParams<S>{get("temporal.in.weight", {d, d}), get("temporal.in.bias", {d}),
                           get("temporal.gate.weight", {d, d}), get("temporal.gate.bias", {d}),
                           get("temporal.out.weight", {d, d})};
}

template <typename S>
TemporalFeatures<S> temporal_forward(const std::vector<FeatureMap<S>>& features, const TemporalParams<S>& params,
                                     const TemporalOptions& options) {
  if (features.empty()) throw Error("bad_shape", "temporal module needs at least one frame");
  const Shape frame_shape = features.front().values.shape();
  if (frame_shape.size() != 3) throw Error("shape_mismatch", "feature maps must be H'×W'×D");
  const std::size_t T = features.size();
  const std::size_t P = frame_shape[0] * frame_shape[1];
  const std::size_t D = frame_shape[2];
  if (params.in_weight.shape() != Shape{D, D}) {
    throw Error("shape_mismatch", "feature depth " + std::to_string(D) + " does not match temporal weights " +
                                      shape_string(params.in_weight.shape()));
  }
  for (const auto& f : features) {
    if (f.values.shape() != frame_shape) {
      throw Error("shape_mismatch", "frame " + std::to_string(f.frame) + " has feature shape " +
                                        shape_string(f.values.shape()) + ", expected " + shape_string(frame_shape));
    }
  }

  if (options.mode == TemporalMode::sequential) {
    std::vector<ad::Var<S>> outputs;
    outputs.reserve(T);
    ad::Var<S> h = ad::constant(Tensor<S>(Shape{P, D}));
    for (const auto& f : features) {
      const auto x = ad::reshape(f.values, {P, D});
      const auto u = ad::add_bias(ad::matmul(x, params.in_weight), params.in_bias);
      const auto a = ad::sigmoid(ad::add_bias(ad::matmul(x, params.gate_weight), params.gate_bias));
      h = ad::add(ad::mul(a, h), u);
      outputs.push_back(ad::reshape(ad::matmul(h, params.out_weight), frame_shape));
    }
    return TemporalFeatures<S>{ad::stack(outputs)};
  }

  WorkerPool* pool = options.pool;
  const std::size_t workers = pool ? pool->size() : 1;
  std::vector<ad::Var<S>> frames;
  frames.reserve(T);
  for (const auto& f : features) frames.push_back(f.values);
  const auto x = ad::reshape(ad::stack(frames), {T * P, D});
  const auto u = ad::add_bias(ad::matmul(x, params.in_weight, pool), params.in_bias);
  const auto a = ad::sigmoid(ad::add_bias(ad::matmul(x, params.gate_weight, pool), params.gate_bias));
  ad::RecurrenceOptions rec;
  rec.parallel = true;
  rec.chunk = options.chunk ? options.chunk : default_chunk(T, workers);
  rec.pool = pool;
  const auto h = ad::linear_recurrence(ad::reshape(a, {T, P * D}), ad::reshape(u, {T, P * D}),
                                       ad::constant(Tensor<S>(Shape{P * D})), rec);
  const auto g = ad::matmul(ad::reshape(h, {T * P, D}), params.out_weight, pool);
  return TemporalFeatures<S>{ad::reshape(g, {T, frame_shape[0], frame_shape[1], D})};
}

template TemporalParams<float> bind_temporal(std::size_t, const VarMap<float>&);
template TemporalParams<double> bind_temporal(std::size_t, const VarMap<double>&);
template TemporalFeatures<float> temporal_forward(const std::vector<FeatureMap<float>>&, const TemporalParams<float>&,
                                                  const TemporalOptions&);
template TemporalFeatures<double> temporal_forward(const std::vector<FeatureMap<double>>&,
                                                   const TemporalParams<double>&, const TemporalOptions&);

}  // namespace stv
