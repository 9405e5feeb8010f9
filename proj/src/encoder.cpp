#include "stv/encoder.hpp"

#include "stv/worker_pool.hpp"

namespace stv {

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::silu: return "silu";
    case Activation::none: return "none";
  }
  return "none";
}

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "silu") return Activation::silu;
  if (name == "none" || name == "linear") return Activation::none;
  throw Error("config", "unknown activation '" + name + "'");
}

FeatureShape encoder_output(const EncoderSpec& spec) {
  std::size_t h = spec.height, w = spec.width, c = spec.channels;
  for (const auto& layer : spec.layers) {
    h = conv_output_size(h, layer.kernel, layer.stride, layer.padding);
    w = conv_output_size(w, layer.kernel, layer.stride, layer.padding);
    c = layer.channels;
    if (c == 0) throw Error("config", "encoder layer with zero channels");
  }
  return FeatureShape{h, w, spec.features};
}

std::vector<std::pair<std::string, Shape>> encoder_param_shapes(const EncoderSpec& spec) {
  std::vector<std::pair<std::string, Shape>> shapes;
  std::size_t cin = spec.channels;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    const std::string prefix = "encoder.conv" + std::to_string(i);
    shapes.push_back({prefix + ".kernel", {l.kernel, l.kernel, cin, l.channels}});
    shapes.push_back({prefix + ".bias", {l.channels}});
    cin = l.channels;
  }
  if (spec.projects()) {
    shapes.push_back({"encoder.proj.weight", {cin, spec.features}});
    shapes.push_back({"encoder.proj.bias", {spec.features}});
  }
  return shapes;
}

namespace {

template <typename S>
ad::Var<S> activate(const ad::Var<S>& x, Activation a) {
  switch (a) {
    case Activation::relu: return ad::relu(x);
    case Activation::silu: return ad::silu(x);
    case Activation::none: return x;
  }
  return x;
}

}  // namespace

template <typename S>
SpatialEncoderParams<S> bind_encoder(const EncoderSpec& spec, const VarMap<S>& params) {
  SpatialEncoderParams<S> out;
  out.input = {spec.height, spec.width, spec.channels};
  out.output = encoder_output(spec);
  std::map<std::string, ad::Var<S>> found;
  for (const auto& [name, shape] : encoder_param_shapes(spec)) found[name] = require_param(params, name, shape);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const std::string prefix = "encoder.conv" + std::to_string(i);
    out.layers.push_back({found.at(prefix + ".kernel"), found.at(prefix + ".bias"), spec.layers[i]});
  }
  if (spec.projects()) {
    out.projection = found.at("encoder.proj.weight");
    out.projection_bias = found.at("encoder.proj.bias");
  }
  return out;
}

template <typename S>
FeatureMap<S> encode_frame(const ad::Var<S>& frame, const SpatialEncoderParams<S>& params, std::size_t index) {
  if (frame.shape() != params.input) {
    throw Error("shape_mismatch", "frame " + std::to_string(index) + " has shape " + shape_string(frame.shape()) +
                                      ", encoder expects " + shape_string(params.input));
  }
  require_finite(frame.value(), "encoder input");
  ad::Var<S> x = frame;
  for (const auto& layer : params.layers) {
    auto y = ad::conv2d(x, layer.kernels, layer.spec.stride, layer.spec.padding);
    const Shape shape = y.shape();
    y = ad::add_bias(ad::reshape(y, {shape[0] * shape[1], shape[2]}), layer.bias);
    x = ad::reshape(activate(y, layer.spec.activation), shape);
  }
  if (params.projection) {
    const Shape shape = x.shape();
    auto y = ad::add_bias(ad::matmul(ad::reshape(x, {shape[0] * shape[1], shape[2]}), params.projection),
                          params.projection_bias);
    x = ad::reshape(y, {shape[0], shape[1], params.output.depth});
  }
  require_finite(x.value(), "encoder activations");
  return FeatureMap<S>{x, index};
}

template <typename S>
std::vector<FeatureMap<S>> encode_clip(const Tensor<S>& frames, const SpatialEncoderParams<S>& params,
                                       WorkerPool* pool) {
  if (frames.rank() != 4) throw Error("shape_mismatch", "clip must be T×H×W×C, got " + shape_string(frames.shape()));
  const std::size_t T = frames.dim(0);
  const Shape frame_shape{frames.dim(1), frames.dim(2), frames.dim(3)};
  const std::size_t block = shape_numel(frame_shape);
  std::vector<FeatureMap<S>> out(T);
  parallel_for(pool, T, [&](std::size_t t) {
    Tensor<S> frame(frame_shape, std::vector<S>(frames.data().begin() + t * block, frames.data().begin() + (t + 1) * block));
    try {
      out[t] = encode_frame(ad::constant(std::move(frame)), params, t);
    } catch (const Error& e) {
      throw Error(e.code(), "frame " + std::to_string(t) + ": " + e.what());
    }
  });
  return out;
}

template SpatialEncoderParams<float> bind_encoder(const EncoderSpec&, const VarMap<float>&);
template SpatialEncoderParams<double> bind_encoder(const EncoderSpec&, const VarMap<double>&);
template FeatureMap<float> encode_frame(const ad::Var<float>&, const SpatialEncoderParams<float>&, std::size_t);
template FeatureMap<double> encode_frame(const ad::Var<double>&, const SpatialEncoderParams<double>&, std::size_t);
template std::vector<FeatureMap<float>> encode_clip(const Tensor<float>&, const SpatialEncoderParams<float>&,
                                                    WorkerPool*);
template std::vector<FeatureMap<double>> encode_clip(const Tensor<double>&, const SpatialEncoderParams<double>&,
                                                     WorkerPool*);

}  // namespace stv
