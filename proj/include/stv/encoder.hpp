#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "stv/autodiff.hpp"
#include "stv/params.hpp"

namespace stv {

class WorkerPool;

enum class Activation { relu, silu, none };

std::string activation_name(Activation a);
Activation parse_activation(const std::string& name);

struct ConvLayerSpec {
  std::size_t kernel = 3;
  std::size_t stride = 2;
  std::size_t padding = 1;
  std::size_t channels = 8;
  Activation activation = Activation::relu;
};

/// Frame geometry plus the conv stack. When `features` differs from the
/// last layer's channel count a linear 1×1 projection to `features` follows.
struct EncoderSpec {
  std::size_t height = 16, width = 16, channels = 1;
  std::vector<ConvLayerSpec> layers{ConvLayerSpec{}, ConvLayerSpec{}};
  std::size_t features = 8;

  bool projects() const { return layers.empty() || layers.back().channels != features; }
};

/// H'×W'×D produced by an encoder.
struct FeatureShape {
  std::size_t height = 0, width = 0, depth = 0;
  std::size_t positions() const { return height * width; }
};

/// Applies the conv output-size formula layer by layer.
FeatureShape encoder_output(const EncoderSpec& spec);

std::vector<std::pair<std::string, Shape>> encoder_param_shapes(const EncoderSpec& spec);

template <typename S>
struct ConvLayerParams {
  ad::Var<S> kernels;  // k×k×Cin×Cout
  ad::Var<S> bias;     // Cout
  ConvLayerSpec spec;
};

template <typename S>
struct SpatialEncoderParams {
  std::vector<ConvLayerParams<S>> layers;
  ad::Var<S> projection;       // Cin×D, empty when the encoder does not project
  ad::Var<S> projection_bias;  // D
  Shape input;                 // H×W×C
  FeatureShape output;
};

/// Looks up the encoder parameters by name ("encoder.conv0.kernel", ...).
template <typename S>
SpatialEncoderParams<S> bind_encoder(const EncoderSpec& spec, const VarMap<S>& params);

template <typename S>
struct FeatureMap {
  ad::Var<S> values;  // H'×W'×D
  std::size_t frame = 0;
};

/// x_t → F_t for one H×W×C frame.
template <typename S>
FeatureMap<S> encode_frame(const ad::Var<S>& frame, const SpatialEncoderParams<S>& params, std::size_t index = 0);

/// Encodes every frame of a T×H×W×C clip. Frames are independent and may run
/// on `pool`; the result is ordered by frame index either way.
template <typename S>
std::vector<FeatureMap<S>> encode_clip(const Tensor<S>& frames, const SpatialEncoderParams<S>& params,
                                       WorkerPool* pool = nullptr);

}  // namespace stv
