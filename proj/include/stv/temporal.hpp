#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "stv/encoder.hpp"

namespace stv {

enum class TemporalMode { sequential, parallel };

std::string temporal_mode_name(TemporalMode m);
TemporalMode parse_temporal_mode(const std::string& name);

struct TemporalOptions {
  TemporalMode mode = TemporalMode::parallel;
  std::size_t chunk = 0;  // scan block length; 0 means ceil(T / workers)
  WorkerPool* pool = nullptr;
};

std::vector<std::pair<std::string, Shape>> temporal_param_shapes(std::size_t features);

/// u = x W_in + b_in, a = sigmoid(x W_g + b_g), h_t = a_t ⊙ h_{t-1} + u_t, G = h W_out.
template <typename S>
struct TemporalParams {
  ad::Var<S> in_weight, in_bias;
  ad::Var<S> gate_weight, gate_bias;
  ad::Var<S> out_weight;
};

template <typename S>
TemporalParams<S> bind_temporal(std::size_t features, const VarMap<S>& params);

template <typename S>
struct TemporalFeatures {
  ad::Var<S> values;  // T×H'×W'×D
};

/// Runs the recurrence over every spatial position independently with h_0 = 0.
/// Sequential mode advances one frame at a time; parallel mode evaluates the
/// projections for all frames at once and uses the chunked scan.
template <typename S>
TemporalFeatures<S> temporal_forward(const std::vector<FeatureMap<S>>& features, const TemporalParams<S>& params,
                                     const TemporalOptions& options);

}  // namespace stv
