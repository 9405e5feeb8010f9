#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "stv/temporal.hpp"

namespace stv {

std::vector<std::pair<std::string, Shape>> attention_param_shapes(std::size_t features);

template <typename S>
struct AttentionParams {
  ad::Var<S> spatial_weight, spatial_bias;    // D×1, {1}
  ad::Var<S> temporal_weight, temporal_bias;  // D×1, {1}
};

template <typename S>
AttentionParams<S> bind_attention(std::size_t features, const VarMap<S>& params);

template <typename S>
struct AttentionMaps {
  ad::Var<S> spatial;   // T×H'×W', each frame sums to 1
  ad::Var<S> temporal;  // T, sums to 1
};

/// α_t = softmax over positions of G_t W_s + b_s.
template <typename S>
ad::Var<S> spatial_attention(const TemporalFeatures<S>& g, const AttentionParams<S>& params);

/// β = softmax over frames of avgpool(G_t) W_t + b_t.
template <typename S>
ad::Var<S> temporal_attention(const TemporalFeatures<S>& g, const AttentionParams<S>& params);

/// Uniform weights 1/P per frame and 1/T per frame, carrying no parameters.
template <typename S>
AttentionMaps<S> uniform_attention(const TemporalFeatures<S>& g);

template <typename S>
struct AttentionOutput {
  ad::Var<S> representation;  // D
  AttentionMaps<S> maps;
};

/// R = Σ_t β_t Σ_p α_{t,p} G_{t,p}. With `ablated` the maps are uniform and the
/// attention parameters are not used.
template <typename S>
AttentionOutput<S> attend(const TemporalFeatures<S>& g, const AttentionParams<S>& params, bool ablated);

/// Rows of `map,t,row,col,weight`; temporal rows leave row and col empty.
template <typename S>
void write_attention_csv(std::ostream& out, const AttentionMaps<S>& maps, bool header = true);

}  // namespace stv
