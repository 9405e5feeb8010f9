#include "stv/attention.hpp"

#include <ostream>

namespace stv {

std::vector<std::pair<std::string, Shape>> attention_param_shapes(std::size_t d) {
  return {{"attention.spatial.weight", {d, 1}},
          {"attention.spatial.bias", {1}},
          {"attention.temporal.weight", {d, 1}},
          {"attention.temporal.bias", {1}}};
}

template <typename S>
AttentionParams<S> bind_attention(std::size_t features, const VarMap<S>& params) {
  AttentionParams<S> out;
  auto get = [&](const std::string& name, const Shape& shape) { return require_param(params, name, shape); };
  out.spatial_weight = get("attention.spatial.weight", {features, 1});
  out.spatial_bias = get("attention.spatial.bias", {1});
  out.temporal_weight = get("attention.temporal.weight", {features, 1});
  out.temporal_bias = get("attention.temporal.bias", {1});
  return out;
}

namespace {

template <typename S>
void check_features(const TemporalFeatures<S>& g, const ad::Var<S>& weight) {
  const Shape& s = g.values.shape();
  if (s.size() != 4) throw Error("shape_mismatch", "attention expects T×H'×W'×D features, got " + shape_string(s));
  if (weight.shape() != Shape{s[3], 1}) {
    throw Error("shape_mismatch", "attention weight " + shape_string(weight.shape()) + " does not match feature depth " +
                                      std::to_string(s[3]));
  }
}

}  // namespace

template <typename S>
ad::Var<S> spatial_attention(const TemporalFeatures<S>& g, const AttentionParams<S>& params) {
  check_features(g, params.spatial_weight);
  const Shape& s = g.values.shape();
  const std::size_t T = s[0], P = s[1] * s[2], D = s[3];
  auto scores = ad::add_bias(ad::matmul(ad::reshape(g.values, {T * P, D}), params.spatial_weight), params.spatial_bias);
  return ad::reshape(ad::softmax(ad::reshape(scores, {T, P}), 1), {T, s[1], s[2]});
}

template <typename S>
ad::Var<S> temporal_attention(const TemporalFeatures<S>& g, const AttentionParams<S>& params) {
  check_features(g, params.temporal_weight);
  const std::size_t T = g.values.shape()[0];
  auto scores = ad::add_bias(ad::matmul(ad::frame_avg_pool(g.values), params.temporal_weight), params.temporal_bias);
  return ad::softmax(ad::reshape(scores, {T}), 0);
}

template <typename S>
AttentionMaps<S> uniform_attention(const TemporalFeatures<S>& g) {
  const Shape& s = g.values.shape();
  if (s.size() != 4) throw Error("shape_mismatch", "attention expects T×H'×W'×D features, got " + shape_string(s));
  const std::size_t T = s[0], P = s[1] * s[2];
  return AttentionMaps<S>{ad::constant(Tensor<S>(Shape{T, s[1], s[2]}, S(1) / static_cast<S>(P))),
                          ad::constant(Tensor<S>(Shape{T}, S(1) / static_cast<S>(T)))};
}

template <typename S>
AttentionOutput<S> attend(const TemporalFeatures<S>& g, const AttentionParams<S>& params, bool ablated) {
  AttentionMaps<S> maps =
      ablated ? uniform_attention(g) : AttentionMaps<S>{spatial_attention(g, params), temporal_attention(g, params)};
  auto r = ad::fuse(g.values, maps.spatial, maps.temporal);
  return AttentionOutput<S>{r, maps};
}

template <typename S>
void write_attention_csv(std::ostream& out, const AttentionMaps<S>& maps, bool header) {
  if (header) out << "map,t,row,col,weight\n";
  const auto& a = maps.spatial.value();
  const std::size_t T = a.dim(0), H = a.dim(1), W = a.dim(2);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < H; ++i)
      for (std::size_t j = 0; j < W; ++j) out << "spatial," << t << ',' << i << ',' << j << ',' << a[(t * H + i) * W + j] << '\n';
  const auto& b = maps.temporal.value();
  for (std::size_t t = 0; t < b.size(); ++t) out << "temporal," << t << ",,," << b[t] << '\n';
}

template AttentionParams<float> bind_attention(std::size_t, const VarMap<float>&);
template AttentionParams<double> bind_attention(std::size_t, const VarMap<double>&);
template ad::Var<float> spatial_attention(const TemporalFeatures<float>&, const AttentionParams<float>&);
template ad::Var<double> spatial_attention(const TemporalFeatures<double>&, const AttentionParams<double>&);
template ad::Var<float> temporal_attention(const TemporalFeatures<float>&, const AttentionParams<float>&);
template ad::Var<double> temporal_attention(const TemporalFeatures<double>&, const AttentionParams<double>&);
template AttentionMaps<float> uniform_attention(const TemporalFeatures<float>&);
template AttentionMaps<double> uniform_attention(const TemporalFeatures<double>&);
template AttentionOutput<float> attend(const TemporalFeatures<float>&, const AttentionParams<float>&, bool);
template AttentionOutput<double> attend(const TemporalFeatures<double>&, const AttentionParams<double>&, bool);
template void write_attention_csv(std::ostream&, const AttentionMaps<float>&, bool);
template void write_attention_csv(std::ostream&, const AttentionMaps<double>&, bool);

}  // namespace stv
