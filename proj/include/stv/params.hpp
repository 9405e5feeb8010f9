#pragma once

#include <map>
#include <string>

#include "stv/autodiff.hpp"

namespace stv {

template <typename S>
using ParamMap = std::map<std::string, Tensor<S>>;

template <typename S>
using VarMap = std::map<std::string, ad::Var<S>>;

/// Wraps every tensor as a named parameter leaf.
template <typename S>
VarMap<S> bind_params(const ParamMap<S>& values, bool requires_grad) {
  VarMap<S> vars;
  for (const auto& [name, t] : values) vars.emplace(name, ad::parameter(name, t, requires_grad));
  return vars;
}

template <typename S>
const ad::Var<S>& require_param(const VarMap<S>& params, const std::string& name, const Shape& shape) {
  auto it = params.find(name);
  if (it == params.end()) throw Error("missing_parameter", "parameter '" + name + "' not provided");
  if (it->second.shape() != shape) {
    throw Error("shape_mismatch", "parameter '" + name + "' has shape " + shape_string(it->second.shape()) +
                                      ", expected " + shape_string(shape));
  }
  return it->second;
}

}  // namespace stv
