#pragma once

#include <cstdint>

#include "stv/params.hpp"

namespace stv {

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEpsilon = 1e-8;

template <typename S>
struct AdamState {
  ParamMap<S> m, v;  // first and second moment estimates
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update. Parameters absent from `grads` see a zero
/// gradient. Moments are created on first use.
template <typename S>
void adam_step(ParamMap<S>& params, const ParamMap<S>& grads, AdamState<S>& state, double lr);

struct Schedule {
  double initial = 1e-4;
  int every = 30;
  double factor = 0.1;
};

/// initial · factor^floor(epoch / every)
double lr_schedule(const Schedule& schedule, int epoch);

}  // namespace stv
