#include "stv/optim.hpp"

#include <cmath>

namespace stv {

template <typename S>
void adam_step(ParamMap<S>& params, const ParamMap<S>& grads, AdamState<S>& state, double lr) {
  for (const auto& [name, g] : grads) {
    auto it = params.find(name);
    if (it == params.end()) throw Error("shape_mismatch", "gradient for unknown parameter '" + name + "'");
    if (g.shape() != it->second.shape()) {
      throw Error("shape_mismatch", "gradient of '" + name + "' has shape " + shape_string(g.shape()) + ", parameter " +
                                        shape_string(it->second.shape()));
    }
    if (!g.all_finite()) throw Error("non_finite", "gradient of '" + name + "' is not finite");
  }
  const std::uint64_t t = state.step + 1;
  const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(t));
  for (auto& [name, p] : params) {
    auto& m = state.m.try_emplace(name, p.shape()).first->second;
    auto& v = state.v.try_emplace(name, p.shape()).first->second;
    if (m.shape() != p.shape() || v.shape() != p.shape()) {
      throw Error("shape_mismatch", "moment estimates of '" + name + "' do not match the parameter");
    }
    auto g = grads.find(name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g == grads.end() ? 0.0 : static_cast<double>(g->second[i]);
      const double mi = kAdamBeta1 * static_cast<double>(m[i]) + (1.0 - kAdamBeta1) * gi;
      const double vi = kAdamBeta2 * static_cast<double>(v[i]) + (1.0 - kAdamBeta2) * gi * gi;
      m[i] = static_cast<S>(mi);
      v[i] = static_cast<S>(vi);
      p[i] = static_cast<S>(static_cast<double>(p[i]) - lr * (mi / c1) / (std::sqrt(vi / c2) + kAdamEpsilon));
    }
  }
  state.step = t;
}

double lr_schedule(const Schedule& schedule, int epoch) {
  if (epoch < 0) throw Error("bad_argument", "epoch must be non-negative");
  if (schedule.every <= 0) return schedule.initial;
  return schedule.initial * std::pow(schedule.factor, epoch / schedule.every);
}

template void adam_step(ParamMap<float>&, const ParamMap<float>&, AdamState<float>&, double);
template void adam_step(ParamMap<double>&, const ParamMap<double>&, AdamState<double>&, double);

}  // namespace stv
