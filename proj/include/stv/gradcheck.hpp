#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>

#include "stv/autodiff.hpp"
#include "stv/params.hpp"

namespace stv {

/// Scalar-valued function of named parameters, expressed as a graph.
template <typename S>
using ScalarFn = std::function<ad::Var<S>(const VarMap<S>&)>;

struct GradcheckReport {
  double max_error = 0.0;
  std::map<std::string, double> per_param;  // max error over each tensor's coordinates
};

/// Compares backward() against central differences (f(p+eps) − f(p−eps)) / 2eps
/// coordinate by coordinate. The error per coordinate is
/// |analytic − numeric| / max(1, |analytic|, |numeric|).
template <typename S>
GradcheckReport gradcheck(const ScalarFn<S>& f, const ParamMap<S>& point, S eps) {
  if (!(eps > 0)) throw Error("bad_argument", "gradcheck eps must be positive");

  auto evaluate = [&](const ParamMap<S>& values) {
    const S v = f(bind_params(values, false)).value().item();
    if (!std::isfinite(v)) throw Error("non_finite", "gradcheck: function is not finite at a probe point");
    return v;
  };

  const ad::Var<S> root = f(bind_params(point, true));
  if (!std::isfinite(root.value().item())) throw Error("non_finite", "gradcheck: function is not finite");
  const ad::Gradients<S> analytic = ad::backward(root);

  GradcheckReport report;
  ParamMap<S> probe = point;
  for (const auto& [name, base] : point) {
    double worst = 0.0;
    auto found = analytic.find(name);
    Tensor<S>& slot = probe.at(name);
    for (std::size_t i = 0; i < base.size(); ++i) {
      slot[i] = base[i] + eps;
      const S up = evaluate(probe);
      slot[i] = base[i] - eps;
      const S down = evaluate(probe);
      slot[i] = base[i];
      const double numeric = (static_cast<double>(up) - static_cast<double>(down)) / (2.0 * eps);
      const double exact = found == analytic.end() ? 0.0 : static_cast<double>(found->second[i]);
      const double denom = std::max({1.0, std::abs(exact), std::abs(numeric)});
      worst = std::max(worst, std::abs(exact - numeric) / denom);
    }
    report.per_param[name] = worst;
    report.max_error = std::max(report.max_error, worst);
  }
  return report;
}

}  // namespace stv
