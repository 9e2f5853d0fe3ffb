#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "nalu/model.hpp"

namespace nalu {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment estimates shaped like the model, plus the step count.
struct AdamState {
  ModelParams first_moment;
  ModelParams second_moment;
  std::uint64_t step = 0;

  static AdamState for_model(const ModelParams& model) {
    return {zeros_like(model), zeros_like(model), 0};
  }
};

namespace detail {
inline std::vector<Matrix*> tensor_list(ModelParams& model) {
  std::vector<Matrix*> out;
  for_each_tensor(model, [&](int, std::string_view, Matrix& t) { out.push_back(&t); });
  return out;
}
inline std::vector<const Matrix*> tensor_list(const ModelParams& model) {
  std::vector<const Matrix*> out;
  for_each_tensor(model, [&](int, std::string_view, const Matrix& t) { out.push_back(&t); });
  return out;
}
}  // namespace detail

/// One bias-corrected Adam update over every tensor of the model.
inline void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state,
                      const AdamConfig& config) {
  auto p = detail::tensor_list(params);
  auto g = detail::tensor_list(grads);
  auto m = detail::tensor_list(state.first_moment);
  auto v = detail::tensor_list(state.second_moment);
  if (p.size() != g.size() || p.size() != m.size() || p.size() != v.size()) {
    throw DimensionError("adam_step: parameter/gradient/state structure mismatch");
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t k = 0; k < p.size(); ++k) {
    require_same_shape(*p[k], *g[k], "adam_step");
    require_same_shape(*p[k], *m[k], "adam_step");
    auto pv = p[k]->values();
    auto gv = g[k]->values();
    auto mv = m[k]->values();
    auto vv = v[k]->values();
    for (std::size_t i = 0; i < pv.size(); ++i) {
      mv[i] = config.beta1 * mv[i] + (1.0 - config.beta1) * gv[i];
      vv[i] = config.beta2 * vv[i] + (1.0 - config.beta2) * gv[i] * gv[i];
      const double m_hat = mv[i] / correction1;
      const double v_hat = vv[i] / correction2;
      pv[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
  }
}

}  // namespace nalu
