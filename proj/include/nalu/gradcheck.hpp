#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "nalu/layers.hpp"
#include "nalu/model.hpp"
#include "nalu/random.hpp"

namespace nalu {

/// Worst disagreement between analytic and central-difference gradients
/// for one tensor of one layer kind.
struct GradCheckResult {
  std::string subject;  // layer or model kind
  std::string tensor;
  double max_rel_error = 0.0;
  std::size_t entries = 0;
};

/// |a - n| / max(|a|, |n|, floor). The floor keeps entries whose gradient
/// is essentially zero from dividing by rounding noise.
inline double gradient_rel_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

namespace detail {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double lo, double hi) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = uniform(rng, lo, hi);
  return m;
}

// Inputs with magnitude in [0.5, 2] and random sign.
inline Matrix random_input(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.values()) {
    const double mag = uniform(rng, 0.5, 2.0);
    v = (rng() & 1u) ? mag : -mag;
  }
  return m;
}

inline void merge(std::vector<GradCheckResult>& into, const GradCheckResult& r) {
  for (auto& existing : into) {
    if (existing.subject == r.subject && existing.tensor == r.tensor) {
      existing.max_rel_error = std::max(existing.max_rel_error, r.max_rel_error);
      existing.entries += r.entries;
      return;
    }
  }
  into.push_back(r);
}

}  // namespace detail

/// Checks every parameter tensor of a single layer (out x in = 3 x 4 by
/// default) and its input gradient against central differences of the
/// scalar loss sum(c * layer(x)) with random c.
inline std::vector<GradCheckResult> gradient_check_layer(LayerKind kind, std::size_t instances,
                                                         std::uint64_t seed, double h = 1e-5,
                                                         std::size_t out_dim = 3,
                                                         std::size_t in_dim = 4,
                                                         std::size_t batch = 5) {
  std::vector<GradCheckResult> results;
  Rng rng = make_rng(seed);
  for (std::size_t n = 0; n < instances; ++n) {
    Layer layer = init_params(kind, in_dim, out_dim, rng);
    for_each_tensor(layer, [&](std::string_view, Matrix& t) {
      for (double& v : t.values()) v = uniform(rng, -1.5, 1.5);
    });
    const Matrix x = detail::random_input(batch, in_dim, rng);
    const Matrix c = detail::random_matrix(batch, out_dim, rng, -1.0, 1.0);

    auto loss = [&](const Layer& l, const Matrix& input) {
      LayerCache cache;
      const Matrix& y = forward_layer(l, input, cache);
      double s = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) s += c.values()[i] * y.values()[i];
      return s;
    };

    LayerCache cache;
    forward_layer(layer, x, cache);
    Layer grad;
    const Matrix dx = backward_layer(layer, x, cache, c, grad, true);

    std::vector<const Matrix*> grads;
    for_each_tensor(grad, [&](std::string_view, const Matrix& g) { grads.push_back(&g); });
    std::size_t idx = 0;
    for_each_tensor(layer, [&](std::string_view name, Matrix& t) {
      GradCheckResult r{std::string(to_string(kind)), std::string(name), 0.0, 0};
      const Matrix& g = *grads[idx++];
      for (std::size_t i = 0; i < t.size(); ++i) {
        const double saved = t.values()[i];
        t.values()[i] = saved + h;
        const double up = loss(layer, x);
        t.values()[i] = saved - h;
        const double down = loss(layer, x);
        t.values()[i] = saved;
        const double numeric = (up - down) / (2.0 * h);
        r.max_rel_error = std::max(r.max_rel_error, gradient_rel_error(g.values()[i], numeric));
        ++r.entries;
      }
      detail::merge(results, r);
    });

    GradCheckResult r{std::string(to_string(kind)), "input", 0.0, 0};
    Matrix xp = x;
    for (std::size_t i = 0; i < xp.size(); ++i) {
      const double saved = xp.values()[i];
      xp.values()[i] = saved + h;
      const double up = loss(layer, xp);
      xp.values()[i] = saved - h;
      const double down = loss(layer, xp);
      xp.values()[i] = saved;
      r.max_rel_error =
          std::max(r.max_rel_error, gradient_rel_error(dx.values()[i], (up - down) / (2.0 * h)));
      ++r.entries;
    }
    detail::merge(results, r);
  }
  return results;
}

/// End-to-end check of a two-layer model under the training loss (MSE).
inline std::vector<GradCheckResult> gradient_check_model(ModelKind kind, std::size_t instances,
                                                         std::uint64_t seed, double h = 1e-5,
                                                         std::size_t input_size = 4,
                                                         std::size_t hidden = 3,
                                                         std::size_t batch = 5) {
  std::vector<GradCheckResult> results;
  Rng rng = make_rng(seed);
  for (std::size_t n = 0; n < instances; ++n) {
    ModelParams model = init_model(kind, input_size, hidden, rng);
    for_each_tensor(model, [&](int, std::string_view, Matrix& t) {
      for (double& v : t.values()) v = uniform(rng, -1.5, 1.5);
    });
    const Matrix x = detail::random_input(batch, input_size, rng);
    std::vector<double> target(batch);
    for (double& v : target) v = uniform(rng, -2.0, 2.0);

    auto loss = [&](const ModelParams& m) { return mse_loss(predict(m, x), target, nullptr); };
    const ForwardPass pass = forward(model, x);
    Matrix d_out;
    mse_loss(pass.output(), target, &d_out);
    const ModelParams grad = backward(model, x, pass, d_out);

    std::vector<const Matrix*> grads;
    for_each_tensor(grad, [&](int, std::string_view, const Matrix& g) { grads.push_back(&g); });
    std::size_t idx = 0;
    for_each_tensor(model, [&](int layer, std::string_view name, Matrix& t) {
      GradCheckResult r{std::string(to_string(kind)),
                        "layer" + std::to_string(layer) + "." + std::string(name), 0.0, 0};
      const Matrix& g = *grads[idx++];
      for (std::size_t i = 0; i < t.size(); ++i) {
        const double saved = t.values()[i];
        t.values()[i] = saved + h;
        const double up = loss(model);
        t.values()[i] = saved - h;
        const double down = loss(model);
        t.values()[i] = saved;
        r.max_rel_error =
            std::max(r.max_rel_error, gradient_rel_error(g.values()[i], (up - down) / (2.0 * h)));
        ++r.entries;
      }
      detail::merge(results, r);
    });
  }
  return results;
}

}  // namespace nalu
