#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <variant>

#include "nalu/matrix.hpp"
#include "nalu/random.hpp"

namespace nalu {

/// Added inside log(|x| + eps) by the multiplicative unit.
inline constexpr double kLayerEpsilon = 1e-7;

enum class LayerKind { Linear, NacAdd, NacMul, Nalu };

inline std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Linear: return "Linear";
    case LayerKind::NacAdd: return "NAC+";
    case LayerKind::NacMul: return "NAC*";
    case LayerKind::Nalu: return "NALU";
  }
  return "?";
}

struct LinearParams {
  Matrix weight;  // out x in
};

struct NacParams {
  Matrix w_hat;  // out x in
  Matrix m_hat;  // out x in
};

struct NaluParams {
  NacParams add_unit;
  NacParams mul_unit;
  Matrix gate;  // out x in
};

struct Layer {
  LayerKind kind = LayerKind::Linear;
  std::variant<LinearParams, NacParams, NaluParams> params;

  const Matrix& first_tensor() const {
    return std::visit(
        [](const auto& p) -> const Matrix& {
          using P = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<P, LinearParams>) return p.weight;
          else if constexpr (std::is_same_v<P, NacParams>) return p.w_hat;
          else return p.gate;
        },
        params);
  }
  std::size_t in_dim() const { return first_tensor().cols(); }
  std::size_t out_dim() const { return first_tensor().rows(); }
};

/// Calls f(name, tensor) for every trainable tensor of the layer, in a
/// fixed order. Works for const and non-const layers.
template <typename L, typename F>
  requires std::is_same_v<std::remove_const_t<L>, Layer>
void for_each_tensor(L& layer, F&& f) {
  std::visit(
      [&](auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, LinearParams>) {
          f(std::string_view("weight"), p.weight);
        } else if constexpr (std::is_same_v<P, NacParams>) {
          f(std::string_view("w_hat"), p.w_hat);
          f(std::string_view("m_hat"), p.m_hat);
        } else {
          f(std::string_view("add.w_hat"), p.add_unit.w_hat);
          f(std::string_view("add.m_hat"), p.add_unit.m_hat);
          f(std::string_view("mul.w_hat"), p.mul_unit.w_hat);
          f(std::string_view("mul.m_hat"), p.mul_unit.m_hat);
          f(std::string_view("gate"), p.gate);
        }
      },
      layer.params);
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Matrix effective_weight(const NacParams& p) {
  require_same_shape(p.w_hat, p.m_hat, "effective_weight");
  Matrix w(p.w_hat.rows(), p.w_hat.cols());
  auto out = w.values();
  auto wh = p.w_hat.values();
  auto mh = p.m_hat.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(wh[i]) * sigmoid(mh[i]);
  return w;
}

namespace detail {

inline Matrix log_abs(const Matrix& x, double eps) {
  Matrix out(x.rows(), x.cols());
  auto o = out.values();
  auto v = x.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::log(std::abs(v[i]) + eps);
  return out;
}

inline void exp_inplace(Matrix& m) {
  for (double& v : m.values()) v = std::exp(v);
}

inline Matrix gate_values(const Matrix& gate, const Matrix& x) {
  Matrix g = matmul_transposed(x, gate);
  for (double& v : g.values()) v = sigmoid(v);
  return g;
}

// Chain rule through W = tanh(w_hat) * sigmoid(m_hat).
inline void effective_weight_backward(const NacParams& p, const Matrix& d_w, NacParams& grad) {
  grad.w_hat = Matrix(d_w.rows(), d_w.cols());
  grad.m_hat = Matrix(d_w.rows(), d_w.cols());
  auto wh = p.w_hat.values();
  auto mh = p.m_hat.values();
  auto dw = d_w.values();
  auto gw = grad.w_hat.values();
  auto gm = grad.m_hat.values();
  for (std::size_t i = 0; i < dw.size(); ++i) {
    const double t = std::tanh(wh[i]);
    const double s = sigmoid(mh[i]);
    gw[i] = dw[i] * (1.0 - t * t) * s;
    gm[i] = dw[i] * t * s * (1.0 - s);
  }
}

}  // namespace detail

inline Matrix forward_linear(const LinearParams& p, const Matrix& x) {
  require_cols(x, p.weight.cols(), "forward_linear");
  return matmul_transposed(x, p.weight);
}

inline Matrix forward_nac_add(const NacParams& p, const Matrix& x) {
  require_same_shape(p.w_hat, p.m_hat, "forward_nac_add");
  require_cols(x, p.w_hat.cols(), "forward_nac_add");
  return matmul_transposed(x, effective_weight(p));
}

inline Matrix forward_nac_mul(const NacParams& p, const Matrix& x, double eps = kLayerEpsilon) {
  require_same_shape(p.w_hat, p.m_hat, "forward_nac_mul");
  require_cols(x, p.w_hat.cols(), "forward_nac_mul");
  Matrix z = matmul_transposed(detail::log_abs(x, eps), effective_weight(p));
  detail::exp_inplace(z);
  return z;
}

inline Matrix forward_nalu(const NaluParams& p, const Matrix& x, double eps = kLayerEpsilon) {
  require_same_shape(p.add_unit.w_hat, p.gate, "forward_nalu");
  require_same_shape(p.mul_unit.w_hat, p.gate, "forward_nalu");
  const Matrix add = forward_nac_add(p.add_unit, x);
  const Matrix mul = forward_nac_mul(p.mul_unit, x, eps);
  Matrix out = detail::gate_values(p.gate, x);
  auto o = out.values();
  auto a = add.values();
  auto m = mul.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = o[i] * a[i] + (1.0 - o[i]) * m[i];
  return out;
}

/// Intermediates of one layer's forward pass, consumed by backward_layer.
struct LayerCache {
  Matrix output;
  Matrix weight_add;  // effective weight of the additive path (or linear weight)
  Matrix weight_mul;  // effective weight of the multiplicative path
  Matrix log_input;   // log(|x| + eps)
  Matrix add_out;
  Matrix mul_out;
  Matrix gate_out;
};

inline const Matrix& forward_layer(const Layer& layer, const Matrix& x, LayerCache& cache,
                                   double eps = kLayerEpsilon) {
  require_cols(x, layer.in_dim(), "forward_layer");
  switch (layer.kind) {
    case LayerKind::Linear: {
      const auto& p = std::get<LinearParams>(layer.params);
      cache.output = matmul_transposed(x, p.weight);
      break;
    }
    case LayerKind::NacAdd: {
      const auto& p = std::get<NacParams>(layer.params);
      cache.weight_add = effective_weight(p);
      cache.output = matmul_transposed(x, cache.weight_add);
      break;
    }
    case LayerKind::NacMul: {
      const auto& p = std::get<NacParams>(layer.params);
      cache.weight_mul = effective_weight(p);
      cache.log_input = detail::log_abs(x, eps);
      cache.output = matmul_transposed(cache.log_input, cache.weight_mul);
      detail::exp_inplace(cache.output);
      break;
    }
    case LayerKind::Nalu: {
      const auto& p = std::get<NaluParams>(layer.params);
      cache.weight_add = effective_weight(p.add_unit);
      cache.weight_mul = effective_weight(p.mul_unit);
      cache.log_input = detail::log_abs(x, eps);
      cache.add_out = matmul_transposed(x, cache.weight_add);
      cache.mul_out = matmul_transposed(cache.log_input, cache.weight_mul);
      detail::exp_inplace(cache.mul_out);
      cache.gate_out = detail::gate_values(p.gate, x);
      cache.output = Matrix(x.rows(), layer.out_dim());
      auto o = cache.output.values();
      auto a = cache.add_out.values();
      auto m = cache.mul_out.values();
      auto g = cache.gate_out.values();
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = g[i] * a[i] + (1.0 - g[i]) * m[i];
      break;
    }
  }
  return cache.output;
}

namespace detail {
// Gradient of a multiplicative unit; d_out is dL/dz for z = exp(log_input * W^T).
// Accumulates dL/dx into d_input when it is non-null.
inline void nac_mul_backward(const NacParams& p, const Matrix& x, const Matrix& log_input,
                             const Matrix& weight, const Matrix& out, const Matrix& d_out,
                             NacParams& grad, Matrix* d_input, double eps) {
  Matrix d_sum(d_out.rows(), d_out.cols());
  auto ds = d_sum.values();
  auto dz = d_out.values();
  auto z = out.values();
  for (std::size_t i = 0; i < ds.size(); ++i) ds[i] = dz[i] * z[i];
  effective_weight_backward(p, outer_accumulate(d_sum, log_input), grad);
  if (d_input != nullptr) {
    Matrix d_log = matmul(d_sum, weight);
    auto dl = d_log.values();
    auto xv = x.values();
    auto di = d_input->values();
    for (std::size_t i = 0; i < dl.size(); ++i) {
      const double sign = (xv[i] > 0.0) - (xv[i] < 0.0);
      di[i] += dl[i] * sign / (std::abs(xv[i]) + eps);
    }
  }
}
}  // namespace detail

/// Backpropagates d_out (batch x out) through one layer. grad receives the
/// parameter gradients with the layer's structure. Returns dL/dx when
/// need_input_grad is set, otherwise an empty matrix.
inline Matrix backward_layer(const Layer& layer, const Matrix& x, const LayerCache& cache,
                             const Matrix& d_out, Layer& grad, bool need_input_grad = true,
                             double eps = kLayerEpsilon) {
  require_cols(x, layer.in_dim(), "backward_layer");
  if (d_out.rows() != x.rows() || d_out.cols() != layer.out_dim()) {
    throw DimensionError("backward_layer: upstream gradient shape " + shape_string(d_out));
  }
  grad.kind = layer.kind;
  Matrix d_input;
  if (need_input_grad) d_input = Matrix(x.rows(), x.cols());

  switch (layer.kind) {
    case LayerKind::Linear: {
      const auto& p = std::get<LinearParams>(layer.params);
      grad.params = LinearParams{outer_accumulate(d_out, x)};
      if (need_input_grad) d_input = matmul(d_out, p.weight);
      break;
    }
    case LayerKind::NacAdd: {
      const auto& p = std::get<NacParams>(layer.params);
      NacParams g;
      detail::effective_weight_backward(p, outer_accumulate(d_out, x), g);
      grad.params = std::move(g);
      if (need_input_grad) d_input = matmul(d_out, cache.weight_add);
      break;
    }
    case LayerKind::NacMul: {
      const auto& p = std::get<NacParams>(layer.params);
      NacParams g;
      detail::nac_mul_backward(p, x, cache.log_input, cache.weight_mul, cache.output, d_out, g,
                               need_input_grad ? &d_input : nullptr, eps);
      grad.params = std::move(g);
      break;
    }
    case LayerKind::Nalu: {
      const auto& p = std::get<NaluParams>(layer.params);
      const std::size_t n = d_out.size();
      Matrix d_add(d_out.rows(), d_out.cols());
      Matrix d_mul(d_out.rows(), d_out.cols());
      Matrix d_pre(d_out.rows(), d_out.cols());
      {
        auto dz = d_out.values();
        auto g = cache.gate_out.values();
        auto a = cache.add_out.values();
        auto m = cache.mul_out.values();
        auto da = d_add.values();
        auto dm = d_mul.values();
        auto dp = d_pre.values();
        for (std::size_t i = 0; i < n; ++i) {
          da[i] = dz[i] * g[i];
          dm[i] = dz[i] * (1.0 - g[i]);
          dp[i] = dz[i] * (a[i] - m[i]) * g[i] * (1.0 - g[i]);
        }
      }
      NaluParams g;
      detail::effective_weight_backward(p.add_unit, outer_accumulate(d_add, x), g.add_unit);
      detail::nac_mul_backward(p.mul_unit, x, cache.log_input, cache.weight_mul, cache.mul_out,
                               d_mul, g.mul_unit, need_input_grad ? &d_input : nullptr, eps);
      g.gate = outer_accumulate(d_pre, x);
      if (need_input_grad) {
        add_inplace(d_input, matmul(d_add, cache.weight_add));
        add_inplace(d_input, matmul(d_pre, p.gate));
      }
      grad.params = std::move(g);
      break;
    }
  }
  return d_input;
}

/// Glorot-uniform bound for a tensor of the given fan-in/fan-out.
inline double glorot_bound(std::size_t in_dim, std::size_t out_dim) {
  return std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
}

inline Layer init_params(LayerKind kind, std::size_t in_dim, std::size_t out_dim, Rng& rng) {
  if (in_dim == 0 || out_dim == 0) throw ConfigError("init_params: dimensions must be >= 1");
  const double bound = glorot_bound(in_dim, out_dim);
  auto draw = [&] {
    Matrix m(out_dim, in_dim);
    for (double& v : m.values()) v = uniform(rng, -bound, bound);
    return m;
  };
  Layer layer;
  layer.kind = kind;
  switch (kind) {
    case LayerKind::Linear:
      layer.params = LinearParams{draw()};
      break;
    case LayerKind::NacAdd:
    case LayerKind::NacMul: {
      NacParams p;
      p.w_hat = draw();
      p.m_hat = draw();
      layer.params = std::move(p);
      break;
    }
    case LayerKind::Nalu: {
      NaluParams p;
      p.add_unit.w_hat = draw();
      p.add_unit.m_hat = draw();
      p.mul_unit.w_hat = draw();
      p.mul_unit.m_hat = draw();
      p.gate = draw();
      layer.params = std::move(p);
      break;
    }
  }
  return layer;
}

inline Layer zeros_like(const Layer& layer) {
  Layer z = layer;
  for_each_tensor(z, [](std::string_view, Matrix& m) {
    for (double& v : m.values()) v = 0.0;
  });
  return z;
}

}  // namespace nalu
