#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "nalu/layers.hpp"

namespace nalu {

/// The four two-layer stacks that are benchmarked.
enum class ModelKind { Linear, NacAdd, NacMul, Nalu };

inline constexpr std::array<ModelKind, 4> kAllModelKinds = {ModelKind::Linear, ModelKind::NacAdd,
                                                            ModelKind::NacMul, ModelKind::Nalu};

inline std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Linear: return "Linear";
    case ModelKind::NacAdd: return "NAC+";
    case ModelKind::NacMul: return "NAC*";
    case ModelKind::Nalu: return "NALU";
  }
  return "?";
}

inline std::optional<ModelKind> parse_model_kind(std::string_view text) {
  std::string t;
  for (char c : text) t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (t == "linear") return ModelKind::Linear;
  if (t == "nac+" || t == "nac_add" || t == "nacadd") return ModelKind::NacAdd;
  if (t == "nac*" || t == "nac_mul" || t == "nacmul" || t == "nac•") return ModelKind::NacMul;
  if (t == "nalu") return ModelKind::Nalu;
  return std::nullopt;
}

/// Layer kinds (first, second) for each model.
inline std::pair<LayerKind, LayerKind> layer_kinds(ModelKind kind) {
  switch (kind) {
    case ModelKind::Linear: return {LayerKind::Linear, LayerKind::Linear};
    case ModelKind::NacAdd: return {LayerKind::NacAdd, LayerKind::NacAdd};
    case ModelKind::NacMul: return {LayerKind::NacAdd, LayerKind::NacMul};
    case ModelKind::Nalu: return {LayerKind::Nalu, LayerKind::Nalu};
  }
  return {LayerKind::Linear, LayerKind::Linear};
}

/// Default width of the hidden layer: one unit per subset sum.
inline constexpr std::size_t kDefaultHiddenSize = 2;

struct ModelParams {
  ModelKind kind = ModelKind::Linear;
  std::size_t hidden_size = kDefaultHiddenSize;
  Layer layer1;  // d -> hidden
  Layer layer2;  // hidden -> 1
};

inline ModelParams init_model(ModelKind kind, std::size_t input_size, std::size_t hidden_size,
                              Rng& rng) {
  const auto [first, second] = layer_kinds(kind);
  ModelParams model;
  model.kind = kind;
  model.hidden_size = hidden_size;
  model.layer1 = init_params(first, input_size, hidden_size, rng);
  model.layer2 = init_params(second, hidden_size, 1, rng);
  return model;
}

inline ModelParams zeros_like(const ModelParams& model) {
  ModelParams z = model;
  z.layer1 = zeros_like(model.layer1);
  z.layer2 = zeros_like(model.layer2);
  return z;
}

/// Visits every trainable tensor of both layers in a fixed order; the
/// callback receives (layer index 1 or 2, tensor name, tensor).
template <typename M, typename F>
  requires std::is_same_v<std::remove_const_t<M>, ModelParams>
void for_each_tensor(M& model, F&& f) {
  for_each_tensor(model.layer1, [&](std::string_view name, auto& t) { f(1, name, t); });
  for_each_tensor(model.layer2, [&](std::string_view name, auto& t) { f(2, name, t); });
}

inline bool all_finite(const ModelParams& model) {
  bool ok = true;
  for_each_tensor(model, [&](int, std::string_view, const Matrix& t) { ok = ok && t.all_finite(); });
  return ok;
}

struct ForwardPass {
  LayerCache layer1;
  LayerCache layer2;
  const Matrix& output() const { return layer2.output; }
};

inline ForwardPass forward(const ModelParams& model, const Matrix& x, double eps = kLayerEpsilon) {
  ForwardPass pass;
  forward_layer(model.layer1, x, pass.layer1, eps);
  forward_layer(model.layer2, pass.layer1.output, pass.layer2, eps);
  return pass;
}

inline void forward_into(const ModelParams& model, const Matrix& x, ForwardPass& pass,
                         double eps = kLayerEpsilon) {
  forward_layer(model.layer1, x, pass.layer1, eps);
  forward_layer(model.layer2, pass.layer1.output, pass.layer2, eps);
}

/// Model output as a batch x 1 matrix.
inline Matrix predict(const ModelParams& model, const Matrix& x, double eps = kLayerEpsilon) {
  return forward(model, x, eps).layer2.output;
}

/// Gradients for every parameter tensor given dL/dz of the model output.
/// `pass` must come from forward() on the same model and x.
inline ModelParams backward(const ModelParams& model, const Matrix& x, const ForwardPass& pass,
                            const Matrix& d_output, double eps = kLayerEpsilon) {
  ModelParams grad;
  grad.kind = model.kind;
  grad.hidden_size = model.hidden_size;
  const Matrix d_hidden = backward_layer(model.layer2, pass.layer1.output, pass.layer2, d_output,
                                         grad.layer2, true, eps);
  backward_layer(model.layer1, x, pass.layer1, d_hidden, grad.layer1, false, eps);
  return grad;
}

/// Mean squared error over the batch, and dL/dz with mean reduction.
inline double mse_loss(const Matrix& prediction, std::span<const double> target, Matrix* d_pred) {
  if (prediction.cols() != 1 || prediction.rows() != target.size()) {
    throw DimensionError("mse_loss: prediction " + shape_string(prediction) + " vs " +
                         std::to_string(target.size()) + " targets");
  }
  const double n = static_cast<double>(target.size());
  double sum = 0.0;
  if (d_pred != nullptr) *d_pred = Matrix(prediction.rows(), 1);
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double r = prediction(i, 0) - target[i];
    sum += r * r;
    if (d_pred != nullptr) (*d_pred)(i, 0) = 2.0 * r / n;
  }
  return sum / n;
}

}  // namespace nalu
