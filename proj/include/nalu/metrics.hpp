#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "nalu/dataset.hpp"
#include "nalu/model.hpp"
#include "nalu/random.hpp"

namespace nalu {

inline constexpr double kThresholdEpsilon = 1e-5;
inline constexpr std::size_t kThresholdSamples = 1'000'000;

/// MSE of the simulated nearly-perfect solution on the extrapolation range.
struct SuccessThreshold {
  double value = 0.0;
  double epsilon = kThresholdEpsilon;
  std::size_t n_sim = kThresholdSamples;
  std::uint64_t sim_seed = 0;
  std::string spec_key;
};

/// One evaluation checkpoint of a training run.
struct Checkpoint {
  std::uint64_t iteration = 0;
  double interp_mse = 0.0;
  double extrap_mse = 0.0;
  double sparsity_error = 0.0;
  std::optional<double> gate_sparsity;  // NALU only
  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

using MetricTrace = std::vector<Checkpoint>;

/// Subset offset used when freezing the geometry for threshold simulation:
/// the midpoint of the legal offset interval.
inline double threshold_offset(const DatasetSpec& spec) { return 0.5 * spec.max_offset(); }

/// 2 x d indicator matrix of the two subsets at the frozen offset.
inline Matrix perfect_weights(const DatasetSpec& spec) {
  const auto [wa, wb] = subset_indices(spec, threshold_offset(spec));
  Matrix w(2, spec.input_size);
  for (std::size_t i = wa.begin; i < wa.end; ++i) w(0, i) = 1.0;
  for (std::size_t i = wb.begin; i < wb.end; ++i) w(1, i) = 1.0;
  return w;
}

namespace detail {
inline constexpr std::size_t kThresholdChunk = 4096;

// Sum of squared errors over observations [first, first + count) of the
// simulation, each chunk drawing from its own counter-derived stream.
inline double threshold_chunk(const DatasetSpec& spec, IndexRange wa, IndexRange wb, double epsilon,
                              std::uint64_t seed, std::size_t chunk, std::size_t count) {
  Rng rng = make_rng(derive_seed(seed, chunk));
  const std::size_t d = spec.input_size;
  const RangeSpec& range = spec.extrap;
  std::vector<double> x(d);
  double sse = 0.0;
  for (std::size_t n = 0; n < count; ++n) {
    for (double& v : x) v = range.sample(rng);
    double a = 0.0, b = 0.0;
    for (std::size_t i = wa.begin; i < wa.end; ++i) a += x[i];
    for (std::size_t i = wb.begin; i < wb.end; ++i) b += x[i];
    // Every entry of both weight rows moves by +eps or -eps.
    double err_a = 0.0, err_b = 0.0;
    std::uint64_t bits = 0;
    int left = 0;
    for (std::size_t i = 0; i < d; ++i) {
      if (left < 2) {
        bits = rng();
        left = 64;
      }
      err_a += (bits & 1u) ? x[i] : -x[i];
      err_b += (bits & 2u) ? x[i] : -x[i];
      bits >>= 2;
      left -= 2;
    }
    const double exact = apply(spec.op, a, b);
    const double approx = apply(spec.op, a + epsilon * err_a, b + epsilon * err_b);
    const double r = approx - exact;
    sse += r * r;
  }
  return sse;
}
}  // namespace detail

/// Simulates the nearly-perfect-solution MSE. The result depends only on
/// (spec, epsilon, n_sim, seed), not on `workers`.
inline SuccessThreshold simulate_threshold(const DatasetSpec& spec,
                                           double epsilon = kThresholdEpsilon,
                                           std::size_t n_sim = kThresholdSamples,
                                           std::uint64_t seed = 0, unsigned workers = 1) {
  if (!(epsilon >= 0.0)) throw ConfigError("simulate_threshold: epsilon must be >= 0");
  if (n_sim == 0) throw ConfigError("simulate_threshold: n_sim must be >= 1");
  spec.validate();
  const auto [wa, wb] = subset_indices(spec, threshold_offset(spec));
  const std::size_t chunks = (n_sim + detail::kThresholdChunk - 1) / detail::kThresholdChunk;
  std::vector<double> partial(chunks, 0.0);
  auto run = [&](std::size_t c) {
    const std::size_t first = c * detail::kThresholdChunk;
    const std::size_t count = std::min(detail::kThresholdChunk, n_sim - first);
    partial[c] = detail::threshold_chunk(spec, wa, wb, epsilon, seed, c, count);
  };
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(chunks)));
  if (workers == 1) {
    for (std::size_t c = 0; c < chunks; ++c) run(c);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t c = w; c < chunks; c += workers) run(c);
      });
    }
  }
  double sse = 0.0;
  for (double p : partial) sse += p;

  SuccessThreshold out;
  out.value = sse / static_cast<double>(n_sim);
  out.epsilon = epsilon;
  out.n_sim = n_sim;
  out.sim_seed = seed;
  out.spec_key = spec.key();
  return out;
}

inline bool is_success(double extrap_mse, const SuccessThreshold& threshold) {
  return extrap_mse < threshold.value;
}

/// First checkpoint iteration whose extrapolation MSE passes the criterion.
inline std::optional<std::uint64_t> solved_at(const MetricTrace& trace,
                                              const SuccessThreshold& threshold) {
  for (const auto& c : trace) {
    if (is_success(c.extrap_mse, threshold)) return c.iteration;
  }
  return std::nullopt;
}

/// Distance of one weight from the nearest of {-1, 0, 1}. Unbounded linear
/// weights (|w| > 1.5) saturate at 0.5.
inline double sparsity_distance(double w) {
  const double a = std::abs(w);
  return std::min({a, std::abs(1.0 - a), 0.5});
}

inline double max_sparsity_distance(std::span<const double> weights) {
  double worst = 0.0;
  for (double w : weights) worst = std::max(worst, sparsity_distance(w));
  return worst;
}

/// Effective weights whose sparsity is measured: tanh/sigmoid weights of
/// every NAC unit, raw weights of linear layers. Gates are excluded.
inline std::vector<Matrix> effective_weights(const Layer& layer) {
  switch (layer.kind) {
    case LayerKind::Linear: return {std::get<LinearParams>(layer.params).weight};
    case LayerKind::NacAdd:
    case LayerKind::NacMul: return {effective_weight(std::get<NacParams>(layer.params))};
    case LayerKind::Nalu: {
      const auto& p = std::get<NaluParams>(layer.params);
      return {effective_weight(p.add_unit), effective_weight(p.mul_unit)};
    }
  }
  return {};
}

inline double sparsity_error(const ModelParams& model) {
  double worst = 0.0;
  for (const Layer* layer : {&model.layer1, &model.layer2}) {
    for (const Matrix& w : effective_weights(*layer)) {
      worst = std::max(worst, max_sparsity_distance(w.values()));
    }
  }
  return worst;
}

/// Same distance applied to NALU gate activations from a forward pass;
/// reported next to the weight sparsity, never folded into it.
inline std::optional<double> gate_sparsity(const ModelParams& model, const ForwardPass& pass) {
  if (model.kind != ModelKind::Nalu) return std::nullopt;
  return std::max(max_sparsity_distance(pass.layer1.gate_out.values()),
                  max_sparsity_distance(pass.layer2.gate_out.values()));
}

}  // namespace nalu
