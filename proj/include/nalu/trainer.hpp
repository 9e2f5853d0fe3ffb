#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>

#include "nalu/adam.hpp"
#include "nalu/dataset.hpp"
#include "nalu/metrics.hpp"
#include "nalu/model.hpp"

namespace nalu {

struct TrainConfig {
  std::uint64_t iterations = 5'000'000;
  std::size_t batch_size = 128;
  std::uint64_t eval_every = 1000;
  std::size_t eval_size = 10'000;
  std::size_t hidden_size = kDefaultHiddenSize;
  double layer_eps = kLayerEpsilon;
  AdamConfig adam;
  std::uint64_t seed = 0;

  void validate() const {
    if (iterations == 0) throw ConfigError("train: iterations must be >= 1");
    if (batch_size == 0) throw ConfigError("train: batch_size must be >= 1");
    if (eval_every == 0) throw ConfigError("train: eval_every must be >= 1");
    if (eval_size == 0) throw ConfigError("train: eval_size must be >= 1");
    if (hidden_size == 0) throw ConfigError("train: hidden_size must be >= 1");
    if (!(layer_eps > 0.0)) throw ConfigError("train: layer_eps must be > 0");
    if (!(adam.lr > 0.0 && adam.beta1 > 0.0 && adam.beta2 > 0.0 && adam.eps > 0.0) ||
        adam.beta1 >= 1.0 || adam.beta2 >= 1.0) {
      throw ConfigError("train: Adam constants must be positive (betas below 1)");
    }
  }
};

struct TrialRecord {
  ModelKind model = ModelKind::Linear;
  DatasetSpec spec;
  std::size_t hidden_size = kDefaultHiddenSize;
  std::uint64_t seed = 0;
  double offset = 0.0;  // task offset k drawn for this trial
  SubsetLayout layout;
  MetricTrace trace;
  bool success = false;
  std::optional<std::uint64_t> solved_at;
  std::optional<double> sparsity_error;  // at the selected successful checkpoint
  std::optional<double> gate_sparsity;
  double final_interp_mse = std::numeric_limits<double>::infinity();
  double final_extrap_mse = std::numeric_limits<double>::infinity();
  std::uint64_t iterations_run = 0;
  bool diverged = false;
  std::string error;  // non-empty when the trial threw
};

/// Index of the checkpoint with minimal validation (interpolation) MSE;
/// the earliest wins ties.
inline std::size_t select_checkpoint(const MetricTrace& trace) {
  if (trace.empty()) throw std::invalid_argument("select_checkpoint: empty trace");
  std::size_t best = 0;
  for (std::size_t i = 1; i < trace.size(); ++i) {
    if (trace[i].interp_mse < trace[best].interp_mse) best = i;
  }
  return best;
}

/// MSE of the model on an evaluation set; non-finite predictions give +inf.
inline double evaluate_mse(const ModelParams& model, const SampleBatch& data, ForwardPass& pass,
                           double eps) {
  forward_into(model, data.x, pass, eps);
  const double mse = mse_loss(pass.output(), data.t, nullptr);
  return std::isfinite(mse) ? mse : std::numeric_limits<double>::infinity();
}

namespace detail {
enum SeedStream : std::uint64_t {
  kInitStream = 10,
  kBatchStream = 11,
  kEvalStream = 12,
  kTaskStream = 13
};
}

/// Trains one model for config.iterations Adam steps on freshly sampled
/// interpolation batches, evaluating every config.eval_every steps.
inline TrialRecord run_trial(ModelKind kind, const DatasetSpec& spec, const TrainConfig& config,
                             const SuccessThreshold& threshold) {
  config.validate();
  spec.validate();

  TrialRecord record;
  record.model = kind;
  record.spec = spec;
  record.hidden_size = config.hidden_size;
  record.seed = config.seed;

  Rng task_rng = make_rng(derive_seed(config.seed, detail::kTaskStream));
  record.offset = draw_offset(spec, task_rng);
  record.layout = subset_indices(spec, record.offset);
  const SubsetLayout& layout = record.layout;

  Rng init_rng = make_rng(derive_seed(config.seed, detail::kInitStream));
  Rng batch_rng = make_rng(derive_seed(config.seed, detail::kBatchStream));
  const std::uint64_t eval_seed = derive_seed(config.seed, detail::kEvalStream);
  const SampleBatch validation =
      fixed_eval_set(spec, layout, Split::Interpolation, config.eval_size, eval_seed);
  const SampleBatch test = fixed_eval_set(spec, layout, Split::Extrapolation, config.eval_size, eval_seed);

  ModelParams model = init_model(kind, spec.input_size, config.hidden_size, init_rng);
  AdamState adam = AdamState::for_model(model);

  SampleBatch batch;
  ForwardPass pass;
  ForwardPass eval_pass;
  Matrix d_output;
  for (std::uint64_t it = 1; it <= config.iterations; ++it) {
    sample_batch_into(spec, layout, Split::Interpolation, config.batch_size, batch_rng, batch);
    forward_into(model, batch.x, pass, config.layer_eps);
    const double loss = mse_loss(pass.output(), batch.t, &d_output);
    if (!std::isfinite(loss)) {
      record.diverged = true;
      break;
    }
    const ModelParams grads = backward(model, batch.x, pass, d_output, config.layer_eps);
    adam_step(model, grads, adam, config.adam);
    record.iterations_run = it;
    if (!all_finite(model)) {
      record.diverged = true;
      break;
    }
    if (it % config.eval_every == 0) {
      Checkpoint c;
      c.iteration = it;
      c.interp_mse = evaluate_mse(model, validation, eval_pass, config.layer_eps);
      c.gate_sparsity = gate_sparsity(model, eval_pass);
      c.extrap_mse = evaluate_mse(model, test, eval_pass, config.layer_eps);
      c.sparsity_error = sparsity_error(model);
      record.trace.push_back(c);
    }
  }

  if (!record.trace.empty()) {
    record.final_interp_mse = record.trace.back().interp_mse;
    record.final_extrap_mse = record.trace.back().extrap_mse;
  }
  if (record.diverged) return record;

  record.solved_at = solved_at(record.trace, threshold);
  record.success = record.solved_at.has_value();
  if (record.success) {
    MetricTrace passing;
    for (const auto& c : record.trace) {
      if (is_success(c.extrap_mse, threshold)) passing.push_back(c);
    }
    const Checkpoint& chosen = passing[select_checkpoint(passing)];
    record.sparsity_error = chosen.sparsity_error;
    record.gate_sparsity = chosen.gate_sparsity;
  }
  return record;
}

}  // namespace nalu
