#pragma once

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nalu/stats.hpp"
#include "nalu/trainer.hpp"

namespace nalu {

/// Success rate, solved-at and sparsity error for one group of trials.
struct SummaryRow {
  std::size_t trials = 0;
  std::size_t successes = 0;
  std::size_t failures = 0;  // completed without success, diverged included
  std::size_t errored = 0;   // threw before completing
  std::size_t diverged = 0;
  BinomialSummary success_rate;
  std::optional<MeanSummary> solved_at;  // absent with zero successes
  std::optional<MeanSummary> sparsity;
};

namespace detail {
template <typename Fit>
MeanSummary mean_summary(const std::vector<double>& samples, double confidence, Fit fit) {
  if (samples.size() >= 2) {
    try {
      return fit(std::span<const double>(samples), confidence);
    } catch (const InferenceError&) {
      // identical samples: fall through to the point estimate
    }
  }
  MeanSummary point;
  point.n = samples.size();
  point.confidence = confidence;
  double sum = 0.0;
  for (double v : samples) sum += v;
  point.mean = sum / static_cast<double>(samples.size());
  return point;
}
}  // namespace detail

inline SummaryRow summarize(std::span<const TrialRecord> records,
                            double confidence = kDefaultConfidence) {
  if (records.empty()) throw std::invalid_argument("summarize: no records");
  SummaryRow row;
  row.trials = records.size();
  std::vector<double> solved;
  std::vector<double> sparsity;
  for (const auto& r : records) {
    if (!r.error.empty()) {
      ++row.errored;
      continue;
    }
    if (r.diverged) ++row.diverged;
    if (!r.success) {
      ++row.failures;
      continue;
    }
    ++row.successes;
    if (r.solved_at) solved.push_back(static_cast<double>(*r.solved_at));
    if (r.sparsity_error) sparsity.push_back(*r.sparsity_error);
  }
  row.success_rate = wilson_interval(row.successes, row.trials, confidence);
  if (!solved.empty()) {
    row.solved_at = detail::mean_summary(solved, confidence, [](auto s, double c) {
      return gamma_mean_profile_ci(s, c);
    });
  }
  if (!sparsity.empty()) {
    row.sparsity = detail::mean_summary(sparsity, confidence, [](auto s, double c) {
      return beta_mean_profile_ci(s, c);
    });
  }
  return row;
}

/// "31% +10% -8%": rate and interval offsets in whole percent.
inline std::string format_rate(const BinomialSummary& b) {
  const long rate = std::lround(100.0 * b.rate);
  const long plus = std::lround(100.0 * (b.ci_high - b.rate));
  const long minus = std::lround(100.0 * (b.rate - b.ci_low));
  return std::to_string(rate) + "% +" + std::to_string(plus) + "% -" + std::to_string(minus) + "%";
}

/// "3.0e+06 +2.9e+05 -2.4e+05", "---" when absent, "(no CI)" for a point estimate.
inline std::string format_mean(const std::optional<MeanSummary>& m) {
  if (!m) return "---";
  char buf[96];
  if (!m->has_ci()) {
    std::snprintf(buf, sizeof buf, "%.1e (no CI)", m->mean);
  } else {
    std::snprintf(buf, sizeof buf, "%.1e +%.1e -%.1e", m->mean, *m->ci_high - m->mean,
                  m->mean - *m->ci_low);
  }
  return buf;
}

}  // namespace nalu
