#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nalu/matrix.hpp"
#include "nalu/special.hpp"

namespace nalu {

inline constexpr double kDefaultConfidence = 0.95;

struct BinomialSummary {
  std::size_t successes = 0;
  std::size_t trials = 0;
  double rate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double confidence = kDefaultConfidence;
};

/// Wilson score interval for a binomial proportion.
inline BinomialSummary wilson_interval(std::size_t successes, std::size_t trials,
                                       double confidence = kDefaultConfidence) {
  if (trials == 0) throw std::invalid_argument("wilson_interval: trials must be >= 1");
  if (successes > trials) throw std::invalid_argument("wilson_interval: successes > trials");
  const double z = two_sided_z(confidence);
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;

  BinomialSummary out;
  out.successes = successes;
  out.trials = trials;
  out.rate = p;
  out.confidence = confidence;
  out.ci_low = successes == 0 ? 0.0 : std::clamp(center - half, 0.0, p);
  out.ci_high = successes == trials ? 1.0 : std::clamp(center + half, p, 1.0);
  return out;
}

/// Point estimate of a mean with an optional profile-likelihood interval.
/// The interval is absent when fewer than two distinct samples exist.
struct MeanSummary {
  std::size_t n = 0;
  double mean = 0.0;
  std::optional<double> ci_low;
  std::optional<double> ci_high;
  double confidence = kDefaultConfidence;
  bool has_ci() const { return ci_low.has_value() && ci_high.has_value(); }
};

using GammaMeanSummary = MeanSummary;
using BetaMeanSummary = MeanSummary;

/// Lower bound applied to sparsity samples before the scaled-beta fit.
inline constexpr double kBetaBoundaryClamp = 1e-9;

namespace detail {

// log(k) - digamma(k), evaluated without cancellation for large k.
inline double log_minus_digamma(double k) {
  if (k < 10.0) return std::log(k) - digamma(k);
  const double inv = 1.0 / k;
  const double inv2 = inv * inv;
  return 0.5 * inv +
         inv2 * (1.0 / 12 - inv2 * (1.0 / 120 - inv2 * (1.0 / 252 - inv2 * (1.0 / 240 - inv2 / 132))));
}

// k (log k - 1) - lgamma(k), via Stirling's series for large k.
inline double stirling_remainder(double k) {
  if (k < 10.0) return k * (std::log(k) - 1.0) - std::lgamma(k);
  const double inv = 1.0 / k;
  const double inv2 = inv * inv;
  return 0.5 * std::log(k / (2.0 * std::numbers::pi)) -
         inv * (1.0 / 12 - inv2 * (1.0 / 360 - inv2 * (1.0 / 1260 - inv2 / 1680)));
}

// Root of a function that is strictly decreasing in t = log(x). `f` returns
// the value and `df` its derivative with respect to t. Newton steps are
// kept inside a bracket and replaced by bisection when they leave it.
inline double decreasing_root_log(const std::function<double(double)>& f,
                                  const std::function<double(double)>& df, double guess) {
  double t = std::log(guess);
  double ft = f(t);
  if (ft == 0.0) return std::exp(t);
  double lo = t, hi = t;
  double step = 1.0;
  if (ft > 0.0) {
    while (f(hi) > 0.0) {
      lo = hi;
      hi += step;
      step *= 2.0;
      if (hi > 700.0) return std::exp(hi);
    }
  } else {
    while (f(lo) < 0.0) {
      hi = lo;
      lo -= step;
      step *= 2.0;
      if (lo < -700.0) return std::exp(lo);
    }
  }
  t = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    ft = f(t);
    if (ft == 0.0) break;
    if (ft > 0.0) lo = t; else hi = t;
    const double d = df(t);
    double next = (d < 0.0 && std::isfinite(d)) ? t - ft / d : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - t) <= 1e-15 * (1.0 + std::abs(t)) || hi - lo <= 1e-15 * (1.0 + std::abs(t))) {
      t = next;
      break;
    }
    t = next;
  }
  return std::exp(t);
}

// Finds where profile(x) crosses `cut` between an inside point (profile >=
// cut) and successive outer points outer(1), outer(2), ...; returns the
// support limit if no outer point drops below the cut.
inline double profile_crossing(const std::function<double(double)>& profile, double cut,
                               double inside, const std::function<double(int)>& outer,
                               double support_limit) {
  double out_pt = support_limit;
  bool found = false;
  for (int j = 1; j <= 64; ++j) {
    const double candidate = outer(j);
    if (candidate == inside) break;
    const double value = profile(candidate);
    if (!(value >= cut)) {  // NaN counts as outside
      out_pt = candidate;
      found = true;
      break;
    }
    inside = candidate;
  }
  if (!found) return support_limit;
  for (int it = 0; it < 300; ++it) {
    const double mid = 0.5 * (inside + out_pt);
    if (std::abs(out_pt - inside) <= 1e-8 * std::abs(mid) || mid == inside || mid == out_pt) break;
    if (profile(mid) >= cut) inside = mid; else out_pt = mid;
  }
  return 0.5 * (inside + out_pt);
}

inline void require_distinct(std::span<const double> samples, const char* what) {
  if (samples.size() < 2) {
    throw InferenceError(std::string(what) + ": need at least two samples");
  }
  const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
  if (*lo == *hi) throw InferenceError(std::string(what) + ": all samples are equal");
}

}  // namespace detail

/// Maximum-likelihood gamma fit (shape k, rate lambda) with the
/// profile log-likelihood of the mean mu = k / lambda.
class GammaProfile {
 public:
  explicit GammaProfile(std::span<const double> samples) {
    detail::require_distinct(samples, "gamma fit");
    n_ = static_cast<double>(samples.size());
    double sum = 0.0;
    for (double x : samples) {
      if (!(x > 0.0) || !std::isfinite(x)) {
        throw InferenceError("gamma fit: samples must be positive and finite");
      }
      sum += x;
    }
    mean_ = sum / n_;
    double spread = 0.0;
    for (double x : samples) spread -= std::log1p((x - mean_) / mean_);
    // -mean(log(x / mean)) >= 0 by Jensen; zero only for identical samples.
    log_spread_ = std::max(spread / n_, 0.0);
    if (!(log_spread_ > 0.0)) throw InferenceError("gamma fit: degenerate samples");
  }

  double mle_mean() const { return mean_; }
  double mle_shape() const { return shape_at(mean_); }
  double mle_rate() const { return mle_shape() / mean_; }

  /// Shape maximizing the likelihood with the mean held at mu.
  double shape_at(double mu) const {
    const double c = offset(mu);
    // Minka's closed-form start for log k - psi(k) = c.
    const double guess = (3.0 - c + std::sqrt((c - 3.0) * (c - 3.0) + 24.0 * c)) / (12.0 * c);
    return detail::decreasing_root_log(
        [c](double t) { return detail::log_minus_digamma(std::exp(t)) - c; },
        [](double t) {
          const double k = std::exp(t);
          return k * (1.0 / k - trigamma(k));
        },
        guess);
  }

  /// Profile log-likelihood up to an additive constant.
  double profile(double mu) const {
    if (!(mu > 0.0)) return -std::numeric_limits<double>::infinity();
    const double k = shape_at(mu);
    return n_ * (detail::stirling_remainder(k) - k * offset(mu));
  }

 private:
  // log(mu) - mean(log x) + mean(x)/mu - 1, written to avoid cancellation.
  double offset(double mu) const {
    const double r = mean_ / mu;
    return (r - 1.0 - std::log1p(r - 1.0)) + log_spread_;
  }

  double n_ = 0.0;
  double mean_ = 0.0;
  double log_spread_ = 0.0;
};

inline GammaMeanSummary gamma_mean_profile_ci(std::span<const double> samples,
                                              double confidence = kDefaultConfidence) {
  const GammaProfile fit(samples);
  const double mu_hat = fit.mle_mean();
  const double cut = fit.profile(mu_hat) - 0.5 * chi2_1_quantile(confidence);
  auto profile = [&](double mu) { return fit.profile(mu); };
  GammaMeanSummary out;
  out.n = samples.size();
  out.mean = mu_hat;
  out.confidence = confidence;
  out.ci_low = detail::profile_crossing(
      profile, cut, mu_hat, [&](int j) { return mu_hat * std::ldexp(1.0, -j); }, 0.0);
  out.ci_high = detail::profile_crossing(
      profile, cut, mu_hat, [&](int j) { return mu_hat * std::ldexp(1.0, j); },
      std::numeric_limits<double>::infinity());
  return out;
}

/// Maximum-likelihood beta fit on y = 2x (support [0, 0.5] mapped onto
/// [0, 1]) with the profile log-likelihood of the mean m = a / (a + b).
class BetaProfile {
 public:
  explicit BetaProfile(std::span<const double> samples) {
    detail::require_distinct(samples, "beta fit");
    n_ = static_cast<double>(samples.size());
    double l1 = 0.0, l2 = 0.0, sum = 0.0, sum2 = 0.0;
    for (double x : samples) {
      if (!(x >= 0.0 && x <= 0.5)) throw InferenceError("beta fit: samples must lie in [0, 0.5]");
      const double clamped = std::clamp(x, kBetaBoundaryClamp, 0.5 - kBetaBoundaryClamp);
      const double y = 2.0 * clamped;
      l1 += std::log(y);
      l2 += std::log1p(-y);
      sum += y;
      sum2 += y * y;
    }
    log_y_ = l1 / n_;
    log_1my_ = l2 / n_;
    fit(sum / n_, std::max(sum2 / n_ - (sum / n_) * (sum / n_), 0.0));
  }

  double alpha() const { return alpha_; }
  double beta() const { return beta_; }
  /// MLE mean on the [0, 1] scale.
  double mle_unit_mean() const { return alpha_ / (alpha_ + beta_); }

  /// Precision a + b maximizing the likelihood with the unit-scale mean at m.
  double precision_at(double m) const {
    const double c = m * log_y_ + (1.0 - m) * log_1my_;
    return detail::decreasing_root_log(
        [m, c](double t) {
          const double phi = std::exp(t);
          return digamma(phi) - m * digamma(m * phi) - (1.0 - m) * digamma((1.0 - m) * phi) + c;
        },
        [m](double t) {
          const double phi = std::exp(t);
          return phi * (trigamma(phi) - m * m * trigamma(m * phi) -
                        (1.0 - m) * (1.0 - m) * trigamma((1.0 - m) * phi));
        },
        alpha_ + beta_);
  }

  /// Profile log-likelihood up to an additive constant, m on the unit scale.
  double profile(double m) const {
    if (!(m > 0.0 && m < 1.0)) return -std::numeric_limits<double>::infinity();
    return loglik(m, precision_at(m));
  }

  double loglik(double m, double phi) const {
    const double a = m * phi;
    const double b = (1.0 - m) * phi;
    return n_ * (std::lgamma(phi) - std::lgamma(a) - std::lgamma(b) + a * log_y_ + b * log_1my_);
  }

 private:
  // Newton's method on (a, b) with step halving; the log-likelihood is
  // concave in (a, b).
  void fit(double mean, double var) {
    double common = (var > 0.0) ? mean * (1.0 - mean) / var - 1.0 : 1.0;
    if (!(common > 0.0) || !std::isfinite(common)) common = 1.0;
    double a = mean * common;
    double b = (1.0 - mean) * common;
    auto ll = [&](double aa, double bb) { return loglik(aa / (aa + bb), aa + bb); };
    double current = ll(a, b);
    for (int it = 0; it < 500; ++it) {
      const double ps = digamma(a + b);
      const double ga = ps - digamma(a) + log_y_;
      const double gb = ps - digamma(b) + log_1my_;
      const double ts = trigamma(a + b);
      const double haa = ts - trigamma(a);
      const double hbb = ts - trigamma(b);
      const double hab = ts;
      const double det = haa * hbb - hab * hab;
      double da = -(hbb * ga - hab * gb) / det;
      double db = -(haa * gb - hab * ga) / det;
      double scale = 1.0;
      double na = a + da, nb = b + db, next = -std::numeric_limits<double>::infinity();
      for (int h = 0; h < 60; ++h) {
        na = a + scale * da;
        nb = b + scale * db;
        if (na > 0.0 && nb > 0.0) {
          next = ll(na, nb);
          if (next >= current - 1e-12 * std::abs(current)) break;
        }
        scale *= 0.5;
      }
      if (!(na > 0.0 && nb > 0.0)) break;
      const bool converged = std::abs(na - a) <= 1e-13 * a && std::abs(nb - b) <= 1e-13 * b;
      a = na;
      b = nb;
      current = next;
      if (converged) break;
    }
    alpha_ = a;
    beta_ = b;
  }

  double n_ = 0.0;
  double log_y_ = 0.0;
  double log_1my_ = 0.0;
  double alpha_ = 1.0;
  double beta_ = 1.0;
};

/// Mean of samples on [0, 0.5] with a profile-likelihood interval from a
/// beta distribution rescaled to that support.
inline BetaMeanSummary beta_mean_profile_ci(std::span<const double> samples,
                                            double confidence = kDefaultConfidence) {
  const BetaProfile fit(samples);
  const double m_hat = fit.mle_unit_mean();
  const double cut = fit.profile(m_hat) - 0.5 * chi2_1_quantile(confidence);
  auto profile = [&](double m) { return fit.profile(m); };
  const double lo = detail::profile_crossing(
      profile, cut, m_hat, [&](int j) { return m_hat * std::ldexp(1.0, -j); }, 0.0);
  const double hi = detail::profile_crossing(
      profile, cut, m_hat, [&](int j) { return 1.0 - (1.0 - m_hat) * std::ldexp(1.0, -j); }, 1.0);
  BetaMeanSummary out;
  out.n = samples.size();
  out.mean = 0.5 * m_hat;
  out.ci_low = std::clamp(0.5 * lo, 0.0, out.mean);
  out.ci_high = std::clamp(0.5 * hi, out.mean, 0.5);
  out.confidence = confidence;
  return out;
}

}  // namespace nalu
