#pragma once

#include <algorithm>
#include <charconv>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nalu/matrix.hpp"
#include "nalu/random.hpp"

namespace nalu {

enum class Operation { Add, Sub, Mul, Div };

inline std::string_view to_string(Operation op) {
  switch (op) {
    case Operation::Add: return "add";
    case Operation::Sub: return "sub";
    case Operation::Mul: return "mul";
    case Operation::Div: return "div";
  }
  return "?";
}

inline std::optional<Operation> parse_operation(std::string_view text) {
  if (text == "add" || text == "+") return Operation::Add;
  if (text == "sub" || text == "-") return Operation::Sub;
  if (text == "mul" || text == "*" || text == "x") return Operation::Mul;
  if (text == "div" || text == "/") return Operation::Div;
  return std::nullopt;
}

inline double apply(Operation op, double a, double b) {
  switch (op) {
    case Operation::Add: return a + b;
    case Operation::Sub: return a - b;
    case Operation::Mul: return a * b;
    case Operation::Div: return a / b;
  }
  return 0.0;
}

/// Shortest decimal text that reads back as the same double.
inline std::string shortest(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  friend bool operator==(const Interval&, const Interval&) = default;
};

/// A sampling range: one interval, or a union of disjoint intervals sampled
/// as a uniform mixture weighted by interval length.
struct RangeSpec {
  std::vector<Interval> parts;

  RangeSpec() = default;
  RangeSpec(double lower, double upper) : parts{{lower, upper}} {}
  explicit RangeSpec(std::vector<Interval> intervals) : parts(std::move(intervals)) {}

  double total_length() const {
    double len = 0.0;
    for (const auto& p : parts) len += p.upper - p.lower;
    return len;
  }
  double lower() const {
    double v = parts.front().lower;
    for (const auto& p : parts) v = std::min(v, p.lower);
    return v;
  }
  double upper() const {
    double v = parts.front().upper;
    for (const auto& p : parts) v = std::max(v, p.upper);
    return v;
  }
  bool contains(double x) const {
    for (const auto& p : parts) {
      if (x >= p.lower && x <= p.upper) return true;
    }
    return false;
  }

  void validate(const char* what) const {
    if (parts.empty()) throw ConfigError(std::string(what) + ": range has no intervals");
    for (const auto& p : parts) {
      if (!std::isfinite(p.lower) || !std::isfinite(p.upper) || p.lower > p.upper) {
        throw ConfigError(std::string(what) + ": invalid interval");
      }
    }
  }

  double sample(Rng& rng) const {
    if (parts.size() == 1) return uniform(rng, parts[0].lower, parts[0].upper);
    const double total = total_length();
    double u = uniform01(rng) * total;
    for (const auto& p : parts) {
      const double len = p.upper - p.lower;
      if (u < len) return p.lower + u;
      u -= len;
    }
    return parts.back().upper;
  }

  std::string to_string() const {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (i > 0) out += "|";
      out += "U[" + shortest(parts[i].lower) + "," + shortest(parts[i].upper) + "]";
    }
    return out;
  }

  friend bool operator==(const RangeSpec&, const RangeSpec&) = default;
};

/// Half-open index window [begin, end).
struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

/// Integer layout of the two subsets: both have `subset_len` elements and
/// the second starts `subset_len - overlap_len` after the first.
struct SubsetGeometry {
  std::size_t subset_len = 0;
  std::size_t overlap_len = 0;
  std::size_t span = 0;  // indices covered by both windows together
};

enum class Split { Interpolation, Extrapolation };

/// Everything that determines a task distribution. The overlap ratio is the
/// fraction of each subset shared with the other one.
struct DatasetSpec {
  Operation op = Operation::Add;
  RangeSpec interp{1.0, 2.0};
  RangeSpec extrap{2.0, 6.0};
  std::size_t input_size = 100;
  double subset_ratio = 0.25;
  double overlap_ratio = 0.5;

  const RangeSpec& range(Split split) const {
    return split == Split::Interpolation ? interp : extrap;
  }

  SubsetGeometry geometry() const {
    if (input_size == 0) throw ConfigError("dataset: input_size must be >= 1");
    if (!(subset_ratio > 0.0) || !(subset_ratio <= 1.0)) {
      throw ConfigError("dataset: subset_ratio must be in (0, 1]");
    }
    if (!(overlap_ratio >= 0.0) || !(overlap_ratio <= 1.0)) {
      throw ConfigError("dataset: overlap_ratio must be in [0, 1]");
    }
    SubsetGeometry g;
    g.subset_len = static_cast<std::size_t>(std::lround(subset_ratio * static_cast<double>(input_size)));
    g.overlap_len = static_cast<std::size_t>(std::lround(overlap_ratio * static_cast<double>(g.subset_len)));
    if (g.subset_len == 0) throw ConfigError("dataset: subset is empty");
    g.span = 2 * g.subset_len - g.overlap_len;
    if (g.span > input_size) {
      throw ConfigError("dataset: subsets span " + std::to_string(g.span) +
                        " indices but input_size is " + std::to_string(input_size));
    }
    return g;
  }

  void validate() const {
    geometry();
    interp.validate("interpolation");
    extrap.validate("extrapolation");
  }

  /// Upper end of the legal offset interval [0, max_offset].
  double max_offset() const {
    return 1.0 - static_cast<double>(geometry().span) / static_cast<double>(input_size);
  }

  /// Canonical text used for hashing and cache keys.
  std::string key() const {
    return "op=" + std::string(to_string(op)) + ";interp=" + interp.to_string() +
           ";extrap=" + extrap.to_string() + ";d=" + std::to_string(input_size) +
           ";s=" + shortest(subset_ratio) + ";o=" + shortest(overlap_ratio);
  }

  friend bool operator==(const DatasetSpec&, const DatasetSpec&) = default;
};

/// The two summed index windows of a task instance.
struct SubsetLayout {
  IndexRange a;
  IndexRange b;
  std::size_t overlap() const {
    const std::size_t lo = std::max(a.begin, b.begin);
    const std::size_t hi = std::min(a.end, b.end);
    return hi > lo ? hi - lo : 0;
  }
  friend bool operator==(const SubsetLayout&, const SubsetLayout&) = default;
};

namespace detail {
inline SubsetLayout windows_at(std::size_t base, const SubsetGeometry& g) {
  IndexRange a{base, base + g.subset_len};
  IndexRange b{a.end - g.overlap_len, a.end - g.overlap_len + g.subset_len};
  return {a, b};
}

inline std::size_t offset_base(double k, std::size_t input_size, const SubsetGeometry& g) {
  auto base = static_cast<std::size_t>(std::floor(k * static_cast<double>(input_size)));
  // floor(d*k) can exceed the integer limit only through rounding at k == max.
  return std::min(base, input_size - g.span);
}
}  // namespace detail

/// The two summed index windows for offset k, k in [0, spec.max_offset()].
inline SubsetLayout subset_indices(const DatasetSpec& spec, double k) {
  const SubsetGeometry g = spec.geometry();
  if (!(k >= 0.0) || k > spec.max_offset()) {
    throw std::out_of_range("subset_indices: offset " + std::to_string(k) +
                            " outside [0, " + std::to_string(spec.max_offset()) + "]");
  }
  return detail::windows_at(detail::offset_base(k, spec.input_size, g), g);
}

/// Draws the task offset k ~ U(0, max_offset). One offset fixes the subset
/// layout for every observation of a task, interpolation and extrapolation alike.
inline double draw_offset(const DatasetSpec& spec, Rng& rng) {
  return spec.max_offset() * uniform01(rng);
}

struct SampleBatch {
  Matrix x;               // batch x d
  std::vector<double> t;  // batch
};

/// Fills `out` with `batch` observations; reuses its storage when the shape
/// already matches.
inline void sample_batch_into(const DatasetSpec& spec, const SubsetLayout& layout, Split split,
                              std::size_t batch, Rng& rng, SampleBatch& out) {
  if (batch == 0) throw ConfigError("sample_batch: batch must be >= 1");
  const RangeSpec& range = spec.range(split);
  range.validate("sample_batch");
  const std::size_t d = spec.input_size;
  if (layout.a.end > d || layout.b.end > d || layout.a.size() == 0) {
    throw ConfigError("sample_batch: subset layout does not fit the input");
  }
  if (out.x.rows() != batch || out.x.cols() != d) out.x = Matrix(batch, d);
  out.t.resize(batch);

  const bool single = range.parts.size() == 1;
  const double lo = range.parts.front().lower;
  const double width = range.parts.front().upper - lo;
  for (std::size_t r = 0; r < batch; ++r) {
    auto row = out.x.row(r);
    if (single) {
      for (double& v : row) v = lo + width * uniform01(rng);
    } else {
      for (double& v : row) v = range.sample(rng);
    }
    double a = 0.0;
    double b = 0.0;
    for (std::size_t i = layout.a.begin; i < layout.a.end; ++i) a += row[i];
    for (std::size_t i = layout.b.begin; i < layout.b.end; ++i) b += row[i];
    out.t[r] = apply(spec.op, a, b);
  }
}

inline SampleBatch sample_batch(const DatasetSpec& spec, const SubsetLayout& layout, Split split,
                                std::size_t batch, Rng& rng) {
  SampleBatch out;
  sample_batch_into(spec, layout, split, batch, rng, out);
  return out;
}

/// Fixed evaluation set, fully determined by (spec, layout, split, n, seed).
inline SampleBatch fixed_eval_set(const DatasetSpec& spec, const SubsetLayout& layout, Split split,
                                  std::size_t n, std::uint64_t seed) {
  Rng rng = make_rng(derive_seed(seed, split == Split::Interpolation ? 1 : 2));
  return sample_batch(spec, layout, split, n, rng);
}

}  // namespace nalu
