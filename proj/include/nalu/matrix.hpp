#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nalu {

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct InferenceError : std::domain_error {
  using std::domain_error::domain_error;
};

/// Dense row-major matrix of doubles. Batches are stored batch-major
/// (one observation per row).
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw DimensionError("matrix data length " + std::to_string(data_.size()) +
                           " != " + std::to_string(rows_) + "x" + std::to_string(cols_));
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  bool same_shape(const Matrix& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline std::string shape_string(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

inline void require_cols(const Matrix& x, std::size_t cols, const char* what) {
  if (x.cols() != cols) {
    throw DimensionError(std::string(what) + ": input has " + std::to_string(x.cols()) +
                         " columns, layer expects " + std::to_string(cols));
  }
}

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(what) + ": shape " + shape_string(a) + " vs " +
                         shape_string(b));
  }
}

// out = x * w^T, x: batch x in, w: out x in
inline Matrix matmul_transposed(const Matrix& x, const Matrix& w) {
  Matrix out(x.rows(), w.rows());
  for (std::size_t b = 0; b < x.rows(); ++b) {
    const auto xr = x.row(b);
    for (std::size_t o = 0; o < w.rows(); ++o) {
      const auto wr = w.row(o);
      double acc = 0.0;
#pragma omp simd reduction(+ : acc)
      for (std::size_t i = 0; i < xr.size(); ++i) acc += xr[i] * wr[i];
      out(b, o) = acc;
    }
  }
  return out;
}

// out = dy^T * x, dy: batch x out, x: batch x in -> out x in
inline Matrix outer_accumulate(const Matrix& dy, const Matrix& x) {
  Matrix out(dy.cols(), x.cols());
  for (std::size_t b = 0; b < dy.rows(); ++b) {
    const auto xr = x.row(b);
    for (std::size_t o = 0; o < dy.cols(); ++o) {
      const double g = dy(b, o);
      if (g == 0.0) continue;
      auto orow = out.row(o);
      for (std::size_t i = 0; i < xr.size(); ++i) orow[i] += g * xr[i];
    }
  }
  return out;
}

// out = dy * w, dy: batch x out, w: out x in -> batch x in
inline Matrix matmul(const Matrix& dy, const Matrix& w) {
  Matrix out(dy.rows(), w.cols());
  for (std::size_t b = 0; b < dy.rows(); ++b) {
    auto orow = out.row(b);
    for (std::size_t o = 0; o < w.rows(); ++o) {
      const double g = dy(b, o);
      if (g == 0.0) continue;
      const auto wr = w.row(o);
      for (std::size_t i = 0; i < wr.size(); ++i) orow[i] += g * wr[i];
    }
  }
  return out;
}

inline void add_inplace(Matrix& into, const Matrix& other) {
  auto a = into.values();
  auto b = other.values();
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

}  // namespace nalu
