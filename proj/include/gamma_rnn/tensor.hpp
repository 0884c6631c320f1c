// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gamma_rnn/errors.hpp"
#include "gamma_rnn/rng.hpp"

namespace gamma_rnn {

using Shape = std::vector<std::size_t>;

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    os << (i == 0 ? "" : "x") << shape[i];
  }
  os << ']';
  return os.str();
}

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

/// Dense row-major array of doubles.
///
/// Rank-1 tensors of extent n behave as 1xn matrices wherever an operation
/// works on rows; rows()/cols() expose that view.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(std::move(shape)), data_(checked_size(shape_), fill) {}

  Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (checked_size(shape_) != data_.size()) {
      throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                           " does not match shape " + shape_string(shape_));
    }
  }

  /// Like the data constructor but also rejects NaN and infinities.
  static Tensor checked(Shape shape, std::vector<double> data) {
    Tensor t(std::move(shape), std::move(data));
    if (!t.all_finite()) {
      throw NumericalError("non-finite value in tensor of shape " + shape_string(t.shape_));
    }
    return t;
  }

  static Tensor vector(std::initializer_list<double> values) {
    return Tensor({values.size()}, std::vector<double>(values));
  }

  static Tensor matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values) {
    return Tensor({rows, cols}, std::vector<double>(values));
  }

  static Tensor scalar(double value) { return Tensor({1}, std::vector<double>{value}); }

  static Tensor uniform(Shape shape, double lo, double hi, Rng& rng) {
    Tensor t(std::move(shape));
    for (double& v : t.data_) v = rng.uniform(lo, hi);
    return t;
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t rows() const {
    require_matrix_view();
    return shape_.size() == 1 ? 1 : shape_[0];
  }
  std::size_t cols() const {
    require_matrix_view();
    return shape_.back();
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  const double& operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  double item() const {
    if (data_.size() != 1) {
      throw DimensionError("item() on tensor of shape " + shape_string(shape_));
    }
    return data_[0];
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  void fill(double value) { std::fill(data_.begin(), data_.end(), value); }

  Tensor& operator+=(const Tensor& other) {
    require_same_shape(*this, other, "+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
  }

  bool operator==(const Tensor& other) const = default;

  friend void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape_ != b.shape_) {
      throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape_) + " vs " +
                           shape_string(b.shape_));
    }
  }

 private:
  static std::size_t checked_size(const Shape& shape) {
    if (shape.empty()) throw DimensionError("tensor shape must have at least one extent");
    for (std::size_t extent : shape) {
      if (extent == 0) throw DimensionError("tensor extents must be positive: " + shape_string(shape));
    }
    return shape_size(shape);
  }

  void require_matrix_view() const {
    if (shape_.empty() || shape_.size() > 2) {
      throw DimensionError("expected a vector or matrix, got shape " + shape_string(shape_));
    }
  }

  Shape shape_;
  std::vector<double> data_;
};

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace gamma_rnn
