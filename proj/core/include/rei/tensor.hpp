// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace rei {

/// Dense row-major array of 64-bit reals.
///
/// A rank-0 tensor (empty shape) holds a single scalar. Operations in this
/// header never modify their inputs; they return fresh tensors.
class Tensor {
 public:
  using Shape = std::vector<std::size_t>;

  Tensor() : data_(1, 0.0) {}
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value) { return Tensor(Shape{}, value); }
  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape(), 0.0); }
  static Tensor full_like(const Tensor& t, double v) { return Tensor(t.shape(), v); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return data_.size(); }
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  /// Value of a single-element tensor.
  double item() const;

  /// Same data, new extents with the same element count.
  Tensor reshaped(Shape shape) const;

 private:
  Shape shape_;
  std::vector<double> data_;
};

std::size_t shape_size(const Tensor::Shape& shape);
std::string shape_string(const Tensor::Shape& shape);

/// Throws ShapeError naming `what` when the shapes differ.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, const Tensor& b);
Tensor operator*(double s, const Tensor& a);
Tensor operator-(const Tensor& a);

/// a + s * b
Tensor axpy(const Tensor& a, double s, const Tensor& b);
double dot(const Tensor& a, const Tensor& b);
double sum(const Tensor& a);
double squared_norm(const Tensor& a);
double norm(const Tensor& a);
double max_abs(const Tensor& a);
double max_abs_diff(const Tensor& a, const Tensor& b);
/// ||a - b|| / max(||b||, tiny)
double relative_error(const Tensor& a, const Tensor& b);
bool all_finite(const Tensor& a);
bool bitwise_equal(const Tensor& a, const Tensor& b);

}  // namespace rei
