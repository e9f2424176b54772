#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "agpad/errors.hpp"

namespace agpad {

using Shape = std::vector<int>;

inline std::int64_t numel(const Shape& shape) {
  std::int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

/// Dense n-dimensional array with flat row-major storage.
///
/// float is the working precision for forward/backward; double exists for
/// gradient checks and test oracles, where 32-bit finite differences are
/// too noisy. Tensors are plain values: copying copies the data.
template <typename Scalar>
class Tensor {
 public:
  using MatrixRM =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MapM = Eigen::Map<MatrixRM>;
  using CMapM = Eigen::Map<const MatrixRM>;
  using MapA = Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, 1>>;
  using CMapA = Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, 1>>;

  Tensor() = default;

  explicit Tensor(Shape shape) : shape_(std::move(shape)) {
    validate_shape();
    data_.assign(static_cast<std::size_t>(numel(shape_)), Scalar(0));
  }

  Tensor(Shape shape, std::vector<Scalar> values)
      : shape_(std::move(shape)), data_(std::move(values)) {
    validate_shape();
    if (numel(shape_) != static_cast<std::int64_t>(data_.size())) {
      throw ShapeError("tensor shape " + shape_string(shape_) + " expects " +
                       std::to_string(numel(shape_)) + " values, got " +
                       std::to_string(data_.size()));
    }
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

  static Tensor full(Shape shape, Scalar value) {
    Tensor t(std::move(shape));
    for (auto& v : t.data_) v = value;
    return t;
  }

  static Tensor scalar(Scalar value) { return Tensor({1}, {value}); }

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }
  std::vector<Scalar>& values() { return data_; }
  const std::vector<Scalar>& values() const { return data_; }

  Scalar& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  Scalar operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  Scalar& operator()(int i, int j) { return data_[idx2(i, j)]; }
  Scalar operator()(int i, int j) const { return data_[idx2(i, j)]; }
  Scalar& operator()(int c, int h, int w) { return data_[idx3(c, h, w)]; }
  Scalar operator()(int c, int h, int w) const { return data_[idx3(c, h, w)]; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  /// Map the flat storage as a rows x cols row-major matrix.
  MapM mat(int rows, int cols) {
    return MapM(data_.data(), rows, cols);
  }
  CMapM mat(int rows, int cols) const {
    return CMapM(data_.data(), rows, cols);
  }
  MapM mat2() { return mat(dim(0), dim(1)); }
  CMapM mat2() const { return mat(dim(0), dim(1)); }

  MapA array() { return MapA(data_.data(), static_cast<Eigen::Index>(data_.size())); }
  CMapA array() const {
    return CMapA(data_.data(), static_cast<Eigen::Index>(data_.size()));
  }

  /// Same data, new shape (element counts must agree).
  Tensor reshaped(Shape new_shape) const {
    if (numel(new_shape) != size()) {
      throw ShapeError("reshape " + shape_string(shape_) + " -> " +
                       shape_string(new_shape) + ": element count mismatch");
    }
    Tensor out;
    out.shape_ = std::move(new_shape);
    out.data_ = data_;
    out.requires_grad = requires_grad;
    return out;
  }

  template <typename Other>
  Tensor<Other> cast() const {
    Tensor<Other> out;
    std::vector<Other> values(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i) {
      values[i] = static_cast<Other>(data_[i]);
    }
    out = Tensor<Other>(shape_, std::move(values));
    out.requires_grad = requires_grad;
    return out;
  }

  bool all_finite() const {
    for (Scalar v : data_) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

  bool requires_grad = false;

 private:
  void validate_shape() const {
    for (int d : shape_) {
      if (d <= 0) {
        throw ShapeError("tensor dimensions must be positive, got " +
                         shape_string(shape_));
      }
    }
  }

  std::size_t idx2(int i, int j) const {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(shape_[1]) +
           static_cast<std::size_t>(j);
  }
  std::size_t idx3(int c, int h, int w) const {
    return (static_cast<std::size_t>(c) * static_cast<std::size_t>(shape_[1]) +
            static_cast<std::size_t>(h)) *
               static_cast<std::size_t>(shape_[2]) +
           static_cast<std::size_t>(w);
  }

  Shape shape_;
  std::vector<Scalar> data_;
};

template <typename Scalar>
Tensor<Scalar> operator+(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("elementwise add: " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
  Tensor<Scalar> out = a;
  out.array() += b.array();
  return out;
}

}  // namespace agpad
