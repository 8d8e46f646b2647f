#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <type_traits>
#include <vector>

#include "dgn/error.hpp"

namespace dgn {

// Dense rank-1 or rank-2 tensor, row-major. Scalars are rank-1 tensors of
// size 1. The scalar type selects the precision mode: float for training,
// double for verification (finite-difference gradient checks).
template <typename T>
class Tensor {
  static_assert(std::is_floating_point_v<T>);

 public:
  Tensor() = default;

  static Tensor vector(std::size_t n) { return Tensor(1, n, 1); }

  static Tensor matrix(std::size_t rows, std::size_t cols) { return Tensor(2, rows, cols); }

  static Tensor scalar(T v) {
    Tensor t(1, 1, 1);
    t.data_[0] = v;
    return t;
  }

  static Tensor vec(std::initializer_list<T> values) {
    Tensor t(1, values.size(), 1);
    std::size_t i = 0;
    for (T v : values) t.data_[i++] = v;
    return t;
  }

  static Tensor of(std::initializer_list<std::initializer_list<T>> rows) {
    std::size_t r = rows.size();
    std::size_t c = r == 0 ? 0 : rows.begin()->size();
    Tensor t(2, r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
      if (row.size() != c) throw ShapeError("Tensor::of: ragged rows");
      for (T v : row) t.data_[i++] = v;
    }
    return t;
  }

  static Tensor from_data(std::size_t rows, std::size_t cols, std::vector<T> data) {
    if (data.size() != rows * cols)
      throw ShapeError("Tensor::from_data: " + std::to_string(data.size()) + " values for " +
                       std::to_string(rows) + "x" + std::to_string(cols));
    Tensor t;
    t.rank_ = 2;
    t.d0_ = rows;
    t.d1_ = cols;
    t.data_ = std::move(data);
    return t;
  }

  static Tensor from_data(std::size_t n, std::vector<T> data) {
    if (data.size() != n)
      throw ShapeError("Tensor::from_data: " + std::to_string(data.size()) + " values for [" +
                       std::to_string(n) + "]");
    Tensor t;
    t.rank_ = 1;
    t.d0_ = n;
    t.d1_ = 1;
    t.data_ = std::move(data);
    return t;
  }

  int rank() const { return rank_; }
  std::size_t size() const { return data_.size(); }
  std::size_t dim0() const { return d0_; }
  std::size_t dim1() const { return d1_; }
  std::size_t rows() const { return d0_; }
  std::size_t cols() const { return rank_ == 2 ? d1_ : 1; }
  bool empty() const { return data_.empty(); }

  bool same_shape(const Tensor& o) const {
    return rank_ == o.rank_ && d0_ == o.d0_ && d1_ == o.d1_;
  }

  T& operator[](std::size_t i) { return data_[i]; }
  T operator[](std::size_t i) const { return data_[i]; }

  T& at(std::size_t i, std::size_t j) { return data_[i * d1_ + j]; }
  T at(std::size_t i, std::size_t j) const { return data_[i * d1_ + j]; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  T item() const {
    if (size() != 1) throw ShapeError("Tensor::item: tensor is " + shape_str() + ", not scalar");
    return data_[0];
  }

  void fill(T v) {
    for (T& x : data_) x = v;
  }

  bool all_finite() const {
    for (T x : data_)
      if (!std::isfinite(x)) return false;
    return true;
  }

  std::string shape_str() const {
    if (rank_ == 1) return "[" + std::to_string(d0_) + "]";
    return std::to_string(d0_) + "x" + std::to_string(d1_);
  }

  bool operator==(const Tensor& o) const {
    return rank_ == o.rank_ && d0_ == o.d0_ && d1_ == o.d1_ && data_ == o.data_;
  }

  // Same content with the other scalar width; exact for double -> double,
  // rounds once for double -> float.
  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    if (rank_ == 1) {
      out = Tensor<U>::vector(d0_);
    } else {
      out = Tensor<U>::matrix(d0_, d1_);
    }
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return out;
  }

 private:
  Tensor(int rank, std::size_t d0, std::size_t d1)
      : rank_(rank), d0_(d0), d1_(d1), data_(rank == 1 ? d0 : d0 * d1, T(0)) {}

  int rank_ = 1;
  std::size_t d0_ = 0;
  std::size_t d1_ = 1;
  std::vector<T> data_;
};

}  // namespace dgn
