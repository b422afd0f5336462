#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "unip/errors.hpp"

namespace unip {

inline std::string shape_str(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

// Dense n-dimensional array, flat row-major storage.
template <typename T>
class TensorT {
 public:
  TensorT() = default;

  explicit TensorT(std::vector<std::size_t> shape)
      : shape_(std::move(shape)), data_(count(shape_), T{0}) {}

  TensorT(std::vector<std::size_t> shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (count(shape_) != data_.size()) {
      throw UsageError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_str(shape_));
    }
  }

  static TensorT full(std::vector<std::size_t> shape, T value) {
    TensorT t(std::move(shape));
    t.fill(value);
    return t;
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const TensorT& o) const { return shape_ == o.shape_; }

  TensorT reshaped(std::vector<std::size_t> new_shape) const {
    if (count(new_shape) != size()) {
      throw UsageError("reshape " + shape_str(shape_) + " -> " +
                       shape_str(new_shape) + " changes element count");
    }
    return TensorT(std::move(new_shape), data_);
  }

  bool all_finite() const {
    for (const T v : data_) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

  static std::size_t count(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return shape.empty() ? 0 : n;
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<T> data_;
};

using Tensor = TensorT<float>;
using Tensor64 = TensorT<double>;

template <typename T>
void check_finite(const TensorT<T>& t, const char* what) {
  if (!t.all_finite()) {
    throw NumericError(std::string("non-finite values in ") + what);
  }
}

template <typename T>
int sign_of(T v) {
  return (v > T{0}) - (v < T{0});  // sign(0) = 0
}

template <typename T>
double l2_norm(const TensorT<T>& t) {
  double s = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    s += static_cast<double>(t[i]) * static_cast<double>(t[i]);
  }
  return std::sqrt(s);
}

template <typename T>
double linf_norm(const TensorT<T>& t) {
  double m = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(t[i])));
  }
  return m;
}

}  // namespace unip
