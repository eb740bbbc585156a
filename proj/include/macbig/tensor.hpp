#ifndef MACBIG_TENSOR_HPP
#define MACBIG_TENSOR_HPP

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "macbig/rng.hpp"
#include "macbig/util.hpp"

namespace macbig {

#ifdef MACBIG_REAL_DOUBLE
using real = double;
#else
using real = float;
#endif

// Dense row-major array with an explicit shape. Kept deliberately plain; all
// layer math lives in free functions.
template <class T>
struct TensorT {
  std::vector<std::size_t> shape;
  std::vector<T> data;

  TensorT() = default;

  explicit TensorT(std::vector<std::size_t> s) : shape(std::move(s)) {
    data.assign(check_shape(shape), T(0));
  }

  static std::size_t check_shape(const std::vector<std::size_t>& s) {
    if (s.empty()) throw ShapeError("tensor shape must not be empty");
    std::size_t n = 1;
    for (std::size_t d : s) {
      if (d == 0) throw ShapeError("tensor dimensions must be positive");
      n *= d;
    }
    return n;
  }

  std::size_t numel() const { return data.size(); }
  std::size_t rows() const { return shape[0]; }
  std::size_t cols() const { return shape.size() > 1 ? shape[1] : 1; }

  T& operator[](std::size_t i) { return data[i]; }
  T operator[](std::size_t i) const { return data[i]; }

  T& at2(std::size_t r, std::size_t c) { return data[r * shape[1] + c]; }
  T at2(std::size_t r, std::size_t c) const { return data[r * shape[1] + c]; }

  T* row(std::size_t r) { return data.data() + r * row_stride(); }
  const T* row(std::size_t r) const { return data.data() + r * row_stride(); }
  std::size_t row_stride() const {
    std::size_t s = 1;
    for (std::size_t i = 1; i < shape.size(); ++i) s *= shape[i];
    return s;
  }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  bool same_shape(const TensorT& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (T v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }
};

using Tensor = TensorT<real>;

template <class T>
std::string shape_str(const TensorT<T>& t) {
  std::string s = "[";
  for (std::size_t i = 0; i < t.shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(t.shape[i]);
  }
  return s + "]";
}

// Glorot-style uniform init: bound = sqrt(6 / (fan_in + fan_out)), values
// consumed from the stream in row-major order.
template <class T = real>
TensorT<T> init_uniform(const std::vector<std::size_t>& shape, Rng& rng,
                        std::size_t fan_in, std::size_t fan_out) {
  if (fan_in + fan_out == 0) throw ShapeError("init_uniform: zero fan sum");
  TensorT<T> t(shape);
  double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : t.data) v = static_cast<T>(rng.uniform(-bound, bound));
  return t;
}

template <class T = real>
TensorT<T> init_uniform_range(const std::vector<std::size_t>& shape, Rng& rng,
                              double lo, double hi) {
  TensorT<T> t(shape);
  for (auto& v : t.data) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

}  // namespace macbig

#endif
