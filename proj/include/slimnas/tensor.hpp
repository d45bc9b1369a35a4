#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace slimnas {

// Dense row-major tensors. Templated on the scalar so the gradient checker
// can run the identical kernel code in double precision.

template <typename T>
struct Tensor4T {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<T> data;

  Tensor4T() = default;
  Tensor4T(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_), data(static_cast<size_t>(n_) * c_ * h_ * w_, T(0)) {}

  size_t index(int i, int j, int y, int x) const {
    return ((static_cast<size_t>(i) * c + j) * h + y) * w + x;
  }
  T& at(int i, int j, int y, int x) { return data[index(i, j, y, x)]; }
  const T& at(int i, int j, int y, int x) const { return data[index(i, j, y, x)]; }
  size_t size() const { return data.size(); }
};

template <typename T>
struct Tensor2T {
  int rows = 0, cols = 0;
  std::vector<T> data;

  Tensor2T() = default;
  Tensor2T(int r, int c_) : rows(r), cols(c_), data(static_cast<size_t>(r) * c_, T(0)) {}

  size_t index(int r, int c_) const { return static_cast<size_t>(r) * cols + c_; }
  T& at(int r, int c_) { return data[index(r, c_)]; }
  const T& at(int r, int c_) const { return data[index(r, c_)]; }
  size_t size() const { return data.size(); }
};

template <typename T>
struct Tensor1T {
  int len = 0;
  std::vector<T> data;

  Tensor1T() = default;
  explicit Tensor1T(int l) : len(l), data(static_cast<size_t>(l), T(0)) {}

  T& at(int i) { return data[static_cast<size_t>(i)]; }
  const T& at(int i) const { return data[static_cast<size_t>(i)]; }
  size_t size() const { return data.size(); }
};

using Tensor4 = Tensor4T<float>;
using Tensor2 = Tensor2T<float>;
using Tensor1 = Tensor1T<float>;

template <typename T>
bool all_finite(const std::vector<T>& v) {
  for (const T x : v)
    if (!std::isfinite(static_cast<double>(x))) return false;
  return true;
}

}  // namespace slimnas
