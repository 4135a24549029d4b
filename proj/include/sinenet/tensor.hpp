#pragma once

#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace sinenet {

/// Dense row-major tensor with a dynamic shape. The network code interprets
/// shapes by convention: activations [C, H, W], conv weights [Co, Ci, k, k],
/// vectors [n]. Scalar type T is float for the training path and double for
/// the numerical-oracle path.
template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(count(shape), T(0)) {}
  Tensor(std::vector<int> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != count(shape)) throw std::invalid_argument("Tensor: shape/data size mismatch");
  }

  static std::size_t count(const std::vector<int>& s) {
    std::size_t n = 1;
    for (int d : s) {
      if (d <= 0) throw std::invalid_argument("Tensor: nonpositive dim");
      n *= std::size_t(d);
    }
    return n;
  }

  std::size_t numel() const { return data.size(); }
  int dim(int i) const { return shape[std::size_t(i)]; }

  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  /// Elementwise accumulate; shapes must match.
  void add_(const Tensor& o) {
    if (!same_shape(o)) throw std::invalid_argument("Tensor::add_: shape mismatch");
    for (std::size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = U(data[i]);
    return out;
  }
};

inline std::string shape_string(const std::vector<int>& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + "]";
}

}  // namespace sinenet
