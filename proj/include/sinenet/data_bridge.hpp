#pragma once

/// Conversions between simulation snapshots (double FieldSets) and the
/// network's [M, N1, N2] tensors, plus per-field normalization on tensors.

#include <stdexcept>
#include <vector>

#include "sinenet/field_set.hpp"
#include "sinenet/norm.hpp"
#include "sinenet/tensor.hpp"

namespace sinenet {

template <typename T>
Tensor<T> snapshot_tensor(const FieldSet& fs) {
  Tensor<T> t({fs.fields(), fs.grid.nx, fs.grid.ny});
  for (size_t i = 0; i < fs.data.size(); ++i) t.data[i] = static_cast<T>(fs.data[i]);
  return t;
}

template <typename T>
FieldSet tensor_to_fieldset(const Tensor<T>& t, const GridSpec& grid,
                            const std::vector<std::string>& names, double time) {
  if (t.shape.size() != 3 || t.shape[0] != static_cast<int>(names.size()) ||
      t.shape[1] != grid.nx || t.shape[2] != grid.ny)
    throw std::invalid_argument("tensor_to_fieldset: shape mismatch");
  FieldSet fs(grid, names, time);
  for (size_t i = 0; i < fs.data.size(); ++i) fs.data[i] = static_cast<double>(t.data[i]);
  return fs;
}

/// Stacks h frames (oldest first) into one [h*M, N1, N2] tensor.
template <typename T>
Tensor<T> stack_history(const std::vector<const Tensor<T>*>& frames) {
  if (frames.empty()) throw std::invalid_argument("stack_history: no frames");
  const auto& s0 = frames.front()->shape;
  Tensor<T> out({static_cast<int>(frames.size()) * s0[0], s0[1], s0[2]});
  size_t off = 0;
  for (const Tensor<T>* f : frames) {
    if (f->shape != s0) throw std::invalid_argument("stack_history: frame shape mismatch");
    std::copy(f->data.begin(), f->data.end(), out.data.begin() + off);
    off += f->data.size();
  }
  return out;
}

/// y[f] = (x[f] - mean[f]) / std[f] per field plane.
template <typename T>
void normalize_tensor(Tensor<T>& t, const NormStats& stats) {
  if (t.shape.size() != 3 || t.shape[0] != static_cast<int>(stats.mean.size()))
    throw std::invalid_argument("normalize_tensor: field count mismatch");
  const size_t plane = static_cast<size_t>(t.shape[1]) * t.shape[2];
  for (int f = 0; f < t.shape[0]; ++f) {
    const T mu = static_cast<T>(stats.mean[f]);
    const T inv = static_cast<T>(1.0 / stats.std[f]);
    T* p = t.data.data() + static_cast<size_t>(f) * plane;
    for (size_t s = 0; s < plane; ++s) p[s] = (p[s] - mu) * inv;
  }
}

template <typename T>
void denormalize_tensor(Tensor<T>& t, const NormStats& stats) {
  if (t.shape.size() != 3 || t.shape[0] != static_cast<int>(stats.mean.size()))
    throw std::invalid_argument("denormalize_tensor: field count mismatch");
  const size_t plane = static_cast<size_t>(t.shape[1]) * t.shape[2];
  for (int f = 0; f < t.shape[0]; ++f) {
    const T mu = static_cast<T>(stats.mean[f]);
    const T sd = static_cast<T>(stats.std[f]);
    T* p = t.data.data() + static_cast<size_t>(f) * plane;
    for (size_t s = 0; s < plane; ++s) p[s] = p[s] * sd + mu;
  }
}

}  // namespace sinenet
