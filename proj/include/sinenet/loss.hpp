#pragma once

/// Tape-free loss evaluation used for validation and reporting. The
/// differentiable counterpart for training lives in ops.hpp.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "sinenet/field_set.hpp"
#include "sinenet/tensor.hpp"

namespace sinenet {

inline constexpr double kNormFloor = 1e-12;

/// Mean over fields of ||pred_k - target_k||_2 / max(||target_k||_2, 1e-12).
/// Accumulates in double regardless of input precision.
template <typename T>
double scaled_l2(const T* pred, const T* target, int m, size_t plane) {
  if (m < 1) throw std::invalid_argument("scaled_l2: no fields");
  double loss = 0;
  for (int k = 0; k < m; ++k) {
    const T* p = pred + static_cast<size_t>(k) * plane;
    const T* t = target + static_cast<size_t>(k) * plane;
    double num = 0, den = 0;
    for (size_t s = 0; s < plane; ++s) {
      const double d = static_cast<double>(p[s]) - static_cast<double>(t[s]);
      num += d * d;
      den += static_cast<double>(t[s]) * static_cast<double>(t[s]);
    }
    loss += std::sqrt(num) / std::max(std::sqrt(den), kNormFloor);
  }
  return loss / m;
}

template <typename T>
double scaled_l2(const Tensor<T>& pred, const Tensor<T>& target) {
  if (pred.shape != target.shape || pred.shape.size() != 3)
    throw std::invalid_argument("scaled_l2: shape mismatch");
  return scaled_l2(pred.data.data(), target.data.data(), pred.shape[0],
                   static_cast<size_t>(pred.shape[1]) * pred.shape[2]);
}

inline double scaled_l2_onestep(const FieldSet& pred, const FieldSet& target) {
  if (pred.fields() != target.fields() || pred.grid.nx != target.grid.nx ||
      pred.grid.ny != target.grid.ny)
    throw std::invalid_argument("scaled_l2_onestep: shape mismatch");
  return scaled_l2(pred.data.data(), target.data.data(), pred.fields(),
                   static_cast<size_t>(pred.grid.nx) * pred.grid.ny);
}

/// Mean one-step loss over the predicted steps t = h+1..T (1-indexed), i.e.
/// snapshots h..T-1 of two equal-length trajectories.
inline double rollout_loss(const std::vector<FieldSet>& pred, const std::vector<FieldSet>& target,
                           int h) {
  if (pred.size() != target.size()) throw std::invalid_argument("rollout_loss: length mismatch");
  const int t_count = static_cast<int>(pred.size());
  if (h < 1 || h >= t_count) throw std::invalid_argument("rollout_loss: need h < T");
  double acc = 0;
  for (int t = h; t < t_count; ++t) acc += scaled_l2_onestep(pred[t], target[t]);
  return acc / (t_count - h);
}

}  // namespace sinenet
