#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "sinenet/field_set.hpp"

namespace sinenet {

/// Per-field mean/std over a training split. Fields are normalized
/// independently (velocity components count as separate fields).
struct NormStats {
  std::vector<double> mean;
  std::vector<double> std;

  int fields() const { return int(mean.size()); }
};

/// Std floor: constant fields would otherwise divide by zero.
inline constexpr double kStdFloor = 1e-8;

/// Mean/std per field over every snapshot and grid point of `dataset`.
/// Two-pass population statistics in double precision.
inline NormStats compute_norm_stats(const std::vector<Trajectory>& dataset) {
  if (dataset.empty()) throw std::invalid_argument("compute_norm_stats: empty dataset");
  const int m = dataset.front().fields();
  for (const auto& tr : dataset)
    if (tr.fields() != m) throw std::invalid_argument("compute_norm_stats: field count mismatch");

  NormStats st;
  st.mean.assign(m, 0.0);
  st.std.assign(m, 0.0);
  std::vector<long double> sum(m, 0.0L);
  std::size_t count = 0;
  for (const auto& tr : dataset)
    for (const auto& fs : tr.snapshots) {
      const std::size_t n = std::size_t(fs.grid.nx) * fs.grid.ny;
      count += n;
      for (int f = 0; f < m; ++f) {
        const double* p = fs.field(f);
        long double acc = 0.0L;
        for (std::size_t i = 0; i < n; ++i) acc += p[i];
        sum[f] += acc;
      }
    }
  for (int f = 0; f < m; ++f) st.mean[f] = double(sum[f] / count);

  std::vector<long double> sq(m, 0.0L);
  for (const auto& tr : dataset)
    for (const auto& fs : tr.snapshots) {
      const std::size_t n = std::size_t(fs.grid.nx) * fs.grid.ny;
      for (int f = 0; f < m; ++f) {
        const double* p = fs.field(f);
        long double acc = 0.0L;
        for (std::size_t i = 0; i < n; ++i) {
          const double d = p[i] - st.mean[f];
          acc += (long double)(d) * d;
        }
        sq[f] += acc;
      }
    }
  for (int f = 0; f < m; ++f) st.std[f] = std::max(double(std::sqrt(sq[f] / count)), kStdFloor);
  return st;
}

inline NormStats compute_norm_stats(const Dataset& ds) { return compute_norm_stats(ds.trajectories); }

/// out[f] = (in[f] - mean[f]) / std[f].
inline FieldSet normalize(const FieldSet& fs, const NormStats& st) {
  if (fs.fields() != st.fields()) throw std::invalid_argument("normalize: field count mismatch");
  FieldSet out = fs;
  const std::size_t n = std::size_t(fs.grid.nx) * fs.grid.ny;
  for (int f = 0; f < fs.fields(); ++f) {
    double* p = out.field(f);
    const double mu = st.mean[f], inv = 1.0 / st.std[f];
    for (std::size_t i = 0; i < n; ++i) p[i] = (p[i] - mu) * inv;
  }
  return out;
}

/// Exact inverse of normalize.
inline FieldSet denormalize(const FieldSet& fs, const NormStats& st) {
  if (fs.fields() != st.fields()) throw std::invalid_argument("denormalize: field count mismatch");
  FieldSet out = fs;
  const std::size_t n = std::size_t(fs.grid.nx) * fs.grid.ny;
  for (int f = 0; f < fs.fields(); ++f) {
    double* p = out.field(f);
    const double mu = st.mean[f], sd = st.std[f];
    for (std::size_t i = 0; i < n; ++i) p[i] = p[i] * sd + mu;
  }
  return out;
}

}  // namespace sinenet
