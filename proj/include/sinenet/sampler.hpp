#pragma once

/// Epoch sampling for one-step training pairs and Gaussian history noise.
///
/// An epoch makes T passes over the trajectory list; each pass draws one
/// start per trajectory uniformly from the valid range, then the whole
/// epoch's pair list is shuffled. With history h and trajectory length T,
/// valid 0-indexed last-history frames are s in {h-1, ..., T-2}: frames
/// s-h+1..s feed the model and frame s+1 is the target.

#include <stdexcept>
#include <vector>

#include "sinenet/field_set.hpp"
#include "sinenet/rng.hpp"
#include "sinenet/tensor.hpp"

namespace sinenet {

struct SamplePair {
  int traj = 0;   ///< trajectory index within the dataset
  int start = 0;  ///< 0-indexed snapshot of the last history frame
};

inline std::vector<SamplePair> sample_epoch(int n_traj, int t_snapshots, int history, Rng& rng) {
  if (n_traj <= 0) throw std::invalid_argument("sample_epoch: no trajectories");
  if (history < 1) throw std::invalid_argument("sample_epoch: history must be >= 1");
  if (t_snapshots <= history)
    throw std::invalid_argument("sample_epoch: trajectory too short for history");
  const int n_starts = t_snapshots - history;  // starts h-1 .. T-2
  std::vector<SamplePair> pairs;
  pairs.reserve(static_cast<size_t>(t_snapshots) * n_traj);
  for (int pass = 0; pass < t_snapshots; ++pass)
    for (int j = 0; j < n_traj; ++j)
      pairs.push_back({j, history - 1 + static_cast<int>(rng.uniform_int(n_starts))});
  // Fisher-Yates so every ordering is equally likely under the stream.
  for (size_t i = pairs.size(); i > 1; --i) {
    const size_t k = static_cast<size_t>(rng.uniform_int(i));
    std::swap(pairs[i - 1], pairs[k]);
  }
  return pairs;
}

inline std::vector<SamplePair> sample_epoch(const Dataset& ds, int history, Rng& rng) {
  if (ds.empty()) throw std::invalid_argument("sample_epoch: no trajectories");
  const int t_snapshots = ds[0].length();
  for (const auto& traj : ds.trajectories)
    if (traj.length() != t_snapshots)
      throw std::invalid_argument("sample_epoch: trajectories must share a length");
  return sample_epoch(static_cast<int>(ds.size()), t_snapshots, history, rng);
}

template <typename T>
void inject_noise(Tensor<T>& t, double sigma, Rng& rng) {
  if (sigma == 0.0) return;
  for (auto& v : t.data) v += static_cast<T>(sigma * rng.normal());
}

}  // namespace sinenet
