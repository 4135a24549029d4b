#pragma once

#include <string>
#include <vector>

#include "sinenet/nn_types.hpp"

namespace sinenet {

/// Architecture description. `sinenet` covers the multi-wave model and its
/// entangled/bottleneck variants via flags; `deeper_unet` stacks K conv blocks
/// per resolution level in a single U-shape; `dil_resnet` is the constant
/// resolution dilated residual network.
struct ModelConfig {
  std::string arch = "sinenet";

  int k_waves = 1;          ///< K: wave count (sinenet) or blocks per level (deeper_unet)
  int z0 = 64;              ///< channels after the encoder conv
  int levels = 4;           ///< L: down/up depth per wave
  double multiplier = 2.0;  ///< m: per-level channel growth, z_l = floor(z0 * m^l)
  PadMode padding = PadMode::circular;
  bool disentangled = true;  ///< down blocks concatenate the wave-input pyramid
  bool wave_residual = true;
  bool bottleneck = false;  ///< decode/encode pair between consecutive waves
  CondMode conditioning = CondMode::none;
  int history = 1;  ///< h: input snapshots
  int fields = 1;   ///< M: physical fields per snapshot

  // dil_resnet only.
  int width = 128;
  int blocks = 4;
  std::vector<int> dilations = {1, 2, 4, 8, 4, 2, 1};

  /// Throws invalid_argument on out-of-range fields (including an asymmetric
  /// dil_resnet dilation schedule or a channel schedule hitting zero).
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

/// Channels per level l = 1..L: floor(z0 * m^l).
std::vector<int> channel_schedule(int z0, double m, int levels);

/// Closed-form trainable parameter count for a config; independent of the
/// builders so the two can be checked against each other.
long long count_parameters(const ModelConfig& cfg);

/// Smallest m in [1.01, 3] whose parameter count is within 0.5% of target.
/// The count is nondecreasing in m, so bisection brackets the lower crossing.
/// Throws runtime_error naming the best m and its count when no m qualifies.
double solve_multiplier(int k_waves, int z0, int levels, long long target_param_count,
                        const ModelConfig& base);
double solve_multiplier(int k_waves, int z0, int levels, long long target_param_count);

std::string config_to_json(const ModelConfig& cfg);
ModelConfig config_from_json(const std::string& text);

}  // namespace sinenet
