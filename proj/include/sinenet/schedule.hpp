#pragma once

/// Learning-rate schedule: per-step linear warmup from lr_min to lr_init,
/// then cosine decay back to lr_min over the remaining steps.
///
/// Endpoints are exact: step 0 yields lr_min, step warmup_steps yields
/// lr_init, and the final step yields lr_min again.

#include <cmath>
#include <stdexcept>

namespace sinenet {

inline double lr_at(long long step, long long total_steps, long long warmup_steps,
                    double lr_init, double lr_min) {
  if (total_steps <= 0) throw std::invalid_argument("lr_at: total_steps must be positive");
  if (step < 0 || step >= total_steps) throw std::invalid_argument("lr_at: step out of range");
  if (warmup_steps < 0 || warmup_steps >= total_steps)
    throw std::invalid_argument("lr_at: warmup_steps out of range");
  if (step < warmup_steps)
    return lr_min + (lr_init - lr_min) * static_cast<double>(step) / static_cast<double>(warmup_steps);
  const long long span = (total_steps - 1) - warmup_steps;
  const double q = static_cast<double>(step - warmup_steps) / static_cast<double>(span > 0 ? span : 1);
  return lr_min + (lr_init - lr_min) * 0.5 * (1.0 + std::cos(M_PI * q));
}

}  // namespace sinenet
