#pragma once

/// AdamW with decoupled weight decay. Moment buffers match the parameter
/// element type; bias correction uses double powers of beta.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "sinenet/autograd.hpp"

namespace sinenet {

template <typename T>
class AdamW {
 public:
  AdamW(std::vector<Value<T>> params, double beta1 = 0.9, double beta2 = 0.999,
        double eps = 1e-8, double weight_decay = 0.0)
      : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps),
        weight_decay_(weight_decay) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
      m_.emplace_back(p->val.numel(), T(0));
      v_.emplace_back(p->val.numel(), T(0));
    }
  }

  /// One update over all parameters; gradients must already be accumulated.
  void step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const T b1 = static_cast<T>(beta1_), b2 = static_cast<T>(beta2_);
    const T one_minus_b1 = static_cast<T>(1.0 - beta1_);
    const T one_minus_b2 = static_cast<T>(1.0 - beta2_);
    const T inv_bc1 = static_cast<T>(1.0 / bc1);
    const T inv_bc2 = static_cast<T>(1.0 / bc2);
    const T eps = static_cast<T>(eps_);
    const T step_lr = static_cast<T>(lr);
    const T decay = static_cast<T>(lr * weight_decay_);
    for (size_t i = 0; i < params_.size(); ++i) {
      auto& node = *params_[i];
      if (node.grad.empty()) continue;
      T* w = node.val.data.data();
      const T* g = node.grad.data();
      T* m = m_[i].data();
      T* v = v_[i].data();
      const size_t n = node.val.numel();
      for (size_t j = 0; j < n; ++j) {
        m[j] = b1 * m[j] + one_minus_b1 * g[j];
        v[j] = b2 * v[j] + one_minus_b2 * g[j] * g[j];
        const T mhat = m[j] * inv_bc1;
        const T vhat = v[j] * inv_bc2;
        w[j] -= step_lr * mhat / (std::sqrt(vhat) + eps) + decay * w[j];
      }
    }
  }

  void zero_grad() {
    for (auto& p : params_) p->zero_grad();
  }

  long long step_count() const { return t_; }

 private:
  std::vector<Value<T>> params_;
  std::vector<std::vector<T>> m_, v_;
  double beta1_, beta2_, eps_, weight_decay_;
  long long t_ = 0;
};

}  // namespace sinenet
