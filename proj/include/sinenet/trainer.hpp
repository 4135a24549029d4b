#pragma once

/// End-to-end training loop: epoch sampling, history noise, per-sample
/// backprop with batch-mean gradient accumulation, AdamW updates under the
/// warmup+cosine schedule, per-epoch validation, and best-checkpoint restore.
///
/// Losses are computed in normalized space. Validation reports both the
/// teacher-forced one-step loss over every valid start and the autoregressive
/// rollout loss from the t=h start. The run is bit-deterministic for a fixed
/// seed: sampling, noise, initialization, and reduction orders are all fixed.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "sinenet/autograd.hpp"
#include "sinenet/data_bridge.hpp"
#include "sinenet/field_set.hpp"
#include "sinenet/loss.hpp"
#include "sinenet/model.hpp"
#include "sinenet/norm.hpp"
#include "sinenet/optimizer.hpp"
#include "sinenet/rng.hpp"
#include "sinenet/sampler.hpp"
#include "sinenet/schedule.hpp"

namespace sinenet {

struct TrainConfig {
  int epochs = 50;
  int batch_size = 32;
  double lr_init = 2e-4;
  double lr_min = 1e-7;
  int warmup_epochs = 5;
  double weight_decay = 0.0;
  double noise_sigma = 0.01;
  unsigned long long seed = 0;
  int history = 2;
  bool conditioning = false;
  std::string precision = "float32";

  void validate() const {
    if (epochs < 1) throw std::invalid_argument("train config: epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
    if (!(lr_min < lr_init)) throw std::invalid_argument("train config: lr_min must be < lr_init");
    if (warmup_epochs < 0 || warmup_epochs >= epochs)
      throw std::invalid_argument("train config: warmup_epochs must be < epochs");
    if (noise_sigma < 0.0) throw std::invalid_argument("train config: noise_sigma must be >= 0");
    if (history < 1) throw std::invalid_argument("train config: history must be >= 1");
    if (precision != "float32" && precision != "float64")
      throw std::invalid_argument("train config: precision must be float32 or float64");
  }
};

std::string train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const std::string& text);

struct LogRow {
  int epoch = 0;       ///< 1-based; row is written after the epoch finishes
  long long step = 0;  ///< optimizer steps completed so far
  double lr = 0.0;     ///< last learning rate applied this epoch
  double train_loss = 0.0;
  double valid_1step = 0.0;
  double valid_rollout = 0.0;
};

template <typename T>
struct TrainResult {
  std::shared_ptr<Model<T>> model;  ///< parameters restored to the best epoch
  NormStats stats;
  std::vector<LogRow> log;
  int best_epoch = 0;
  double best_valid_rollout = 0.0;
  double initial_valid_rollout = 0.0;  ///< untrained model, for progress ratios
};

namespace detail {

/// Normalized per-trajectory frame tensors, oldest first.
template <typename T>
std::vector<std::vector<Tensor<T>>> normalized_frames(const Dataset& ds, const NormStats& stats) {
  std::vector<std::vector<Tensor<T>>> out(static_cast<size_t>(ds.size()));
  for (int i = 0; i < ds.size(); ++i) {
    out[i].reserve(ds[i].snapshots.size());
    for (const auto& fs : ds[i].snapshots) {
      Tensor<T> t = snapshot_tensor<T>(fs);
      normalize_tensor(t, stats);
      out[i].push_back(std::move(t));
    }
  }
  return out;
}

template <typename T>
Tensor<T> history_at(const std::vector<Tensor<T>>& frames, int last, int h) {
  std::vector<const Tensor<T>*> view;
  view.reserve(h);
  for (int s = last - h + 1; s <= last; ++s) view.push_back(&frames[s]);
  return stack_history(view);
}

inline Kappa kappa_of(const Trajectory& traj) {
  Kappa k;
  k.dt = traj.dt;
  auto it = traj.pde_params.find("forcing");
  k.force = it == traj.pde_params.end() ? 0.0 : it->second;
  return k;
}

struct ValidScores {
  double one_step = 0.0;  ///< loss of the first rollout step, teacher-forced
  double rollout = 0.0;   ///< mean per-step loss over the whole rollout
};

/// Autoregressive rollout loss from the t=h start, normalized space; the
/// window shifts with predicted frames. The first step reads true history
/// only, so it doubles as the one-step validation score. Non-finite
/// predictions abort.
template <typename T>
ValidScores validate(Model<T>& model, const Dataset& ds,
                     const std::vector<std::vector<Tensor<T>>>& frames, int h, bool cond,
                     const std::string& context) {
  NoGradGuard ng;
  double one_sum = 0.0;
  double roll_sum = 0.0;
  long long n = 0;
  for (int i = 0; i < ds.size(); ++i) {
    const Kappa kap = kappa_of(ds[i]);
    const int t_len = static_cast<int>(frames[i].size());
    std::vector<Tensor<T>> window(frames[i].begin(), frames[i].begin() + h);
    double traj_sum = 0.0;
    for (int s = h; s < t_len; ++s) {
      std::vector<const Tensor<T>*> view;
      for (const auto& f : window) view.push_back(&f);
      auto pred = model.forward(make_const(stack_history(view)), cond ? &kap : nullptr);
      for (T v : pred->val.data)
        if (!std::isfinite(static_cast<double>(v)))
          throw std::runtime_error("training diverged: non-finite rollout prediction at " + context);
      const double step_loss = static_cast<double>(scaled_l2(pred->val, frames[i][s]));
      if (s == h) one_sum += step_loss;
      traj_sum += step_loss;
      window.erase(window.begin());
      window.push_back(pred->val);
    }
    roll_sum += traj_sum / static_cast<double>(t_len - h);
    ++n;
  }
  return {one_sum / static_cast<double>(n), roll_sum / static_cast<double>(n)};
}

template <typename T>
std::vector<Tensor<T>> snapshot_params(const Model<T>& model) {
  std::vector<Tensor<T>> out;
  out.reserve(model.parameters().size());
  for (const auto& p : model.parameters()) out.push_back(p->val);
  return out;
}

template <typename T>
void restore_params(Model<T>& model, const std::vector<Tensor<T>>& snap) {
  const auto& params = model.parameters();
  for (size_t i = 0; i < params.size(); ++i) params[i]->val = snap[i];
}

}  // namespace detail

/// Trains a freshly initialized model on `train_ds`, validating on
/// `valid_ds` after every epoch. `sink`, when set, receives each completed
/// epoch's log row (for JSONL streaming).
template <typename T>
TrainResult<T> train(const ModelConfig& mcfg, const Dataset& train_ds, const Dataset& valid_ds,
                     const TrainConfig& tcfg,
                     const std::function<void(const LogRow&)>& sink = nullptr) {
  tcfg.validate();
  mcfg.validate();
  if (train_ds.empty() || valid_ds.empty())
    throw std::invalid_argument("train: empty dataset");
  if (mcfg.history != tcfg.history)
    throw std::invalid_argument("train: history mismatch between model and train configs");
  if (mcfg.fields != train_ds[0].fields())
    throw std::invalid_argument("train: model field count does not match dataset");
  const bool cond = mcfg.conditioning != CondMode::none;
  if (cond && !tcfg.conditioning)
    throw std::invalid_argument("train: model expects conditioning but it is disabled");

  TrainResult<T> result;
  result.stats = compute_norm_stats(train_ds.trajectories);
  result.model = build_model<T>(mcfg, tcfg.seed);

  const auto train_frames = detail::normalized_frames<T>(train_ds, result.stats);
  const auto valid_frames = detail::normalized_frames<T>(valid_ds, result.stats);

  const int h = tcfg.history;
  const int t_len = train_ds[0].length();
  const long long pairs_per_epoch =
      static_cast<long long>(t_len) * static_cast<long long>(train_ds.size());
  const long long steps_per_epoch = (pairs_per_epoch + tcfg.batch_size - 1) / tcfg.batch_size;
  const long long total_steps = steps_per_epoch * tcfg.epochs;
  const long long warmup_steps = steps_per_epoch * tcfg.warmup_epochs;

  Rng sampler_rng = Rng::stream(tcfg.seed, 1);
  Rng noise_rng = Rng::stream(tcfg.seed, 2);
  AdamW<T> opt(result.model->parameters(), 0.9, 0.999, 1e-8, tcfg.weight_decay);

  result.initial_valid_rollout =
      detail::validate(*result.model, valid_ds, valid_frames, h, cond, "epoch 0").rollout;
  result.best_valid_rollout = std::numeric_limits<double>::infinity();
  std::vector<Tensor<T>> best_params;

  long long global_step = 0;
  for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    auto pairs = sample_epoch(train_ds, h, sampler_rng);
    double epoch_loss = 0.0;
    double last_lr = 0.0;
    for (size_t b = 0; b < pairs.size(); b += tcfg.batch_size) {
      const size_t b_end = std::min(pairs.size(), b + static_cast<size_t>(tcfg.batch_size));
      const T inv_n = static_cast<T>(1.0 / static_cast<double>(b_end - b));
      last_lr = lr_at(global_step, total_steps, warmup_steps, tcfg.lr_init, tcfg.lr_min);
      opt.zero_grad();
      for (size_t p = b; p < b_end; ++p) {
        const auto& pair = pairs[p];
        Tensor<T> hist = detail::history_at(train_frames[pair.traj], pair.start, h);
        inject_noise(hist, tcfg.noise_sigma, noise_rng);
        const Kappa kap = detail::kappa_of(train_ds[pair.traj]);
        auto pred = result.model->forward(make_const(std::move(hist)), cond ? &kap : nullptr);
        auto loss = scaled_l2_loss(pred, train_frames[pair.traj][pair.start + 1]);
        const double lv = static_cast<double>(loss->val.data[0]);
        if (!std::isfinite(lv))
          throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                   std::to_string(epoch) + ", step " +
                                   std::to_string(global_step));
        epoch_loss += lv;
        backward(loss, inv_n);
      }
      opt.step(last_lr);
      ++global_step;
    }

    LogRow row;
    row.epoch = epoch;
    row.step = global_step;
    row.lr = last_lr;
    row.train_loss = epoch_loss / static_cast<double>(pairs.size());
    const auto scores = detail::validate(*result.model, valid_ds, valid_frames, h, cond,
                                         "epoch " + std::to_string(epoch));
    row.valid_1step = scores.one_step;
    row.valid_rollout = scores.rollout;
    if (!std::isfinite(row.valid_1step) || !std::isfinite(row.valid_rollout))
      throw std::runtime_error("training diverged: non-finite validation loss at epoch " +
                               std::to_string(epoch));
    result.log.push_back(row);
    if (sink) sink(row);

    if (row.valid_rollout < result.best_valid_rollout) {
      result.best_valid_rollout = row.valid_rollout;
      result.best_epoch = epoch;
      best_params = detail::snapshot_params(*result.model);
    }
  }

  detail::restore_params(*result.model, best_params);
  return result;
}

}  // namespace sinenet
