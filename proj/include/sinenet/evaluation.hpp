#pragma once

/// Autoregressive rollout and error reporting. Rollouts seed with true
/// history frames, normalize each input window, and denormalize each
/// prediction; the window then shifts with the predicted frame. Reported
/// errors are scaled relative L2 in physical (denormalized) space, in
/// percent. The aggregate rollout error is the mean of the per-step curve
/// by construction.

#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <sys/resource.h>

#include "sinenet/autograd.hpp"
#include "sinenet/data_bridge.hpp"
#include "sinenet/field_set.hpp"
#include "sinenet/loss.hpp"
#include "sinenet/model.hpp"
#include "sinenet/model_config.hpp"
#include "sinenet/norm.hpp"
#include "sinenet/trainer.hpp"

namespace sinenet {

struct RolloutReport {
  int format_version = 1;
  std::string model_id;
  std::string dataset_id;
  int history = 0;
  std::vector<double> per_step_percent;  ///< predicted steps t = h+1..T, physical space
  double one_step_percent = 0.0;         ///< teacher-forced mean over all valid starts
  double rollout_percent = 0.0;          ///< mean of per_step_percent
  double wall_clock_seconds = 0.0;
  long peak_rss_kb = 0;
};

/// Rolls a trained model forward from the first h true frames of `traj`,
/// returning a trajectory whose remaining snapshots are model predictions.
template <typename T>
Trajectory rollout(Model<T>& model, const NormStats& stats, const Trajectory& traj, int h) {
  const int t_len = traj.length();
  if (h < 1 || h >= t_len) throw std::invalid_argument("rollout: need 1 <= h < trajectory length");
  NoGradGuard ng;
  const bool cond = model.config.conditioning != CondMode::none;
  Kappa kap;
  kap.dt = traj.dt;
  if (auto it = traj.pde_params.find("forcing"); it != traj.pde_params.end())
    kap.force = it->second;

  Trajectory out;
  out.grid = traj.grid;
  out.dt = traj.dt;
  out.pde_params = traj.pde_params;
  out.id = traj.id;
  out.seed = traj.seed;
  out.snapshots.reserve(t_len);

  std::vector<Tensor<T>> window;
  for (int s = 0; s < h; ++s) {
    out.snapshots.push_back(traj.snapshots[s]);
    Tensor<T> t = snapshot_tensor<T>(traj.snapshots[s]);
    normalize_tensor(t, stats);
    window.push_back(std::move(t));
  }
  for (int s = h; s < t_len; ++s) {
    std::vector<const Tensor<T>*> view;
    for (const auto& f : window) view.push_back(&f);
    auto pred = model.forward(make_const(stack_history(view)), cond ? &kap : nullptr);
    for (T v : pred->val.data)
      if (!std::isfinite(static_cast<double>(v)))
        throw std::runtime_error("rollout produced a non-finite value at step " +
                                 std::to_string(s));
    Tensor<T> phys = pred->val;
    denormalize_tensor(phys, stats);
    out.snapshots.push_back(
        tensor_to_fieldset(phys, traj.grid, traj.snapshots[0].field_names, traj.snapshots[s].time));
    window.erase(window.begin());
    window.push_back(pred->val);
  }
  return out;
}

/// Aggregates rollout and teacher-forced one-step errors over a test set.
template <typename T>
RolloutReport evaluate(Model<T>& model, const NormStats& stats, const Dataset& ds, int h,
                       const std::string& model_id = "", const std::string& dataset_id = "") {
  if (ds.empty()) throw std::invalid_argument("evaluate: empty dataset");
  const int t_len = ds[0].length();
  for (const auto& traj : ds.trajectories)
    if (traj.length() != t_len)
      throw std::invalid_argument("evaluate: trajectories must share a length");
  if (h < 1 || h >= t_len) throw std::invalid_argument("evaluate: need 1 <= h < trajectory length");

  const auto t0 = std::chrono::steady_clock::now();
  RolloutReport rep;
  rep.model_id = model_id;
  rep.dataset_id = dataset_id;
  rep.history = h;
  rep.per_step_percent.assign(t_len - h, 0.0);

  NoGradGuard ng;
  const bool cond = model.config.conditioning != CondMode::none;
  double one_step_sum = 0.0;
  long long one_step_n = 0;
  for (const auto& traj : ds.trajectories) {
    Trajectory pred = rollout(model, stats, traj, h);
    for (int s = h; s < t_len; ++s)
      rep.per_step_percent[s - h] += scaled_l2_onestep(pred.snapshots[s], traj.snapshots[s]);

    Kappa kap;
    kap.dt = traj.dt;
    if (auto it = traj.pde_params.find("forcing"); it != traj.pde_params.end())
      kap.force = it->second;
    for (int s = h - 1; s + 1 < t_len; ++s) {
      std::vector<const Tensor<T>*> view;
      std::vector<Tensor<T>> frames;
      frames.reserve(h);
      for (int q = s - h + 1; q <= s; ++q) {
        Tensor<T> t = snapshot_tensor<T>(traj.snapshots[q]);
        normalize_tensor(t, stats);
        frames.push_back(std::move(t));
      }
      for (const auto& f : frames) view.push_back(&f);
      auto out = model.forward(make_const(stack_history(view)), cond ? &kap : nullptr);
      Tensor<T> phys = out->val;
      denormalize_tensor(phys, stats);
      one_step_sum += scaled_l2(phys, snapshot_tensor<T>(traj.snapshots[s + 1]));
      ++one_step_n;
    }
  }
  const double inv_n = 1.0 / static_cast<double>(ds.size());
  double curve_sum = 0.0;
  for (auto& v : rep.per_step_percent) {
    v *= 100.0 * inv_n;
    curve_sum += v;
  }
  rep.rollout_percent = curve_sum / static_cast<double>(rep.per_step_percent.size());
  rep.one_step_percent = 100.0 * one_step_sum / static_cast<double>(one_step_n);
  rep.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  struct rusage ru;
  getrusage(RUSAGE_SELF, &ru);
  rep.peak_rss_kb = ru.ru_maxrss;
  return rep;
}

struct KSweepRow {
  int k = 0;
  double multiplier = 0.0;
  long long param_count = 0;
  LogRow final_log;
  RolloutReport report;
};

/// Trains and evaluates SineNet-K for each K at a matched parameter budget;
/// multipliers are solved per K so every count lands within 1% of `target`.
template <typename T>
std::vector<KSweepRow> k_sweep(const ModelConfig& base, const std::vector<int>& ks,
                               long long target_params, const Dataset& train_ds,
                               const Dataset& valid_ds, const Dataset& test_ds,
                               const TrainConfig& tcfg,
                               const std::function<void(const LogRow&)>& sink = nullptr) {
  if (ks.empty()) throw std::invalid_argument("k_sweep: empty K list");
  std::vector<KSweepRow> rows;
  for (int k : ks) {
    ModelConfig cfg = base;
    cfg.arch = "sinenet";
    cfg.k_waves = k;
    cfg.multiplier = solve_multiplier(k, cfg.z0, cfg.levels, target_params);
    KSweepRow row;
    row.k = k;
    row.multiplier = cfg.multiplier;
    row.param_count = count_parameters(cfg);
    if (std::abs(static_cast<double>(row.param_count - target_params)) >
        0.01 * static_cast<double>(target_params))
      throw std::runtime_error("k_sweep: solved model misses the parameter budget");
    auto result = train<T>(cfg, train_ds, valid_ds, tcfg, sink);
    row.final_log = result.log.back();
    row.report = evaluate(*result.model, result.stats, test_ds, tcfg.history,
                          "sinenet_k" + std::to_string(k), "test");
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string report_to_json(const RolloutReport& rep);
RolloutReport report_from_json(const std::string& text);
std::string log_row_to_jsonl(const LogRow& row);
std::string ksweep_to_json(const std::vector<KSweepRow>& rows);

}  // namespace sinenet
