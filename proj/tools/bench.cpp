/// Micro-benchmark for the training inner loop: times forward and
/// forward+backward passes at a given model scale and projects the cost of
/// a full K-trend experiment (12 runs of 30 epochs on 200 trajectories).

#include <chrono>
#include <iostream>

#include <malloc.h>

#include <CLI11.hpp>

#include "sinenet/model.hpp"
#include "sinenet/ops.hpp"
#include "sinenet/rng.hpp"

using namespace sinenet;

int main(int argc, char** argv) {
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  CLI::App app{"training-step benchmark"};
  int k = 4, z0 = 16, n = 64, history = 2, iters = 20;
  double m = 1.30;
  long long target = 0;
  app.add_option("--k", k, "waves");
  app.add_option("--z0", z0, "latent channels");
  app.add_option("--m", m, "channel multiplier");
  app.add_option("--target", target, "parameter budget (overrides --m)");
  app.add_option("--n", n, "grid side");
  app.add_option("--iters", iters, "timed iterations");
  CLI11_PARSE(app, argc, argv);

  ModelConfig cfg;
  cfg.arch = "sinenet";
  cfg.k_waves = k;
  cfg.z0 = z0;
  cfg.multiplier = target > 0 ? solve_multiplier(k, z0, 4, target) : m;
  std::cout << "multiplier: " << cfg.multiplier << "\n";
  cfg.history = history;
  cfg.fields = 1;
  auto model = build_model<float>(cfg, 0);
  std::cout << "params: " << model->parameter_count() << "\n";

  Rng rng = Rng::stream(1, 0);
  Tensor<float> x({history, n, n});
  for (auto& v : x.data) v = static_cast<float>(rng.normal());
  Tensor<float> tgt({1, n, n});
  for (auto& v : tgt.data) v = static_cast<float>(rng.normal());

  auto fwd_only = [&] {
    NoGradGuard ng;
    auto y = model->forward(make_const(x));
    return y->val.data[0];
  };
  auto fwd_bwd = [&] {
    auto y = model->forward(make_const(x));
    auto loss = scaled_l2_loss(y, tgt);
    backward(loss, 1.0f);
    return loss->val.data[0];
  };

  fwd_only();
  fwd_bwd();
  model->zero_grads();

  auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < iters; ++i) fwd_only();
  const double fwd_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count() /
      iters;
  t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < iters; ++i) {
    fwd_bwd();
    model->zero_grads();
  }
  const double step_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count() /
      iters;

  std::cout << "forward:          " << fwd_ms << " ms\n";
  std::cout << "forward+backward: " << step_ms << " ms\n";

  // K-trend experiment shape: 12 runs x 30 epochs; each epoch is 2400
  // training samples (200 trajectories x T=12 passes) plus ~760
  // validation forwards (360 one-step starts + 400 rollout steps).
  const double epoch_s = (2400.0 * step_ms + 760.0 * fwd_ms) / 1000.0;
  std::cout << "epoch estimate:   " << epoch_s << " s\n";
  std::cout << "12 runs x 30 epochs: " << 12.0 * 30.0 * epoch_s / 3600.0 << " h\n";
  return 0;
}
