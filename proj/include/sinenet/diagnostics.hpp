#pragma once

/// Feature-map and perturbation-response diagnostics: channel-mean maps of
/// tapped activations with quantile clipping for display, and per-wave
/// response maps to a localized Gaussian perturbation of the input.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "sinenet/autograd.hpp"
#include "sinenet/model.hpp"
#include "sinenet/rng.hpp"
#include "sinenet/tensor.hpp"

namespace sinenet {

struct FeatureTap {
  std::string name;
  int wave = -1;  ///< parsed from a "wave<k>." prefix; -1 outside the waves
  Tensor<double> map;  ///< [H, W] channel mean, clipped to [lo, hi]
  double lo = 0.0;
  double hi = 0.0;
};

namespace detail {

template <typename T>
Tensor<double> channel_mean(const Tensor<T>& x) {
  if (x.shape.size() != 3) throw std::invalid_argument("channel_mean: bad rank");
  const int c = x.shape[0];
  const size_t plane = static_cast<size_t>(x.shape[1]) * x.shape[2];
  Tensor<double> out({x.shape[1], x.shape[2]});
  for (int f = 0; f < c; ++f) {
    const T* p = x.data.data() + static_cast<size_t>(f) * plane;
    for (size_t s = 0; s < plane; ++s) out.data[s] += static_cast<double>(p[s]);
  }
  const double inv = 1.0 / static_cast<double>(c);
  for (auto& v : out.data) v *= inv;
  return out;
}

/// Clips in place to the q_lo/q_hi sample quantiles (index floor(q*(n-1))
/// of the sorted values); returns the clip bounds.
inline std::pair<double, double> quantile_clip(Tensor<double>& map, double q_lo, double q_hi) {
  std::vector<double> sorted = map.data;
  std::sort(sorted.begin(), sorted.end());
  const size_t n = sorted.size();
  const double lo = sorted[static_cast<size_t>(q_lo * static_cast<double>(n - 1))];
  const double hi = sorted[static_cast<size_t>(q_hi * static_cast<double>(n - 1))];
  for (auto& v : map.data) v = std::clamp(v, lo, hi);
  return {lo, hi};
}

inline int wave_of(const std::string& name) {
  if (name.rfind("wave", 0) != 0) return -1;
  size_t i = 4, v = 0;
  bool any = false;
  while (i < name.size() && name[i] >= '0' && name[i] <= '9') {
    v = v * 10 + static_cast<size_t>(name[i] - '0');
    ++i;
    any = true;
  }
  return any ? static_cast<int>(v) : -1;
}

}  // namespace detail

/// Runs one forward pass with tap recording and returns channel-mean maps
/// for the requested tap names, clipped to the 1st/99th quantiles.
template <typename T>
std::vector<FeatureTap> capture_feature_maps(Model<T>& model, const Tensor<T>& input,
                                             const std::vector<std::string>& tap_names,
                                             const Kappa* kappa = nullptr) {
  NoGradGuard ng;
  model.record_taps = true;
  model.forward(make_const(input), kappa);
  model.record_taps = false;
  std::vector<FeatureTap> out;
  out.reserve(tap_names.size());
  for (const auto& name : tap_names) {
    const TapRecord<T>* rec = nullptr;
    for (const auto& t : model.taps)
      if (t.name == name) {
        rec = &t;
        break;
      }
    if (!rec) throw std::invalid_argument("unknown tap: " + name);
    FeatureTap tap;
    tap.name = name;
    tap.wave = detail::wave_of(name);
    tap.map = detail::channel_mean(rec->value);
    auto [lo, hi] = detail::quantile_clip(tap.map, 0.01, 0.99);
    tap.lo = lo;
    tap.hi = hi;
    out.push_back(std::move(tap));
  }
  return out;
}

struct PatchSpec {
  int side = 0;  ///< 0 selects the default, grid side / 8
  double sigma = 0.1;
  unsigned long long seed = 0;
};

struct PerturbationResult {
  std::vector<Tensor<double>> responses;  ///< per wave, channel-mean |perturbed - clean|
  std::vector<long long> footprints;      ///< pixels above 1% of each map's max
};

/// Pixel count above 1% of the map's max; an all-zero map has no footprint.
inline long long footprint(const Tensor<double>& map) {
  double mx = 0.0;
  for (double v : map.data) mx = std::max(mx, v);
  if (mx == 0.0) return 0;
  const double thresh = 0.01 * mx;
  long long n = 0;
  for (double v : map.data) n += v > thresh ? 1 : 0;
  return n;
}

/// Compares wave outputs between a clean forward and one whose input is
/// perturbed by Gaussian noise inside a centered square patch. sigma = 0
/// skips the noise draw entirely, so the responses are exactly zero.
template <typename T>
PerturbationResult perturbation_response(Model<T>& model, const Tensor<T>& input,
                                         const PatchSpec& spec, const Kappa* kappa = nullptr) {
  if (spec.sigma < 0.0) throw std::invalid_argument("perturbation noise level must be >= 0");
  if (input.shape.size() != 3) throw std::invalid_argument("perturbation_response: bad rank");
  const int h = input.shape[1], w = input.shape[2];
  const int side = spec.side > 0 ? spec.side : std::max(1, std::min(h, w) / 8);
  if (side > h || side > w) throw std::invalid_argument("perturbation patch exceeds the grid");
  const int r0 = (h - side) / 2, c0 = (w - side) / 2;

  NoGradGuard ng;
  model.record_taps = true;
  model.forward(make_const(input), kappa);
  std::vector<Tensor<T>> clean;
  for (const auto& t : model.taps)
    if (t.name.size() > 7 && t.name.compare(t.name.size() - 7, 7, ".output") == 0 &&
        detail::wave_of(t.name) >= 0)
      clean.push_back(t.value);

  Tensor<T> noisy = input;
  if (spec.sigma > 0.0) {
    Rng rng = Rng::stream(spec.seed, 0);
    for (int f = 0; f < input.shape[0]; ++f)
      for (int i = r0; i < r0 + side; ++i)
        for (int j = c0; j < c0 + side; ++j)
          noisy.data[(static_cast<size_t>(f) * h + i) * w + j] +=
              static_cast<T>(spec.sigma * rng.normal());
  }
  model.forward(make_const(noisy), kappa);
  std::vector<Tensor<T>> dirty;
  for (const auto& t : model.taps)
    if (t.name.size() > 7 && t.name.compare(t.name.size() - 7, 7, ".output") == 0 &&
        detail::wave_of(t.name) >= 0)
      dirty.push_back(t.value);
  model.record_taps = false;

  if (clean.size() != dirty.size() || clean.empty())
    throw std::runtime_error("perturbation_response: model exposes no wave outputs");
  PerturbationResult result;
  for (size_t k = 0; k < clean.size(); ++k) {
    Tensor<T> diff = dirty[k];
    for (size_t s = 0; s < diff.data.size(); ++s) {
      T d = diff.data[s] - clean[k].data[s];
      diff.data[s] = d < T(0) ? -d : d;
    }
    result.responses.push_back(detail::channel_mean(diff));
    result.footprints.push_back(footprint(result.responses.back()));
  }
  return result;
}

/// Radius (in input pixels) a single wave can propagate information, from
/// its pooling chain and 3x3/tap stencils across all levels.
inline int wave_receptive_radius(int levels) { return 11 * ((1 << levels) - 1); }

/// Renders maps as a single-row grayscale panel grid with per-panel value
/// annotations; writes a JSON sidecar next to the image.
void render_panel(const std::vector<Tensor<double>>& maps, const std::vector<std::string>& names,
                  const std::string& path);

}  // namespace sinenet
