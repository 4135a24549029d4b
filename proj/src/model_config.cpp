#include "sinenet/model_config.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace sinenet {

void ModelConfig::validate() const {
  if (arch != "sinenet" && arch != "deeper_unet" && arch != "dil_resnet")
    throw std::invalid_argument("unknown arch: " + arch);
  if (k_waves < 1) throw std::invalid_argument("K must be >= 1");
  if (history < 1) throw std::invalid_argument("history must be >= 1");
  if (fields < 1) throw std::invalid_argument("field count must be >= 1");
  if (arch == "dil_resnet") {
    if (width < 1 || blocks < 1) throw std::invalid_argument("dil_resnet width/blocks");
    if (dilations.empty()) throw std::invalid_argument("dil_resnet dilation schedule empty");
    const size_t n = dilations.size();
    for (size_t i = 0; i < n; ++i) {
      if (dilations[i] < 1) throw std::invalid_argument("dilation rates must be >= 1");
      if (dilations[i] != dilations[n - 1 - i])
        throw std::invalid_argument("dil_resnet dilation schedule must be symmetric");
    }
    return;
  }
  if (z0 < 1) throw std::invalid_argument("z0 must be >= 1");
  if (levels < 1) throw std::invalid_argument("levels must be >= 1");
  if (!(multiplier > 0)) throw std::invalid_argument("multiplier must be positive");
  for (int z : channel_schedule(z0, multiplier, levels))
    if (z < 1) throw std::invalid_argument("channel schedule reaches zero");
}

std::vector<int> channel_schedule(int z0, double m, int levels) {
  std::vector<int> out(levels);
  for (int l = 1; l <= levels; ++l)
    out[l - 1] = static_cast<int>(std::floor(z0 * std::pow(m, l)));
  return out;
}

namespace {

long long conv_count(int k, int c_in, int c_out) {
  return static_cast<long long>(k) * k * c_in * c_out + c_out;
}

long long cond_proj_count(CondMode mode, int c_out) {
  // Each projection maps the 64-wide embedding to per-channel values.
  const long long one = 64LL * c_out + c_out;
  if (mode == CondMode::add) return one;            // bias after first activation
  if (mode == CondMode::adagn) return 4 * one;      // scale+shift after each activation
  return 0;
}

long long conv_block_count(int c_in, int c_out, CondMode mode) {
  return conv_count(3, c_in, c_out) + 2LL * c_out   // conv1 + layer norm
         + conv_count(3, c_out, c_out) + 2LL * c_out
         + cond_proj_count(mode, c_out);
}

long long pointwise_count(int c_in, int c_out) { return conv_count(1, c_in, c_out); }

long long cond_embed_count(CondMode mode) {
  if (mode == CondMode::none) return 0;
  return 2 * (64LL * 64 + 64);  // two dense layers on the sinusoidal features
}

}  // namespace

long long count_parameters(const ModelConfig& cfg) {
  cfg.validate();
  const int hm = cfg.history * cfg.fields;
  if (cfg.arch == "dil_resnet") {
    long long n = conv_count(3, hm, cfg.width);
    n += static_cast<long long>(cfg.blocks) * static_cast<long long>(cfg.dilations.size()) *
         conv_count(3, cfg.width, cfg.width);
    n += conv_count(3, cfg.width, cfg.fields);
    return n;
  }

  const auto zs = channel_schedule(cfg.z0, cfg.multiplier, cfg.levels);
  auto z_at = [&](int l) { return l == 0 ? cfg.z0 : zs[l - 1]; };
  const int pyr = cfg.disentangled ? cfg.z0 : 0;

  long long n = conv_count(3, hm, cfg.z0) + conv_count(3, cfg.z0, cfg.fields);  // P and Q
  n += cond_embed_count(cfg.conditioning);

  if (cfg.arch == "sinenet") {
    long long wave = 0;
    for (int l = 1; l <= cfg.levels; ++l) {
      wave += pointwise_count(z_at(l - 1), z_at(l));
      wave += conv_block_count(z_at(l - 1) + pyr, z_at(l), cfg.conditioning);
    }
    for (int l = cfg.levels - 1; l >= 0; --l) {
      wave += pointwise_count(z_at(l + 1), z_at(l));
      wave += conv_block_count(z_at(l + 1) + z_at(l), z_at(l), cfg.conditioning);
    }
    n += cfg.k_waves * wave;
    if (cfg.bottleneck)
      n += (cfg.k_waves - 1) *
           (conv_count(3, cfg.z0, cfg.fields) + conv_count(3, cfg.fields, cfg.z0));
    return n;
  }

  // deeper_unet: K blocks per level; the first changes channels, the rest are
  // constant-width. Down-path blocks all see the input pyramid.
  for (int l = 1; l <= cfg.levels; ++l) {
    n += pointwise_count(z_at(l - 1), z_at(l));
    n += conv_block_count(z_at(l - 1) + pyr, z_at(l), cfg.conditioning);
    n += (cfg.k_waves - 1) * (pointwise_count(z_at(l), z_at(l)) +
                              conv_block_count(z_at(l) + pyr, z_at(l), cfg.conditioning));
  }
  for (int l = cfg.levels - 1; l >= 0; --l) {
    n += pointwise_count(z_at(l + 1), z_at(l));
    n += conv_block_count(z_at(l + 1) + z_at(l), z_at(l), cfg.conditioning);
    n += (cfg.k_waves - 1) * (pointwise_count(z_at(l), z_at(l)) +
                              conv_block_count(z_at(l), z_at(l), cfg.conditioning));
  }
  return n;
}

double solve_multiplier(int k_waves, int z0, int levels, long long target_param_count,
                        const ModelConfig& base) {
  if (target_param_count <= 0) throw std::invalid_argument("solve_multiplier: bad target");
  ModelConfig cfg = base;
  cfg.k_waves = k_waves;
  cfg.z0 = z0;
  cfg.levels = levels;
  auto count_at = [&](double m) {
    cfg.multiplier = m;
    return count_parameters(cfg);
  };
  const double tol = 0.005;
  auto rel_err = [&](long long c) {
    return std::abs(static_cast<double>(c - target_param_count)) /
           static_cast<double>(target_param_count);
  };

  double lo = 1.01, hi = 3.0;
  const long long c_lo = count_at(lo);
  const long long c_hi = count_at(hi);
  double best_m = rel_err(c_lo) <= rel_err(c_hi) ? lo : hi;

  if (c_lo < target_param_count && c_hi > target_param_count) {
    // Bracket the lower crossing of the nondecreasing count, then walk down to
    // the smallest m still inside tolerance.
    double a = lo, b = hi;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (a + b);
      if (count_at(mid) < target_param_count)
        a = mid;
      else
        b = mid;
    }
    double m = b;
    const double step = 1e-6;
    while (m - step >= lo && rel_err(count_at(m - step)) <= tol) m -= step;
    best_m = m;
  }

  const long long c_best = count_at(best_m);
  if (rel_err(c_best) <= tol) return best_m;
  std::ostringstream msg;
  msg << "solve_multiplier: no multiplier in [1.01, 3] reaches target " << target_param_count
      << " within 0.5%; best m=" << best_m << " gives " << c_best;
  throw std::runtime_error(msg.str());
}

double solve_multiplier(int k_waves, int z0, int levels, long long target_param_count) {
  return solve_multiplier(k_waves, z0, levels, target_param_count, ModelConfig{});
}

std::string config_to_json(const ModelConfig& cfg) {
  nlohmann::json j;
  j["arch"] = cfg.arch;
  j["K"] = cfg.k_waves;
  j["z0"] = cfg.z0;
  j["L"] = cfg.levels;
  j["m"] = cfg.multiplier;
  j["padding"] = to_string(cfg.padding);
  j["disentangled"] = cfg.disentangled;
  j["wave_residual"] = cfg.wave_residual;
  j["bottleneck"] = cfg.bottleneck;
  j["conditioning"] = to_string(cfg.conditioning);
  j["h"] = cfg.history;
  j["M"] = cfg.fields;
  j["width"] = cfg.width;
  j["blocks"] = cfg.blocks;
  j["dilations"] = cfg.dilations;
  return j.dump(2);
}

ModelConfig config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("corrupt model config: ") + e.what());
  }
  ModelConfig cfg;
  cfg.arch = j.at("arch").get<std::string>();
  cfg.k_waves = j.at("K").get<int>();
  cfg.z0 = j.at("z0").get<int>();
  cfg.levels = j.at("L").get<int>();
  cfg.multiplier = j.at("m").get<double>();
  cfg.padding = pad_from_string(j.at("padding").get<std::string>());
  cfg.disentangled = j.at("disentangled").get<bool>();
  cfg.wave_residual = j.at("wave_residual").get<bool>();
  cfg.bottleneck = j.at("bottleneck").get<bool>();
  cfg.conditioning = cond_from_string(j.at("conditioning").get<std::string>());
  cfg.history = j.at("h").get<int>();
  cfg.fields = j.at("M").get<int>();
  cfg.width = j.value("width", cfg.width);
  cfg.blocks = j.value("blocks", cfg.blocks);
  if (j.contains("dilations")) cfg.dilations = j.at("dilations").get<std::vector<int>>();
  cfg.validate();
  return cfg;
}

}  // namespace sinenet
