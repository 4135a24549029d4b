#pragma once

/// Checkpoint directory layout:
///   config.json          full model configuration
///   norm.json            per-field normalization statistics
///   params/<name>.bin    one tensor per named parameter, magic "SNPARM01",
///                        dims padded to 4 with trailing ones, float32 payload
/// Saving is value-preserving for float models (bitwise round trip).

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "sinenet/dataset_io.hpp"
#include "sinenet/model.hpp"
#include "sinenet/norm.hpp"

namespace sinenet {

namespace detail {

inline std::array<std::uint32_t, 4> pad_dims4(const std::vector<int>& shape) {
  if (shape.empty() || shape.size() > 4) throw std::invalid_argument("tensor rank must be 1..4");
  std::array<std::uint32_t, 4> d{1, 1, 1, 1};
  for (size_t i = 0; i < shape.size(); ++i) d[i] = static_cast<std::uint32_t>(shape[i]);
  return d;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace detail

inline std::string norm_stats_to_json(const NormStats& s) {
  nlohmann::json j;
  j["mean"] = s.mean;
  j["std"] = s.std;
  return j.dump(2);
}

inline NormStats norm_stats_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("corrupt norm stats: ") + e.what());
  }
  NormStats s;
  s.mean = j.at("mean").get<std::vector<double>>();
  s.std = j.at("std").get<std::vector<double>>();
  if (s.mean.size() != s.std.size()) throw std::runtime_error("corrupt norm stats: size mismatch");
  return s;
}

template <typename T>
void save_checkpoint(const std::string& dir, const Model<T>& model, const NormStats& stats) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "params");
  detail::write_text_file((fs::path(dir) / "config.json").string(),
                          config_to_json(model.config));
  detail::write_text_file((fs::path(dir) / "norm.json").string(), norm_stats_to_json(stats));
  const auto& params = model.parameters();
  const auto& names = model.parameter_names();
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& t = params[i]->val;
    std::vector<float> payload(t.data.size());
    for (size_t k = 0; k < payload.size(); ++k) payload[k] = static_cast<float>(t.data[k]);
    write_tensor_f32((fs::path(dir) / "params" / (names[i] + ".bin")).string(), kParamMagic,
                     detail::pad_dims4(t.shape), payload);
  }
}

template <typename T>
struct LoadedModel {
  std::shared_ptr<Model<T>> model;
  NormStats stats;
};

template <typename T>
LoadedModel<T> load_checkpoint(const std::string& dir) {
  namespace fs = std::filesystem;
  const ModelConfig cfg =
      config_from_json(detail::read_text_file((fs::path(dir) / "config.json").string()));
  NormStats stats =
      norm_stats_from_json(detail::read_text_file((fs::path(dir) / "norm.json").string()));
  auto model = build_model<T>(cfg, 0);
  const auto& params = model->parameters();
  const auto& names = model->parameter_names();
  for (size_t i = 0; i < params.size(); ++i) {
    std::array<std::uint32_t, 4> dims{};
    std::vector<float> payload;
    read_tensor_f32((fs::path(dir) / "params" / (names[i] + ".bin")).string(), kParamMagic, dims,
                    payload);
    if (dims != detail::pad_dims4(params[i]->val.shape))
      throw std::runtime_error("checkpoint tensor shape mismatch for " + names[i]);
    for (size_t k = 0; k < payload.size(); ++k)
      params[i]->val.data[k] = static_cast<T>(payload[k]);
  }
  return {model, std::move(stats)};
}

}  // namespace sinenet
