#include "sinenet/trainer.hpp"

#include <nlohmann/json.hpp>

namespace sinenet {

using nlohmann::json;

std::string train_config_to_json(const TrainConfig& cfg) {
  json j;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["lr_init"] = cfg.lr_init;
  j["lr_min"] = cfg.lr_min;
  j["warmup_epochs"] = cfg.warmup_epochs;
  j["weight_decay"] = cfg.weight_decay;
  j["noise_sigma"] = cfg.noise_sigma;
  j["seed"] = cfg.seed;
  j["history"] = cfg.history;
  j["conditioning"] = cfg.conditioning;
  j["precision"] = cfg.precision;
  return j.dump(2);
}

TrainConfig train_config_from_json(const std::string& text) {
  json j = json::parse(text);
  TrainConfig cfg;
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.lr_init = j.value("lr_init", cfg.lr_init);
  cfg.lr_min = j.value("lr_min", cfg.lr_min);
  cfg.warmup_epochs = j.value("warmup_epochs", cfg.warmup_epochs);
  cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
  cfg.noise_sigma = j.value("noise_sigma", cfg.noise_sigma);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.history = j.value("history", cfg.history);
  cfg.conditioning = j.value("conditioning", cfg.conditioning);
  cfg.precision = j.value("precision", cfg.precision);
  cfg.validate();
  return cfg;
}

}  // namespace sinenet
