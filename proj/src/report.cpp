#include "sinenet/evaluation.hpp"

#include <nlohmann/json.hpp>

namespace sinenet {

using nlohmann::json;

std::string report_to_json(const RolloutReport& rep) {
  json j;
  j["format_version"] = rep.format_version;
  j["model_id"] = rep.model_id;
  j["dataset_id"] = rep.dataset_id;
  j["history"] = rep.history;
  j["per_step_percent"] = rep.per_step_percent;
  j["one_step_percent"] = rep.one_step_percent;
  j["rollout_percent"] = rep.rollout_percent;
  j["wall_clock_seconds"] = rep.wall_clock_seconds;
  j["peak_rss_kb"] = rep.peak_rss_kb;
  return j.dump(2);
}

RolloutReport report_from_json(const std::string& text) {
  json j = json::parse(text);
  if (!j.contains("format_version") || j["format_version"].get<int>() != 1)
    throw std::runtime_error("unsupported report format_version");
  RolloutReport rep;
  rep.model_id = j.value("model_id", std::string());
  rep.dataset_id = j.value("dataset_id", std::string());
  rep.history = j.at("history").get<int>();
  rep.per_step_percent = j.at("per_step_percent").get<std::vector<double>>();
  rep.one_step_percent = j.at("one_step_percent").get<double>();
  rep.rollout_percent = j.at("rollout_percent").get<double>();
  rep.wall_clock_seconds = j.value("wall_clock_seconds", 0.0);
  rep.peak_rss_kb = j.value("peak_rss_kb", 0L);
  return rep;
}

std::string log_row_to_jsonl(const LogRow& row) {
  json j;
  j["epoch"] = row.epoch;
  j["step"] = row.step;
  j["lr"] = row.lr;
  j["train_loss"] = row.train_loss;
  j["valid_1step"] = row.valid_1step;
  j["valid_rollout"] = row.valid_rollout;
  return j.dump();
}

std::string ksweep_to_json(const std::vector<KSweepRow>& rows) {
  json arr = json::array();
  for (const auto& row : rows) {
    json j;
    j["k"] = row.k;
    j["multiplier"] = row.multiplier;
    j["param_count"] = row.param_count;
    j["valid_rollout"] = row.final_log.valid_rollout;
    j["report"] = json::parse(report_to_json(row.report));
    arr.push_back(std::move(j));
  }
  json top;
  top["format_version"] = 1;
  top["rows"] = arr;
  return top.dump(2);
}

}  // namespace sinenet
