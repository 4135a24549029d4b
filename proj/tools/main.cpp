/// Command-line front end: dataset generation, training, evaluation,
/// K-sweeps, and feature/perturbation diagnostics.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sinenet/checkpoint.hpp"
#include "sinenet/datagen.hpp"
#include "sinenet/dataset_io.hpp"
#include "sinenet/diagnostics.hpp"
#include "sinenet/evaluation.hpp"
#include "sinenet/model.hpp"
#include "sinenet/trainer.hpp"

namespace fs = std::filesystem;
using namespace sinenet;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << text;
}

/// Accepts either a directory holding <name>/manifest.json or a manifest
/// directory itself.
Dataset load_split(const std::string& data_dir, const std::string& name) {
  const fs::path sub = fs::path(data_dir) / name;
  if (fs::exists(sub / "manifest.json")) return load_dataset(sub.string());
  return load_dataset(data_dir);
}

std::pair<ModelConfig, TrainConfig> parse_configs(const std::string& path) {
  nlohmann::json j = nlohmann::json::parse(read_file(path));
  if (!j.contains("model") || !j.contains("train"))
    throw std::runtime_error("config must contain \"model\" and \"train\" objects");
  return {config_from_json(j.at("model").dump()), train_config_from_json(j.at("train").dump())};
}

int run_gen_data(const SimConfig& base, int n_train, int n_valid, int n_test,
                 const std::string& out) {
  make_benchmark(base, n_train, n_valid, n_test, out);
  std::cout << "wrote " << n_train << "/" << n_valid << "/" << n_test
            << " train/valid/test trajectories to " << out << "\n";
  return 0;
}

template <typename T>
int run_train(const ModelConfig& mcfg, const TrainConfig& tcfg, const std::string& data,
              const std::string& out) {
  Dataset train_ds = load_split(data, "train");
  Dataset valid_ds = load_split(data, "valid");
  fs::create_directories(out);
  std::ofstream log(fs::path(out) / "log.jsonl");
  auto sink = [&log](const LogRow& row) {
    log << log_row_to_jsonl(row) << "\n";
    log.flush();
    std::cout << "epoch " << row.epoch << " lr " << row.lr << " train " << row.train_loss
              << " valid_1step " << row.valid_1step << " valid_rollout " << row.valid_rollout
              << "\n";
  };
  TrainResult<T> result = train<T>(mcfg, train_ds, valid_ds, tcfg, sink);
  save_checkpoint(out, *result.model, result.stats);
  write_file((fs::path(out) / "train_config.json").string(), train_config_to_json(tcfg));
  std::cout << "best epoch " << result.best_epoch << " valid_rollout "
            << result.best_valid_rollout << "; checkpoint written to " << out << "\n";
  return 0;
}

int run_eval(const std::string& ckpt, const std::string& data, const std::string& out) {
  auto loaded = load_checkpoint<float>(ckpt);
  Dataset test_ds = load_split(data, "test");
  const int h = loaded.model->config.history;
  RolloutReport rep = evaluate(*loaded.model, loaded.stats, test_ds, h,
                               loaded.model->config.arch + "_k" +
                                   std::to_string(loaded.model->config.k_waves),
                               data);
  write_file(out, report_to_json(rep));
  std::cout << "one_step " << rep.one_step_percent << "% rollout " << rep.rollout_percent
            << "%; report written to " << out << "\n";
  return 0;
}

template <typename T>
int run_sweep(const ModelConfig& base, const TrainConfig& tcfg, const std::vector<int>& ks,
              long long budget, const std::string& data, const std::string& out) {
  Dataset train_ds = load_split(data, "train");
  Dataset valid_ds = load_split(data, "valid");
  Dataset test_ds = load_split(data, "test");
  fs::create_directories(out);
  if (budget <= 0) budget = count_parameters(base);
  auto rows = k_sweep<T>(base, ks, budget, train_ds, valid_ds, test_ds, tcfg);
  write_file((fs::path(out) / "sweep.json").string(), ksweep_to_json(rows));
  for (const auto& row : rows)
    std::cout << "K=" << row.k << " m=" << row.multiplier << " params=" << row.param_count
              << " rollout=" << row.report.rollout_percent << "%\n";
  return 0;
}

int run_diagnose(const std::string& ckpt, const std::string& input, const std::string& mode,
                 const std::string& out) {
  const auto colon = input.rfind(':');
  if (colon == std::string::npos)
    throw std::runtime_error("--input must be <trajectory.bin>:<t>");
  const std::string traj_path = input.substr(0, colon);
  const int t = std::stoi(input.substr(colon + 1));

  auto loaded = load_checkpoint<float>(ckpt);
  const ModelConfig& cfg = loaded.model->config;
  std::array<std::uint32_t, 4> dims;
  std::vector<float> payload;
  read_tensor_f32(traj_path, kTrajMagic, dims, payload);
  const int t_len = static_cast<int>(dims[0]), m = static_cast<int>(dims[1]);
  const int nx = static_cast<int>(dims[2]), ny = static_cast<int>(dims[3]);
  if (m != cfg.fields) throw std::runtime_error("trajectory field count does not match model");
  if (t < cfg.history - 1 || t >= t_len)
    throw std::runtime_error("snapshot index leaves no room for the history window");

  const size_t frame = static_cast<size_t>(m) * nx * ny;
  Tensor<float> hist({cfg.history * m, nx, ny});
  for (int s = 0; s < cfg.history; ++s) {
    const size_t src = static_cast<size_t>(t - cfg.history + 1 + s) * frame;
    Tensor<float> one({m, nx, ny},
                      std::vector<float>(payload.begin() + src, payload.begin() + src + frame));
    normalize_tensor(one, loaded.stats);
    std::copy(one.data.begin(), one.data.end(), hist.data.begin() + s * frame);
  }

  fs::create_directories(out);
  if (mode == "features") {
    NoGradGuard ng;
    loaded.model->record_taps = true;
    loaded.model->forward(make_const(hist));
    loaded.model->record_taps = false;
    std::vector<std::string> names;
    for (const auto& tap : loaded.model->taps) names.push_back(tap.name);
    auto taps = capture_feature_maps(*loaded.model, hist, names);
    std::vector<Tensor<double>> maps;
    for (auto& tap : taps) maps.push_back(std::move(tap.map));
    render_panel(maps, names, (fs::path(out) / "features.png").string());
    std::cout << names.size() << " feature panels written to " << out << "\n";
  } else if (mode == "perturbation") {
    PatchSpec spec;
    auto result = perturbation_response(*loaded.model, hist, spec);
    std::vector<std::string> names;
    nlohmann::json foot = nlohmann::json::array();
    for (size_t k = 0; k < result.responses.size(); ++k) {
      names.push_back("wave" + std::to_string(k) + ".response");
      foot.push_back(result.footprints[k]);
    }
    render_panel(result.responses, names, (fs::path(out) / "perturbation.png").string());
    nlohmann::json j;
    j["format_version"] = 1;
    j["footprints"] = foot;
    write_file((fs::path(out) / "footprints.json").string(), j.dump(2));
    std::cout << result.responses.size() << " response panels written to " << out << "\n";
  } else {
    throw std::runtime_error("--mode must be features or perturbation");
  }
  return 0;
}

std::vector<int> parse_k_list(const std::string& text) {
  std::vector<int> ks;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) ks.push_back(std::stoi(item));
  return ks;
}

}  // namespace

int main(int argc, char** argv) {
#ifdef __GLIBC__
  // Keeps large training buffers on the heap instead of cycling them
  // through mmap/munmap on every forward pass.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  CLI::App app{"SineNet: multi-wave neural PDE surrogates"};
  app.require_subcommand(1);

  SimConfig sim;
  int n_train = 8, n_valid = 2, n_test = 2;
  std::string out_dir;
  auto* gen = app.add_subcommand("gen-data", "generate a train/valid/test benchmark");
  gen->add_option("--pde", sim.pde, "heat | advection_diffusion | navier_stokes | shallow_water");
  gen->add_option("--nx", sim.grid.nx, "grid points in x");
  gen->add_option("--ny", sim.grid.ny, "grid points in y");
  gen->add_option("--T", sim.t_snapshots, "snapshots per trajectory");
  gen->add_option("--dt", sim.dt, "snapshot interval");
  gen->add_option("--substeps", sim.substeps, "solver substeps per snapshot");
  gen->add_option("--mu", sim.mu, "viscosity / diffusivity");
  gen->add_option("--force", sim.forcing, "forcing amplitude");
  gen->add_option("--kappa-c", sim.kappa_c, "passive-scalar diffusivity");
  gen->add_option("--gravity", sim.gravity, "gravitational constant");
  gen->add_option("--ic-kmax", sim.ic_kmax, "highest initial-condition mode");
  gen->add_option("--n-train", n_train, "training trajectories");
  gen->add_option("--n-valid", n_valid, "validation trajectories");
  gen->add_option("--n-test", n_test, "test trajectories");
  gen->add_option("--seed", sim.seed, "base seed");
  gen->add_option("--out", out_dir, "output directory")->required();

  std::string config_path, data_dir, ckpt_dir, report_path, k_list = "2,4,8,16";
  long long budget = 0;
  auto* tr = app.add_subcommand("train", "train a model from a JSON config");
  tr->add_option("--config", config_path, "JSON with \"model\" and \"train\" objects")->required();
  tr->add_option("--data", data_dir, "dataset directory (train/ and valid/)")->required();
  tr->add_option("--out", out_dir, "checkpoint output directory")->required();

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a test set");
  ev->add_option("--ckpt", ckpt_dir, "checkpoint directory")->required();
  ev->add_option("--data", data_dir, "dataset directory (test/)")->required();
  ev->add_option("--out", report_path, "report JSON path")->required();

  auto* sw = app.add_subcommand("sweep-k", "train and evaluate across wave counts");
  sw->add_option("--k", k_list, "comma-separated wave counts");
  sw->add_option("--config", config_path, "JSON with \"model\" and \"train\" objects")->required();
  sw->add_option("--data", data_dir, "dataset directory (train/, valid/, test/)")->required();
  sw->add_option("--budget", budget, "parameter budget (0 = base config's count)");
  sw->add_option("--out", out_dir, "output directory")->required();

  std::string input_spec, mode = "features";
  auto* dg = app.add_subcommand("diagnose", "feature-map / perturbation diagnostics");
  dg->add_option("--ckpt", ckpt_dir, "checkpoint directory")->required();
  dg->add_option("--input", input_spec, "<trajectory.bin>:<t>")->required();
  dg->add_option("--mode", mode, "features | perturbation");
  dg->add_option("--out", out_dir, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return run_gen_data(sim, n_train, n_valid, n_test, out_dir);
    if (tr->parsed()) {
      auto [mcfg, tcfg] = parse_configs(config_path);
      return tcfg.precision == "float64" ? run_train<double>(mcfg, tcfg, data_dir, out_dir)
                                         : run_train<float>(mcfg, tcfg, data_dir, out_dir);
    }
    if (ev->parsed()) return run_eval(ckpt_dir, data_dir, report_path);
    if (sw->parsed()) {
      auto [mcfg, tcfg] = parse_configs(config_path);
      const auto ks = parse_k_list(k_list);
      return tcfg.precision == "float64"
                 ? run_sweep<double>(mcfg, tcfg, ks, budget, data_dir, out_dir)
                 : run_sweep<float>(mcfg, tcfg, ks, budget, data_dir, out_dir);
    }
    if (dg->parsed()) return run_diagnose(ckpt_dir, input_spec, mode, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
