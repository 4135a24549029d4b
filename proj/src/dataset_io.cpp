#include "sinenet/dataset_io.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

namespace sinenet {

static_assert(std::endian::native == std::endian::little,
              "tensor container assumes a little-endian host");

namespace fs = std::filesystem;
using nlohmann::json;

void write_tensor_f32(const std::string& path, const char magic[9],
                      const std::array<std::uint32_t, 4>& dims, const std::vector<float>& payload) {
  const std::size_t expect = std::size_t(dims[0]) * dims[1] * dims[2] * dims[3];
  if (payload.size() != expect)
    throw std::runtime_error("write_tensor_f32: payload size mismatch for " + path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  char header[16] = {0};
  std::memcpy(header, magic, 8);
  out.write(header, 16);
  out.write(reinterpret_cast<const char*>(dims.data()), 16);
  out.write(reinterpret_cast<const char*>(payload.data()), std::streamsize(payload.size() * 4));
  if (!out) throw std::runtime_error("write failed: " + path);
}

void read_tensor_f32(const std::string& path, const char magic[9],
                     std::array<std::uint32_t, 4>& dims, std::vector<float>& payload) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  char header[16];
  in.read(header, 16);
  if (!in || std::memcmp(header, magic, 8) != 0)
    throw std::runtime_error("bad magic in tensor file: " + path);
  in.read(reinterpret_cast<char*>(dims.data()), 16);
  if (!in) throw std::runtime_error("truncated tensor header: " + path);
  const std::size_t expect = std::size_t(dims[0]) * dims[1] * dims[2] * dims[3];
  payload.resize(expect);
  in.read(reinterpret_cast<char*>(payload.data()), std::streamsize(expect * 4));
  if (std::size_t(in.gcount()) != expect * 4 || in.peek() != EOF)
    throw std::runtime_error("payload size mismatch in tensor file: " + path);
}

void write_trajectory_file(const Trajectory& traj, const std::string& path) {
  traj.validate();
  const int T = traj.length(), M = traj.fields();
  const int nx = traj.grid.nx, ny = traj.grid.ny;
  std::vector<float> payload;
  payload.reserve(std::size_t(T) * M * nx * ny);
  for (const auto& snap : traj.snapshots)
    for (double v : snap.data) payload.push_back(float(v));
  write_tensor_f32(path, kTrajMagic,
                   {std::uint32_t(T), std::uint32_t(M), std::uint32_t(nx), std::uint32_t(ny)},
                   payload);
}

void save_dataset(const Dataset& dataset, const std::string& dir) {
  if (dataset.empty()) throw std::invalid_argument("save_dataset: empty dataset");
  fs::create_directories(dir);

  const Trajectory& first = dataset.trajectories.front();
  json manifest;
  manifest["format_version"] = 1;
  manifest["pde"] = dataset.pde;
  manifest["field_names"] = first.snapshots.front().field_names;
  manifest["nx"] = first.grid.nx;
  manifest["ny"] = first.grid.ny;
  manifest["dx"] = first.grid.dx;
  manifest["dy"] = first.grid.dy;
  manifest["dt"] = first.dt;
  manifest["boundary"] = to_string(first.grid.boundary);
  manifest["pde_params"] = json::object();
  for (const auto& [k, v] : first.pde_params) manifest["pde_params"][k] = v;

  json list = json::array();
  for (int i = 0; i < dataset.size(); ++i) {
    const Trajectory& tr = dataset.trajectories[i];
    if (!(tr.grid == first.grid) || tr.dt != first.dt ||
        tr.snapshots.front().field_names != first.snapshots.front().field_names)
      throw std::invalid_argument("save_dataset: trajectories disagree on grid/dt/fields");
    std::string id = tr.id.empty() ? ("traj_" + std::to_string(i)) : tr.id;
    const std::string file = id + ".bin";
    write_trajectory_file(tr, (fs::path(dir) / file).string());
    json entry;
    entry["id"] = id;
    entry["T"] = tr.length();
    entry["file"] = file;
    entry["seed"] = tr.seed;
    entry["t0"] = tr.snapshots.front().time;
    list.push_back(entry);
  }
  manifest["trajectories"] = list;

  std::ofstream out(fs::path(dir) / "manifest.json");
  if (!out) throw std::runtime_error("cannot open for write: " + dir + "/manifest.json");
  out << manifest.dump(2) << "\n";
}

Dataset load_dataset(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "manifest.json");
  if (!in) throw std::runtime_error("cannot open: " + dir + "/manifest.json");
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw std::runtime_error("corrupt manifest: " + std::string(e.what()));
  }

  if (!manifest.contains("format_version") || manifest["format_version"].get<int>() != 1)
    throw std::runtime_error("unsupported format_version in manifest: " + dir);

  Dataset ds;
  ds.pde = manifest.value("pde", std::string());
  GridSpec grid;
  grid.nx = manifest.at("nx").get<int>();
  grid.ny = manifest.at("ny").get<int>();
  grid.dx = manifest.at("dx").get<double>();
  grid.dy = manifest.at("dy").get<double>();
  grid.boundary = boundary_from_string(manifest.at("boundary").get<std::string>());
  const double dt = manifest.at("dt").get<double>();
  const auto field_names = manifest.at("field_names").get<std::vector<std::string>>();
  std::map<std::string, double> pde_params;
  for (auto it = manifest.at("pde_params").begin(); it != manifest.at("pde_params").end(); ++it)
    pde_params[it.key()] = it.value().get<double>();

  for (const auto& entry : manifest.at("trajectories")) {
    const std::string file = entry.at("file").get<std::string>();
    std::array<std::uint32_t, 4> dims;
    std::vector<float> payload;
    read_tensor_f32((fs::path(dir) / file).string(), kTrajMagic, dims, payload);
    const int T = entry.at("T").get<int>();
    if (int(dims[0]) != T || int(dims[1]) != int(field_names.size()) ||
        int(dims[2]) != grid.nx || int(dims[3]) != grid.ny)
      throw std::runtime_error("manifest/tensor mismatch for " + file);

    Trajectory tr;
    tr.grid = grid;
    tr.dt = dt;
    tr.pde_params = pde_params;
    tr.id = entry.at("id").get<std::string>();
    tr.seed = entry.value("seed", std::uint64_t(0));
    const double t0 = entry.value("t0", 0.0);
    tr.snapshots.reserve(T);
    const std::size_t per = std::size_t(field_names.size()) * grid.nx * grid.ny;
    for (int t = 0; t < T; ++t) {
      FieldSet snap(grid, field_names, t0 + t * dt);
      const float* src = payload.data() + per * t;
      for (std::size_t i = 0; i < per; ++i) snap.data[i] = double(src[i]);
      tr.snapshots.push_back(std::move(snap));
    }
    ds.trajectories.push_back(std::move(tr));
  }
  return ds;
}

}  // namespace sinenet
