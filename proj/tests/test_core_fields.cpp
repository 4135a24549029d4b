/// Field containers, normalization statistics, torus shifts, tensor
/// bridging, and the on-disk dataset container (including its error paths).

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "sinenet/data_bridge.hpp"
#include "sinenet/dataset_io.hpp"
#include "sinenet/field_set.hpp"
#include "sinenet/norm.hpp"
#include "sinenet/rng.hpp"

using namespace sinenet;
namespace fs = std::filesystem;

namespace {

GridSpec small_grid(int nx, int ny) {
  GridSpec g;
  g.nx = nx;
  g.ny = ny;
  g.dx = 1.0 / nx;
  g.dy = 1.0 / ny;
  return g;
}

/// Random dataset whose values are exactly representable in float32, so the
/// float32 disk container round-trips bitwise.
Dataset random_dataset(int n_traj, int t_len, int m, int nx, int ny, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, 0);
  Dataset ds;
  ds.pde = "synthetic";
  for (int k = 0; k < n_traj; ++k) {
    Trajectory tr;
    tr.grid = small_grid(nx, ny);
    tr.dt = 0.25;
    tr.id = "traj_" + std::to_string(k);
    tr.seed = seed + k;
    tr.pde_params["mu"] = 0.001;
    std::vector<std::string> names;
    for (int f = 0; f < m; ++f) names.push_back("f" + std::to_string(f));
    for (int t = 0; t < t_len; ++t) {
      FieldSet snap(tr.grid, names, t * tr.dt);
      for (double& v : snap.data) v = static_cast<float>(rng.normal());
      tr.snapshots.push_back(std::move(snap));
    }
    ds.trajectories.push_back(std::move(tr));
  }
  return ds;
}

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("cyclic_shift: zero and full-period shifts are identities") {
  Dataset ds = random_dataset(1, 1, 2, 8, 16, 11);
  const FieldSet& fs0 = ds.trajectories[0].snapshots[0];
  CHECK(cyclic_shift(fs0, 0, 0).data == fs0.data);
  CHECK(cyclic_shift(fs0, 8, 16).data == fs0.data);
  CHECK(cyclic_shift(fs0, -8, 32).data == fs0.data);
}

TEST_CASE("cyclic_shift: hot pixel moves to the shift offset") {
  FieldSet fs(small_grid(4, 4), {"u"});
  fs.at(0, 0, 0) = 1.0;
  FieldSet moved = cyclic_shift(fs, 1, 2);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      CHECK(moved.at(0, i, j) == (i == 1 && j == 2 ? 1.0 : 0.0));
}

TEST_CASE("cyclic_shift: composition equals the summed shift exactly") {
  Dataset ds = random_dataset(1, 1, 1, 16, 16, 12);
  const FieldSet& fs0 = ds.trajectories[0].snapshots[0];
  Rng rng = Rng::stream(13, 0);
  for (int rep = 0; rep < 10; ++rep) {
    const int ax = rng.uniform_int(40) - 20, ay = rng.uniform_int(40) - 20;
    const int bx = rng.uniform_int(40) - 20, by = rng.uniform_int(40) - 20;
    FieldSet two = cyclic_shift(cyclic_shift(fs0, ax, ay), bx, by);
    FieldSet one = cyclic_shift(fs0, ax + bx, ay + by);
    CHECK(two.data == one.data);
  }
}

TEST_CASE("compute_norm_stats: constant field hits the std floor") {
  Dataset ds = random_dataset(1, 2, 1, 8, 8, 14);
  for (auto& snap : ds.trajectories[0].snapshots)
    for (double& v : snap.data) v = 5.0;
  NormStats st = compute_norm_stats(ds.trajectories);
  CHECK(st.mean[0] == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(st.std[0] == kStdFloor);
}

TEST_CASE("compute_norm_stats: symmetric two-value field gives mean 0, std 1") {
  Dataset ds = random_dataset(1, 1, 1, 8, 8, 15);
  auto& data = ds.trajectories[0].snapshots[0].data;
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = (i % 2 == 0) ? -1.0 : 1.0;
  NormStats st = compute_norm_stats(ds.trajectories);
  CHECK(st.mean[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(st.std[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("compute_norm_stats: matches a flatten-and-reduce oracle") {
  Dataset ds = random_dataset(3, 4, 2, 8, 16, 16);
  NormStats st = compute_norm_stats(ds.trajectories);

  for (int f = 0; f < 2; ++f) {
    std::vector<double> flat;
    for (const auto& tr : ds.trajectories)
      for (const auto& snap : tr.snapshots) {
        const double* p = snap.field(f);
        flat.insert(flat.end(), p, p + 8 * 16);
      }
    double mean = 0.0;
    for (double v : flat) mean += v;
    mean /= static_cast<double>(flat.size());
    double sq = 0.0;
    for (double v : flat) sq += (v - mean) * (v - mean);
    const double sd = std::sqrt(sq / static_cast<double>(flat.size()));
    CHECK(st.mean[f] == doctest::Approx(mean).epsilon(1e-10));
    CHECK(st.std[f] == doctest::Approx(sd).epsilon(1e-10));
  }
}

TEST_CASE("compute_norm_stats: rejects empty and mismatched inputs") {
  CHECK_THROWS_WITH_AS(compute_norm_stats(std::vector<Trajectory>{}),
                       "compute_norm_stats: empty dataset", std::invalid_argument);
  Dataset a = random_dataset(1, 1, 1, 8, 8, 17);
  Dataset b = random_dataset(1, 1, 2, 8, 8, 18);
  std::vector<Trajectory> mixed{a.trajectories[0], b.trajectories[0]};
  CHECK_THROWS_WITH_AS(compute_norm_stats(mixed), "compute_norm_stats: field count mismatch",
                       std::invalid_argument);
}

TEST_CASE("normalize: identity stats, constant fields, and round trips") {
  Dataset ds = random_dataset(1, 1, 2, 8, 8, 19);
  const FieldSet& fs0 = ds.trajectories[0].snapshots[0];

  NormStats ident;
  ident.mean = {0.0, 0.0};
  ident.std = {1.0, 1.0};
  CHECK(normalize(fs0, ident).data == fs0.data);

  FieldSet constant = fs0;
  for (double& v : constant.data) v = 3.5;
  NormStats st;
  st.mean = {3.5, 3.5};
  st.std = {2.0, 2.0};
  for (double v : normalize(constant, st).data) CHECK(v == 0.0);

  NormStats real_st = compute_norm_stats(ds.trajectories);
  FieldSet round = denormalize(normalize(fs0, real_st), real_st);
  for (std::size_t i = 0; i < round.data.size(); ++i)
    CHECK(round.data[i] == doctest::Approx(fs0.data[i]).epsilon(1e-6));

  NormStats wrong;
  wrong.mean = {0.0};
  wrong.std = {1.0};
  CHECK_THROWS_AS(normalize(fs0, wrong), std::invalid_argument);
  CHECK_THROWS_AS(denormalize(fs0, wrong), std::invalid_argument);
}

TEST_CASE("trajectory validation: uniform spacing required") {
  Dataset ds = random_dataset(1, 4, 1, 8, 8, 20);
  ds.trajectories[0].validate();
  ds.trajectories[0].snapshots[2].time += 0.01;
  CHECK_THROWS_AS(ds.trajectories[0].validate(), std::invalid_argument);
}

TEST_CASE("grid validation: size and divisibility constraints") {
  CHECK_NOTHROW(small_grid(64, 32).validate());
  CHECK_THROWS_AS(small_grid(4, 64).validate(), std::invalid_argument);
  CHECK_THROWS_AS(small_grid(24, 64).validate(), std::invalid_argument);
  CHECK_NOTHROW(small_grid(24, 64).validate(3));
  GridSpec bad = small_grid(64, 64);
  bad.dx = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("dataset io: save/load round trip is bit-exact") {
  Dataset ds = random_dataset(3, 5, 2, 16, 16, 21);
  fs::path dir = fresh_dir("sinenet_io_roundtrip");
  save_dataset(ds, dir.string());
  Dataset back = load_dataset(dir.string());

  REQUIRE(back.size() == ds.size());
  CHECK(back.pde == ds.pde);
  for (int k = 0; k < ds.size(); ++k) {
    const Trajectory& a = ds[k];
    const Trajectory& b = back[k];
    CHECK(b.id == a.id);
    CHECK(b.seed == a.seed);
    CHECK(b.dt == a.dt);
    CHECK(b.grid == a.grid);
    CHECK(b.pde_params == a.pde_params);
    REQUIRE(b.length() == a.length());
    for (int t = 0; t < a.length(); ++t) {
      CHECK(b.snapshots[t].field_names == a.snapshots[t].field_names);
      CHECK(b.snapshots[t].data == a.snapshots[t].data);
      CHECK(b.snapshots[t].time == doctest::Approx(a.snapshots[t].time).epsilon(1e-12));
    }
  }
  fs::remove_all(dir);
}

TEST_CASE("dataset io: distinct errors for each corruption") {
  Dataset ds = random_dataset(1, 2, 2, 16, 16, 22);
  fs::path dir = fresh_dir("sinenet_io_errors");
  save_dataset(ds, dir.string());
  const fs::path traj_file = dir / "traj_0.bin";

  SUBCASE("truncated tensor payload") {
    fs::resize_file(traj_file, fs::file_size(traj_file) - 64);
    CHECK_THROWS_WITH_AS(load_dataset(dir.string()),
                         doctest::Contains("payload size mismatch"), std::runtime_error);
  }
  SUBCASE("bad magic") {
    std::fstream f(traj_file, std::ios::in | std::ios::out | std::ios::binary);
    f.write("XXXXXXXX", 8);
    f.close();
    CHECK_THROWS_WITH_AS(load_dataset(dir.string()), doctest::Contains("bad magic"),
                         std::runtime_error);
  }
  SUBCASE("manifest/tensor shape mismatch") {
    std::ifstream in(dir / "manifest.json");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    auto pos = text.find("\"T\": 2");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 6, "\"T\": 3");
    std::ofstream(dir / "manifest.json") << text;
    CHECK_THROWS_WITH_AS(load_dataset(dir.string()),
                         doctest::Contains("manifest/tensor mismatch"), std::runtime_error);
  }
  SUBCASE("unsupported format version") {
    std::ifstream in(dir / "manifest.json");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    auto pos = text.find("\"format_version\": 1");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 19, "\"format_version\": 9");
    std::ofstream(dir / "manifest.json") << text;
    CHECK_THROWS_WITH_AS(load_dataset(dir.string()),
                         doctest::Contains("unsupported format_version"), std::runtime_error);
  }
  SUBCASE("corrupt manifest json") {
    std::ofstream(dir / "manifest.json") << "{ not json";
    CHECK_THROWS_WITH_AS(load_dataset(dir.string()), doctest::Contains("corrupt manifest"),
                         std::runtime_error);
  }
  fs::remove_all(dir);
}

TEST_CASE("tensor bridge: snapshot round trip and history stacking") {
  Dataset ds = random_dataset(1, 3, 2, 8, 16, 23);
  const Trajectory& tr = ds[0];

  Tensor<double> t0 = snapshot_tensor<double>(tr.snapshots[0]);
  REQUIRE(t0.shape == std::vector<int>{2, 8, 16});
  FieldSet back = tensor_to_fieldset(t0, tr.grid, tr.snapshots[0].field_names, 0.0);
  CHECK(back.data == tr.snapshots[0].data);

  Tensor<double> bad({3, 8, 16});
  CHECK_THROWS_AS(tensor_to_fieldset(bad, tr.grid, tr.snapshots[0].field_names, 0.0),
                  std::invalid_argument);

  Tensor<double> t1 = snapshot_tensor<double>(tr.snapshots[1]);
  Tensor<double> stacked = stack_history<double>({&t0, &t1});
  REQUIRE(stacked.shape == std::vector<int>{4, 8, 16});
  // Oldest frame occupies the leading channels.
  for (std::size_t i = 0; i < t0.data.size(); ++i) {
    CHECK(stacked.data[i] == t0.data[i]);
    CHECK(stacked.data[i + t0.data.size()] == t1.data[i]);
  }
  CHECK_THROWS_AS(stack_history<double>({&t0, &bad}), std::invalid_argument);
  CHECK_THROWS_AS(stack_history<double>({}), std::invalid_argument);
}

TEST_CASE("tensor bridge: normalization matches the FieldSet path") {
  Dataset ds = random_dataset(2, 3, 2, 8, 8, 24);
  NormStats st = compute_norm_stats(ds.trajectories);
  const FieldSet& fs0 = ds.trajectories[0].snapshots[0];

  Tensor<double> t = snapshot_tensor<double>(fs0);
  normalize_tensor(t, st);
  FieldSet ref = normalize(fs0, st);
  for (std::size_t i = 0; i < t.data.size(); ++i)
    CHECK(t.data[i] == doctest::Approx(ref.data[i]).epsilon(1e-12));

  denormalize_tensor(t, st);
  for (std::size_t i = 0; i < t.data.size(); ++i)
    CHECK(t.data[i] == doctest::Approx(fs0.data[i]).epsilon(1e-9));

  Tensor<double> wrong({1, 8, 8});
  CHECK_THROWS_AS(normalize_tensor(wrong, st), std::invalid_argument);
  CHECK_THROWS_AS(denormalize_tensor(wrong, st), std::invalid_argument);
}
