#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "sinenet/grid.hpp"

namespace sinenet {

/// A multi-field snapshot on a uniform grid: M named scalar fields of shape
/// [nx, ny] stored contiguously as [M, nx, ny], plus its simulation time.
/// Vector quantities appear as separate named scalar components (vx, vy).
struct FieldSet {
  GridSpec grid;
  std::vector<std::string> field_names;
  std::vector<double> data;  // size M * nx * ny, row-major [field][x][y]
  double time = 0.0;

  FieldSet() = default;
  FieldSet(const GridSpec& g, std::vector<std::string> names, double t = 0.0)
      : grid(g), field_names(std::move(names)),
        data(std::size_t(field_names.size()) * g.nx * g.ny, 0.0), time(t) {}

  int fields() const { return int(field_names.size()); }

  double& at(int f, int i, int j) { return data[(std::size_t(f) * grid.nx + i) * grid.ny + j]; }
  double at(int f, int i, int j) const { return data[(std::size_t(f) * grid.nx + i) * grid.ny + j]; }

  double* field(int f) { return data.data() + std::size_t(f) * grid.nx * grid.ny; }
  const double* field(int f) const { return data.data() + std::size_t(f) * grid.nx * grid.ny; }

  /// Index of a named field; throws if absent.
  int field_index(const std::string& name) const {
    for (int f = 0; f < fields(); ++f)
      if (field_names[f] == name) return f;
    throw std::invalid_argument("FieldSet: missing field '" + name + "'");
  }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

/// Torus translation: out[f, i, j] = in[f, (i - sx) mod nx, (j - sy) mod ny].
/// Shifts are taken mod the grid size, so (0,0) and (nx,ny) are identities.
inline FieldSet cyclic_shift(const FieldSet& fs, int sx, int sy) {
  const int nx = fs.grid.nx, ny = fs.grid.ny;
  auto wrap = [](int a, int n) { return ((a % n) + n) % n; };
  FieldSet out = fs;
  for (int f = 0; f < fs.fields(); ++f)
    for (int i = 0; i < nx; ++i) {
      const int si = wrap(i - sx, nx);
      for (int j = 0; j < ny; ++j) out.at(f, i, j) = fs.at(f, si, wrap(j - sy, ny));
    }
  return out;
}

/// Time-ordered sequence of snapshots with constant spacing dt and the
/// generating PDE's named scalar parameters.
struct Trajectory {
  GridSpec grid;
  double dt = 1.0;
  std::vector<FieldSet> snapshots;
  std::map<std::string, double> pde_params;
  std::string id;
  std::uint64_t seed = 0;

  int length() const { return int(snapshots.size()); }
  int fields() const { return snapshots.empty() ? 0 : snapshots.front().fields(); }

  /// Checks constant dt spacing (1e-9 relative) and uniform shapes.
  void validate() const {
    if (snapshots.empty()) throw std::invalid_argument("Trajectory: no snapshots");
    const int m = snapshots.front().fields();
    for (const auto& s : snapshots) {
      if (s.fields() != m || s.grid.nx != grid.nx || s.grid.ny != grid.ny)
        throw std::invalid_argument("Trajectory: snapshot shape mismatch");
    }
    for (std::size_t t = 1; t < snapshots.size(); ++t) {
      const double gap = snapshots[t].time - snapshots[t - 1].time;
      if (!(gap > 0.0) || std::abs(gap - dt) > 1e-9 * std::max(1.0, std::abs(dt)))
        throw std::invalid_argument("Trajectory: snapshot times not uniformly spaced by dt");
    }
  }
};

/// A collection of trajectories sharing grid, dt, and field layout.
struct Dataset {
  std::string pde;  // generator name, informational
  std::vector<Trajectory> trajectories;

  int size() const { return int(trajectories.size()); }
  bool empty() const { return trajectories.empty(); }
  const Trajectory& operator[](int i) const { return trajectories[i]; }
};

}  // namespace sinenet
