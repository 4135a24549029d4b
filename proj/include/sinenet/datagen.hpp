#pragma once

#include <cstdint>
#include <string>

#include "sinenet/field_set.hpp"
#include "sinenet/grid.hpp"

namespace sinenet {

/// One simulation request. All solvers are pseudo-spectral on the periodic
/// unit torus: RK4 on the advective terms with an exact integrating factor
/// for diffusion, 2/3-rule dealiasing on products.
///
/// PDEs and stored fields:
///   heat                       {u}          u_t = mu * lap(u)
///   advection_diffusion        {u}          u_t + v.grad(u) = mu * lap(u),
///                                           v a fixed divergence-free field
///   incompressible_ns_periodic {concentration, vx, vy}
///                                           vorticity-streamfunction form,
///                                           forcing f*cos(2 pi x) on vorticity,
///                                           passive scalar with kappa_c
///   shallow_water_periodic     {h, vx, vy}  flux-form mass equation (exact
///                                           mass conservation), gravity g,
///                                           viscosity mu on velocity
struct SimConfig {
  std::string pde = "heat";
  GridSpec grid;
  int t_snapshots = 12;  ///< snapshots including the initial condition
  double dt = 0.05;      ///< snapshot spacing
  int substeps = 4;      ///< solver steps per snapshot interval
  double mu = 1e-3;      ///< viscosity / diffusivity
  double forcing = 0.0;  ///< vorticity forcing amplitude (NS only)
  std::uint64_t seed = 0;

  double kappa_c = 1e-3;  ///< NS passive-scalar diffusivity
  double gravity = 1.0;   ///< SWE gravity
  /// advection_diffusion velocity: "solenoidal" draws a fixed band-limited
  /// divergence-free field from an internal pinned seed (shared by every
  /// trajectory of the family); "constant" uses (adv_cx, adv_cy).
  std::string adv_mode = "solenoidal";
  double adv_cx = 1.0;
  double adv_cy = 0.0;
  int ic_kmax = 8;  ///< initial-condition band limit (infinity norm of modes)

  void validate() const;
};

/// Runs one trajectory. Deterministic given the config (including seed).
/// Throws invalid_argument on config/stability-bound violations and
/// runtime_error naming the first bad snapshot if the state goes non-finite.
Trajectory generate(const SimConfig& config);

/// Pointwise spectral divergence of the velocity fields; requires fields
/// named vx and vy. Returns a single-field set named "div".
FieldSet divergence(const FieldSet& fs);

/// n trajectories with seeds seed0, seed0+1, ...; ids "<prefix>_<i>".
Dataset generate_many(const SimConfig& base, int n, std::uint64_t seed0,
                      const std::string& prefix);

/// Writes train/, valid/, test/ datasets under out_dir with disjoint seed
/// ranges (base, base+100000, base+200000); seeds are recorded per trajectory
/// in the manifests.
void make_benchmark(const SimConfig& base, int n_train, int n_valid, int n_test,
                    const std::string& out_dir);

}  // namespace sinenet
