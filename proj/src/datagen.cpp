#include "sinenet/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "sinenet/dataset_io.hpp"
#include "sinenet/rng.hpp"
#include "sinenet/spectral.hpp"

namespace sinenet {

namespace {

using cvec = std::vector<std::complex<double>>;

/// RK4 on the imaginary axis is stable for |lambda*dt| below ~2.83.
constexpr double kRk4Bound = 2.8;

/// Band-limited Gaussian random field: independent N(0,1) amplitudes on the
/// cosine/sine modes with |m|_inf <= kmax (excluding the mean), then exactly
/// zero-mean unit-variance normalized on the grid.
std::vector<double> gaussian_field(const GridSpec& g, int kmax, Rng& rng) {
  const int nx = g.nx, ny = g.ny;
  std::vector<double> u(static_cast<size_t>(nx) * ny, 0.0);
  for (int mx = 0; mx <= kmax; ++mx) {
    for (int my = -kmax; my <= kmax; ++my) {
      if (mx == 0 && my <= 0) continue;  // half-plane: each real mode once
      const double a = rng.normal();
      const double b = rng.normal();
      for (int i = 0; i < nx; ++i) {
        const double px = 2.0 * M_PI * mx * i / nx;
        for (int j = 0; j < ny; ++j) {
          const double phase = px + 2.0 * M_PI * my * j / ny;
          u[static_cast<size_t>(i) * ny + j] += a * std::cos(phase) + b * std::sin(phase);
        }
      }
    }
  }
  double mean = 0;
  for (double v : u) mean += v;
  mean /= static_cast<double>(u.size());
  double var = 0;
  for (double& v : u) {
    v -= mean;
    var += v * v;
  }
  var /= static_cast<double>(u.size());
  const double scale = var > 0 ? 1.0 / std::sqrt(var) : 1.0;
  for (double& v : u) v *= scale;
  return u;
}

/// Shared spectral workspace for one trajectory.
struct Workspace {
  Workspace(const GridSpec& g)
      : nx(g.nx),
        ny(g.ny),
        n(static_cast<size_t>(g.nx) * g.ny),
        fft(g.nx, g.ny),
        kx(wavenumbers(g.nx)),
        ky(wavenumbers(g.ny)),
        mask(dealias_mask(g.nx, g.ny)) {}

  int nx, ny;
  size_t n;
  Fft2 fft;
  std::vector<double> kx, ky, mask;

  cvec to_hat(const std::vector<double>& real) {
    cvec a(n), out(n);
    for (size_t i = 0; i < n; ++i) a[i] = real[i];
    fft.forward(a.data(), out.data());
    return out;
  }
  std::vector<double> to_real(const cvec& hat) {
    cvec tmp(n);
    fft.inverse(hat.data(), tmp.data());
    std::vector<double> out(n);
    for (size_t i = 0; i < n; ++i) out[i] = tmp[i].real();
    return out;
  }
  double k2(size_t idx) const {
    const double a = kx[idx / ny], b = ky[idx % ny];
    return a * a + b * b;
  }
  cvec ddx(const cvec& hat) const {
    cvec out(n);
    for (size_t i = 0; i < n; ++i)
      out[i] = std::complex<double>(0, kx[i / ny]) * hat[i];
    return out;
  }
  cvec ddy(const cvec& hat) const {
    cvec out(n);
    for (size_t i = 0; i < n; ++i)
      out[i] = std::complex<double>(0, ky[i % ny]) * hat[i];
    return out;
  }
  void dealias(cvec& hat) const {
    for (size_t i = 0; i < n; ++i) hat[i] *= mask[i];
  }
  /// Spectral coefficients of the pointwise product of two spectral fields.
  cvec product_hat(const cvec& a_hat, const cvec& b_hat) {
    auto a = to_real(a_hat);
    auto b = to_real(b_hat);
    for (size_t i = 0; i < n; ++i) a[i] *= b[i];
    return to_hat(a);
  }
};

/// PDE right-hand side split as state' = L(state) + N(state), with L the
/// per-field diffusion handled exactly by the integrating factor and N the
/// dealiased advective/forcing terms integrated by RK4.
struct Problem {
  std::vector<double> nu;  // diffusion coefficient per state field
  std::function<std::vector<cvec>(const std::vector<cvec>&)> nonlinear;
  /// Maximum advective signal speed for the stability bound.
  std::function<double(const std::vector<cvec>&)> signal_speed;
  /// Converts solver state to the stored snapshot fields.
  std::function<std::vector<std::vector<double>>(const std::vector<cvec>&)> observe;
  std::vector<std::string> field_names;
};

/// One Cox-Matthews integrating-factor RK4 step of size h.
void ifrk4_step(Workspace& ws, const Problem& prob, std::vector<cvec>& state, double h) {
  const size_t f_count = state.size();
  std::vector<std::vector<double>> e_half(f_count), e_full(f_count);
  for (size_t f = 0; f < f_count; ++f) {
    e_half[f].resize(ws.n);
    e_full[f].resize(ws.n);
    for (size_t i = 0; i < ws.n; ++i) {
      const double d = std::exp(-prob.nu[f] * ws.k2(i) * 0.5 * h);
      e_half[f][i] = d;
      e_full[f][i] = d * d;
    }
  }
  auto apply = [&](const std::vector<std::vector<double>>& e, const std::vector<cvec>& v) {
    std::vector<cvec> out(f_count);
    for (size_t f = 0; f < f_count; ++f) {
      out[f].resize(ws.n);
      for (size_t i = 0; i < ws.n; ++i) out[f][i] = e[f][i] * v[f][i];
    }
    return out;
  };
  auto axpy = [&](const std::vector<cvec>& a, double s, const std::vector<cvec>& b) {
    std::vector<cvec> out(f_count);
    for (size_t f = 0; f < f_count; ++f) {
      out[f].resize(ws.n);
      for (size_t i = 0; i < ws.n; ++i) out[f][i] = a[f][i] + s * b[f][i];
    }
    return out;
  };

  const auto k1 = prob.nonlinear(state);
  const auto eu = apply(e_half, state);
  const auto k2 = prob.nonlinear(axpy(eu, 0.5 * h, apply(e_half, k1)));
  const auto k3 = prob.nonlinear(axpy(eu, 0.5 * h, k2));
  const auto e2u = apply(e_full, state);
  const auto k4 = prob.nonlinear(axpy(e2u, h, apply(e_half, k3)));

  for (size_t f = 0; f < f_count; ++f)
    for (size_t i = 0; i < ws.n; ++i)
      state[f][i] = e_full[f][i] * state[f][i] +
                    (h / 6.0) * (e_full[f][i] * k1[f][i] +
                                 2.0 * e_half[f][i] * (k2[f][i] + k3[f][i]) + k4[f][i]);
}

/// Velocity of the fixed advecting field; the solenoidal variant is drawn
/// once from a pinned seed so every trajectory of the family shares it.
void advection_velocity(const SimConfig& cfg, Workspace& ws, std::vector<double>& vx,
                        std::vector<double>& vy) {
  if (cfg.adv_mode == "constant") {
    vx.assign(ws.n, cfg.adv_cx);
    vy.assign(ws.n, cfg.adv_cy);
    return;
  }
  if (cfg.adv_mode != "solenoidal")
    throw std::invalid_argument("unknown adv_mode: " + cfg.adv_mode);
  Rng rng = Rng::stream(0x51CEFA11u, 7);
  auto psi = gaussian_field(cfg.grid, 4, rng);
  auto psi_hat = ws.to_hat(psi);
  vx = ws.to_real(ws.ddy(psi_hat));
  vy = ws.to_real(ws.ddx(psi_hat));
  for (auto& v : vy) v = -v;
  double ms = 0;
  for (size_t i = 0; i < ws.n; ++i) ms += vx[i] * vx[i] + vy[i] * vy[i];
  ms = std::sqrt(ms / static_cast<double>(ws.n));
  const double scale = ms > 0 ? 1.0 / ms : 1.0;  // unit rms speed
  for (size_t i = 0; i < ws.n; ++i) {
    vx[i] *= scale;
    vy[i] *= scale;
  }
}

double max_abs(const std::vector<double>& v) {
  double m = 0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

Problem make_problem(const SimConfig& cfg, Workspace& ws) {
  Problem p;
  if (cfg.pde == "heat") {
    p.nu = {cfg.mu};
    p.field_names = {"u"};
    p.nonlinear = [&ws](const std::vector<cvec>&) {
      return std::vector<cvec>{cvec(ws.n, {0.0, 0.0})};
    };
    p.signal_speed = [](const std::vector<cvec>&) { return 0.0; };
    p.observe = [&ws](const std::vector<cvec>& s) {
      return std::vector<std::vector<double>>{ws.to_real(s[0])};
    };
    return p;
  }

  if (cfg.pde == "advection_diffusion") {
    auto vx = std::make_shared<std::vector<double>>();
    auto vy = std::make_shared<std::vector<double>>();
    advection_velocity(cfg, ws, *vx, *vy);
    p.nu = {cfg.mu};
    p.field_names = {"u"};
    p.nonlinear = [&ws, vx, vy](const std::vector<cvec>& s) {
      auto ux = ws.to_real(ws.ddx(s[0]));
      auto uy = ws.to_real(ws.ddy(s[0]));
      for (size_t i = 0; i < ws.n; ++i) ux[i] = -((*vx)[i] * ux[i] + (*vy)[i] * uy[i]);
      auto out = ws.to_hat(ux);
      ws.dealias(out);
      return std::vector<cvec>{std::move(out)};
    };
    p.signal_speed = [vx, vy](const std::vector<cvec>&) {
      return max_abs(*vx) + max_abs(*vy);
    };
    p.observe = [&ws](const std::vector<cvec>& s) {
      return std::vector<std::vector<double>>{ws.to_real(s[0])};
    };
    return p;
  }

  if (cfg.pde == "incompressible_ns_periodic") {
    // State: vorticity, passive concentration. Velocity recovered from the
    // streamfunction psi_hat = w_hat / |k|^2 (zero mean mode).
    p.nu = {cfg.mu, cfg.kappa_c};
    p.field_names = {"concentration", "vx", "vy"};
    auto force_hat = std::make_shared<cvec>();
    {
      std::vector<double> fr(ws.n);
      for (int i = 0; i < ws.nx; ++i)
        for (int j = 0; j < ws.ny; ++j)
          fr[static_cast<size_t>(i) * ws.ny + j] =
              cfg.forcing * std::cos(2.0 * M_PI * i / ws.nx);
      *force_hat = ws.to_hat(fr);
    }
    auto velocity = [&ws](const cvec& w_hat, cvec& vx_hat, cvec& vy_hat) {
      vx_hat.resize(ws.n);
      vy_hat.resize(ws.n);
      for (size_t i = 0; i < ws.n; ++i) {
        const double k2 = ws.k2(i);
        const std::complex<double> psi = k2 > 0 ? w_hat[i] / k2 : 0.0;
        vx_hat[i] = std::complex<double>(0, ws.ky[i % ws.ny]) * psi;
        vy_hat[i] = std::complex<double>(0, -ws.kx[i / ws.ny]) * psi;
      }
    };
    p.nonlinear = [&ws, velocity, force_hat](const std::vector<cvec>& s) {
      cvec vx_hat, vy_hat;
      velocity(s[0], vx_hat, vy_hat);
      const auto vx = ws.to_real(vx_hat);
      const auto vy = ws.to_real(vy_hat);
      auto advect = [&](const cvec& q_hat) {
        auto qx = ws.to_real(ws.ddx(q_hat));
        auto qy = ws.to_real(ws.ddy(q_hat));
        for (size_t i = 0; i < ws.n; ++i) qx[i] = -(vx[i] * qx[i] + vy[i] * qy[i]);
        auto out = ws.to_hat(qx);
        ws.dealias(out);
        return out;
      };
      auto nw = advect(s[0]);
      for (size_t i = 0; i < ws.n; ++i) nw[i] += (*force_hat)[i];
      return std::vector<cvec>{std::move(nw), advect(s[1])};
    };
    p.signal_speed = [&ws, velocity](const std::vector<cvec>& s) {
      cvec vx_hat, vy_hat;
      velocity(s[0], vx_hat, vy_hat);
      return max_abs(ws.to_real(vx_hat)) + max_abs(ws.to_real(vy_hat));
    };
    p.observe = [&ws, velocity](const std::vector<cvec>& s) {
      cvec vx_hat, vy_hat;
      velocity(s[0], vx_hat, vy_hat);
      return std::vector<std::vector<double>>{ws.to_real(s[1]), ws.to_real(vx_hat),
                                              ws.to_real(vy_hat)};
    };
    return p;
  }

  if (cfg.pde == "shallow_water_periodic") {
    // State: height, vx, vy. Mass equation in flux form keeps the mean of h
    // exactly constant (the k=0 coefficient of a divergence is zero).
    p.nu = {0.0, cfg.mu, cfg.mu};
    p.field_names = {"h", "vx", "vy"};
    const double g = cfg.gravity;
    p.nonlinear = [&ws, g](const std::vector<cvec>& s) {
      const auto h = ws.to_real(s[0]);
      const auto vx = ws.to_real(s[1]);
      const auto vy = ws.to_real(s[2]);
      std::vector<double> hvx(ws.n), hvy(ws.n);
      for (size_t i = 0; i < ws.n; ++i) {
        hvx[i] = h[i] * vx[i];
        hvy[i] = h[i] * vy[i];
      }
      auto flux = ws.ddx(ws.to_hat(hvx));
      const auto fy = ws.ddy(ws.to_hat(hvy));
      for (size_t i = 0; i < ws.n; ++i) flux[i] = -(flux[i] + fy[i]);
      ws.dealias(flux);

      const auto vxx = ws.to_real(ws.ddx(s[1]));
      const auto vxy = ws.to_real(ws.ddy(s[1]));
      const auto vyx = ws.to_real(ws.ddx(s[2]));
      const auto vyy = ws.to_real(ws.ddy(s[2]));
      std::vector<double> ax(ws.n), ay(ws.n);
      for (size_t i = 0; i < ws.n; ++i) {
        ax[i] = -(vx[i] * vxx[i] + vy[i] * vxy[i]);
        ay[i] = -(vx[i] * vyx[i] + vy[i] * vyy[i]);
      }
      auto nvx = ws.to_hat(ax);
      auto nvy = ws.to_hat(ay);
      const auto hx = ws.ddx(s[0]);
      const auto hy = ws.ddy(s[0]);
      for (size_t i = 0; i < ws.n; ++i) {
        nvx[i] -= g * hx[i];
        nvy[i] -= g * hy[i];
      }
      ws.dealias(nvx);
      ws.dealias(nvy);
      return std::vector<cvec>{std::move(flux), std::move(nvx), std::move(nvy)};
    };
    p.signal_speed = [&ws, g](const std::vector<cvec>& s) {
      const auto h = ws.to_real(s[0]);
      double hmax = 0;
      for (double v : h) hmax = std::max(hmax, v);
      return max_abs(ws.to_real(s[1])) + max_abs(ws.to_real(s[2])) +
             std::sqrt(g * std::max(hmax, 0.0));
    };
    p.observe = [&ws](const std::vector<cvec>& s) {
      return std::vector<std::vector<double>>{ws.to_real(s[0]), ws.to_real(s[1]),
                                              ws.to_real(s[2])};
    };
    return p;
  }

  throw std::invalid_argument("unknown pde: " + cfg.pde);
}

std::vector<cvec> initial_state(const SimConfig& cfg, Workspace& ws) {
  if (cfg.pde == "heat" || cfg.pde == "advection_diffusion") {
    Rng rng = Rng::stream(cfg.seed, 0);
    return {ws.to_hat(gaussian_field(cfg.grid, cfg.ic_kmax, rng))};
  }
  if (cfg.pde == "incompressible_ns_periodic") {
    Rng r0 = Rng::stream(cfg.seed, 0);
    Rng r1 = Rng::stream(cfg.seed, 1);
    return {ws.to_hat(gaussian_field(cfg.grid, cfg.ic_kmax, r0)),
            ws.to_hat(gaussian_field(cfg.grid, cfg.ic_kmax, r1))};
  }
  // shallow_water_periodic: mean depth 1 with small perturbations keeps the
  // height positive and the gravity-wave speed near sqrt(g).
  Rng r0 = Rng::stream(cfg.seed, 0);
  Rng r1 = Rng::stream(cfg.seed, 1);
  Rng r2 = Rng::stream(cfg.seed, 2);
  auto h = gaussian_field(cfg.grid, cfg.ic_kmax, r0);
  for (auto& v : h) v = 1.0 + 0.1 * v;
  auto vx = gaussian_field(cfg.grid, cfg.ic_kmax, r1);
  auto vy = gaussian_field(cfg.grid, cfg.ic_kmax, r2);
  for (auto& v : vx) v *= 0.1;
  for (auto& v : vy) v *= 0.1;
  return {ws.to_hat(h), ws.to_hat(vx), ws.to_hat(vy)};
}

}  // namespace

void SimConfig::validate() const {
  grid.validate(1);
  if (grid.boundary != Boundary::periodic)
    throw std::invalid_argument("generated data requires periodic boundaries");
  if (t_snapshots < 1) throw std::invalid_argument("t_snapshots must be >= 1");
  if (!(dt > 0)) throw std::invalid_argument("dt must be positive");
  if (substeps < 1) throw std::invalid_argument("substeps must be >= 1");
  if (mu < 0) throw std::invalid_argument("mu must be >= 0");
  if (kappa_c < 0) throw std::invalid_argument("kappa_c must be >= 0");
  if (gravity < 0) throw std::invalid_argument("gravity must be >= 0");
  if (ic_kmax < 1 || ic_kmax > std::min(grid.nx, grid.ny) / 3)
    throw std::invalid_argument("ic_kmax must be in [1, n/3]");
  if (pde != "heat" && pde != "advection_diffusion" && pde != "incompressible_ns_periodic" &&
      pde != "shallow_water_periodic")
    throw std::invalid_argument("unknown pde: " + pde);
}

Trajectory generate(const SimConfig& config) {
  config.validate();
  Workspace ws(config.grid);
  Problem prob = make_problem(config, ws);
  auto state = initial_state(config, ws);

  const double h = config.dt / config.substeps;
  const double kmax =
      2.0 * M_PI * static_cast<double>(std::min(config.grid.nx, config.grid.ny) / 3);
  const double lambda = prob.signal_speed(state) * kmax * h;
  if (lambda > kRk4Bound) {
    std::ostringstream msg;
    msg << "stability bound violated: |lambda*dt| = " << lambda << " > " << kRk4Bound
        << "; increase substeps to at least "
        << static_cast<int>(std::ceil(config.substeps * lambda / kRk4Bound));
    throw std::invalid_argument(msg.str());
  }

  Trajectory traj;
  traj.grid = config.grid;
  traj.dt = config.dt;
  traj.seed = config.seed;
  traj.pde_params = {{"mu", config.mu},
                     {"forcing", config.forcing},
                     {"substeps", static_cast<double>(config.substeps)},
                     {"kappa_c", config.kappa_c},
                     {"gravity", config.gravity}};

  auto record = [&](int t) {
    FieldSet fs(config.grid, prob.field_names);
    fs.time = t * config.dt;
    const auto obs = prob.observe(state);
    for (size_t f = 0; f < obs.size(); ++f)
      std::copy(obs[f].begin(), obs[f].end(), fs.field(static_cast<int>(f)));
    if (!fs.all_finite())
      throw std::runtime_error("non-finite value at snapshot " + std::to_string(t) + " (pde=" +
                               config.pde + ", seed=" + std::to_string(config.seed) + ")");
    traj.snapshots.push_back(std::move(fs));
  };

  record(0);
  for (int t = 1; t < config.t_snapshots; ++t) {
    for (int s = 0; s < config.substeps; ++s) ifrk4_step(ws, prob, state, h);
    record(t);
  }
  return traj;
}

FieldSet divergence(const FieldSet& fs) {
  const int ix = fs.field_index("vx");
  const int iy = fs.field_index("vy");
  Workspace ws(fs.grid);
  const size_t n = ws.n;
  std::vector<double> vx(n), vy(n);
  std::copy(fs.field(ix), fs.field(ix) + n, vx.begin());
  std::copy(fs.field(iy), fs.field(iy) + n, vy.begin());
  auto dx = ws.ddx(ws.to_hat(vx));
  const auto dy = ws.ddy(ws.to_hat(vy));
  for (size_t i = 0; i < n; ++i) dx[i] += dy[i];
  FieldSet out(fs.grid, {"div"});
  out.time = fs.time;
  const auto d = ws.to_real(dx);
  std::copy(d.begin(), d.end(), out.field(0));
  return out;
}

Dataset generate_many(const SimConfig& base, int n, std::uint64_t seed0,
                      const std::string& prefix) {
  if (n < 1) throw std::invalid_argument("trajectory count must be >= 1");
  Dataset ds;
  ds.pde = base.pde;
  for (int i = 0; i < n; ++i) {
    SimConfig cfg = base;
    cfg.seed = seed0 + static_cast<std::uint64_t>(i);
    Trajectory t = generate(cfg);
    std::ostringstream id;
    id << prefix << "_" << i;
    t.id = id.str();
    ds.trajectories.push_back(std::move(t));
  }
  return ds;
}

void make_benchmark(const SimConfig& base, int n_train, int n_valid, int n_test,
                    const std::string& out_dir) {
  if (n_train < 1 || n_valid < 1 || n_test < 1)
    throw std::invalid_argument("split counts must be >= 1");
  namespace fs = std::filesystem;
  save_dataset(generate_many(base, n_train, base.seed, "train"),
               (fs::path(out_dir) / "train").string());
  save_dataset(generate_many(base, n_valid, base.seed + 100000, "valid"),
               (fs::path(out_dir) / "valid").string());
  save_dataset(generate_many(base, n_test, base.seed + 200000, "test"),
               (fs::path(out_dir) / "test").string());
}

}  // namespace sinenet
