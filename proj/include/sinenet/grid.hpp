#pragma once

#include <stdexcept>
#include <string>

namespace sinenet {

/// Boundary behaviour of the fields stored on a grid.
enum class Boundary { periodic, dirichlet_zero, neumann_zero };

std::string to_string(Boundary b);
Boundary boundary_from_string(const std::string& s);

/// Uniform 2D grid. The first spatial axis (size nx = N1) is the outer,
/// row-major index; the second (size ny = N2) is contiguous.
struct GridSpec {
  int nx = 64;
  int ny = 64;
  double dx = 1.0 / 64.0;
  double dy = 1.0 / 64.0;
  Boundary boundary = Boundary::periodic;

  /// Throws if the grid cannot host a depth-L down/up network.
  void validate(int levels = 4) const {
    if (nx < 8 || ny < 8) throw std::invalid_argument("GridSpec: nx, ny must be >= 8");
    if (dx <= 0.0 || dy <= 0.0) throw std::invalid_argument("GridSpec: dx, dy must be > 0");
    const int div = 1 << levels;
    if (nx % div != 0 || ny % div != 0)
      throw std::invalid_argument("GridSpec: nx, ny must be divisible by 2^" + std::to_string(levels));
  }

  bool operator==(const GridSpec& o) const {
    return nx == o.nx && ny == o.ny && dx == o.dx && dy == o.dy && boundary == o.boundary;
  }
};

inline std::string to_string(Boundary b) {
  switch (b) {
    case Boundary::periodic: return "periodic";
    case Boundary::dirichlet_zero: return "dirichlet_zero";
    case Boundary::neumann_zero: return "neumann_zero";
  }
  return "periodic";
}

inline Boundary boundary_from_string(const std::string& s) {
  if (s == "periodic") return Boundary::periodic;
  if (s == "dirichlet_zero") return Boundary::dirichlet_zero;
  if (s == "neumann_zero") return Boundary::neumann_zero;
  throw std::invalid_argument("unknown boundary: " + s);
}

}  // namespace sinenet
