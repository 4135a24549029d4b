#pragma once

#include <stdexcept>
#include <string>

namespace sinenet {

/// Convolution/interpolation boundary handling. `circular` wraps on the
/// torus; `zeros` pads convolutions with zeros and clamps interpolation taps.
enum class PadMode { zeros, circular };

/// External-parameter conditioning mode for conv blocks.
enum class CondMode { none, add, adagn };

/// Conditioning inputs: snapshot spacing and forcing amplitude.
struct Kappa {
  double dt = 1.0;
  double force = 0.0;
};

inline std::string to_string(PadMode p) { return p == PadMode::zeros ? "zeros" : "circular"; }
inline PadMode pad_from_string(const std::string& s) {
  if (s == "zeros") return PadMode::zeros;
  if (s == "circular") return PadMode::circular;
  throw std::invalid_argument("unknown padding mode: " + s);
}

inline std::string to_string(CondMode c) {
  switch (c) {
    case CondMode::none: return "none";
    case CondMode::add: return "add";
    case CondMode::adagn: return "adagn";
  }
  return "none";
}
inline CondMode cond_from_string(const std::string& s) {
  if (s == "none") return CondMode::none;
  if (s == "add") return CondMode::add;
  if (s == "adagn") return CondMode::adagn;
  throw std::invalid_argument("unknown conditioning mode: " + s);
}

}  // namespace sinenet
