#pragma once

#include <complex>
#include <memory>
#include <vector>

namespace sinenet {

/// 2D complex FFT of a fixed size, row-major [nx][ny]. forward() is
/// unnormalized; inverse() divides by nx*ny so the pair is an identity.
/// Plans are created with estimation-only heuristics (no runtime measurement),
/// keeping generated data bit-identical across runs. Plan creation is
/// serialized internally; execution on distinct instances is thread-safe.
class Fft2 {
 public:
  Fft2(int nx, int ny);
  ~Fft2();
  Fft2(const Fft2&) = delete;
  Fft2& operator=(const Fft2&) = delete;

  void forward(const std::complex<double>* in, std::complex<double>* out);
  void inverse(const std::complex<double>* in, std::complex<double>* out);

  int nx() const;
  int ny() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Angular wavenumbers 2*pi*m for a unit-length axis of n samples, with
/// integer frequencies m = 0,1,..,n/2,-(n/2-1),..,-1 in FFT order.
std::vector<double> wavenumbers(int n);

/// 2/3-rule dealiasing mask in FFT order: 1 where |m| <= n/3 on both axes.
std::vector<double> dealias_mask(int nx, int ny);

}  // namespace sinenet
