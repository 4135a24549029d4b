#include "sinenet/spectral.hpp"

#include <cmath>
#include <cstring>
#include <mutex>
#include <stdexcept>

#include <fftw3.h>

namespace sinenet {

namespace {
std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

struct Fft2::Impl {
  int nx, ny;
  fftw_complex* a;
  fftw_complex* b;
  fftw_plan fwd;
  fftw_plan bwd;
};

Fft2::Fft2(int nx, int ny) : impl_(new Impl) {
  if (nx < 2 || ny < 2) throw std::invalid_argument("Fft2: grid too small");
  impl_->nx = nx;
  impl_->ny = ny;
  const size_t n = static_cast<size_t>(nx) * ny;
  impl_->a = fftw_alloc_complex(n);
  impl_->b = fftw_alloc_complex(n);
  if (!impl_->a || !impl_->b) throw std::bad_alloc();
  std::lock_guard<std::mutex> lock(plan_mutex());
  impl_->fwd = fftw_plan_dft_2d(nx, ny, impl_->a, impl_->b, FFTW_FORWARD, FFTW_ESTIMATE);
  impl_->bwd = fftw_plan_dft_2d(nx, ny, impl_->a, impl_->b, FFTW_BACKWARD, FFTW_ESTIMATE);
  if (!impl_->fwd || !impl_->bwd) throw std::runtime_error("Fft2: plan creation failed");
}

Fft2::~Fft2() {
  std::lock_guard<std::mutex> lock(plan_mutex());
  fftw_destroy_plan(impl_->fwd);
  fftw_destroy_plan(impl_->bwd);
  fftw_free(impl_->a);
  fftw_free(impl_->b);
}

int Fft2::nx() const { return impl_->nx; }
int Fft2::ny() const { return impl_->ny; }

void Fft2::forward(const std::complex<double>* in, std::complex<double>* out) {
  const size_t n = static_cast<size_t>(impl_->nx) * impl_->ny;
  std::memcpy(impl_->a, in, n * sizeof(fftw_complex));
  fftw_execute(impl_->fwd);
  std::memcpy(out, impl_->b, n * sizeof(fftw_complex));
}

void Fft2::inverse(const std::complex<double>* in, std::complex<double>* out) {
  const size_t n = static_cast<size_t>(impl_->nx) * impl_->ny;
  std::memcpy(impl_->a, in, n * sizeof(fftw_complex));
  fftw_execute(impl_->bwd);
  const double scale = 1.0 / static_cast<double>(n);
  auto* src = reinterpret_cast<std::complex<double>*>(impl_->b);
  for (size_t i = 0; i < n; ++i) out[i] = src[i] * scale;
}

std::vector<double> wavenumbers(int n) {
  std::vector<double> k(n);
  for (int i = 0; i < n; ++i) {
    const int m = i <= n / 2 ? i : i - n;
    k[i] = 2.0 * M_PI * m;
  }
  return k;
}

std::vector<double> dealias_mask(int nx, int ny) {
  std::vector<double> mask(static_cast<size_t>(nx) * ny, 0.0);
  const int cx = nx / 3, cy = ny / 3;
  for (int i = 0; i < nx; ++i) {
    const int mi = i <= nx / 2 ? i : i - nx;
    for (int j = 0; j < ny; ++j) {
      const int mj = j <= ny / 2 ? j : j - ny;
      if (std::abs(mi) <= cx && std::abs(mj) <= cy)
        mask[static_cast<size_t>(i) * ny + j] = 1.0;
    }
  }
  return mask;
}

}  // namespace sinenet
