// Thin FFTW wrappers: cached 1D complex transforms and a one-shot 2D
// transform for the Cartesian Riesz filter.
#pragma once

#include <fftw3.h>

#include <complex>
#include <map>
#include <vector>

namespace geoxray {

class Fft1d {
 public:
  explicit Fft1d(int n) : n_(n) {
    buf_ = fftw_alloc_complex(static_cast<size_t>(n));
    fwd_ = fftw_plan_dft_1d(n, buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_1d(n, buf_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  ~Fft1d() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(buf_);
  }
  Fft1d(const Fft1d&) = delete;
  Fft1d& operator=(const Fft1d&) = delete;

  // In-place DFT; backward pass divides by n so fwd . bwd == id.
  void transform(std::vector<std::complex<double>>& a, bool forward) {
    for (int i = 0; i < n_; ++i) {
      buf_[i][0] = a[i].real();
      buf_[i][1] = a[i].imag();
    }
    fftw_execute(forward ? fwd_ : bwd_);
    const double s = forward ? 1.0 : 1.0 / n_;
    for (int i = 0; i < n_; ++i) a[i] = {buf_[i][0] * s, buf_[i][1] * s};
  }

 private:
  int n_;
  fftw_complex* buf_;
  fftw_plan fwd_, bwd_;
};

// Shared per-size plan cache. Single-threaded use only.
inline Fft1d& fft1d_cache(int n) {
  static std::map<int, Fft1d*> cache;
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, new Fft1d(n)).first;
  return *it->second;
}

inline void fft(std::vector<std::complex<double>>& a, bool forward) {
  fft1d_cache(static_cast<int>(a.size())).transform(a, forward);
}

// In-place 2D DFT on row-major n x n data.
inline void fft2(std::vector<std::complex<double>>& a, int n, bool forward) {
  fftw_plan plan = fftw_plan_dft_2d(
      n, n, reinterpret_cast<fftw_complex*>(a.data()),
      reinterpret_cast<fftw_complex*>(a.data()),
      forward ? FFTW_FORWARD : FFTW_BACKWARD, FFTW_ESTIMATE);
  fftw_execute(plan);
  fftw_destroy_plan(plan);
  if (!forward) {
    const double s = 1.0 / (static_cast<double>(n) * n);
    for (auto& z : a) z *= s;
  }
}

// Fourier index -> signed mode number for an n-point transform.
inline int fft_mode(int k, int n) { return k <= n / 2 ? k : k - n; }

}  // namespace geoxray
