#pragma once

#include <complex>
#include <stdexcept>
#include <vector>

#include <fftw3.h>

namespace turbforward {

// Forward complex 2-D DFT, unnormalized, row-major Q x Q.
// FFTW_ESTIMATE keeps planning deterministic (no runtime measurement).
class Fft2D {
 public:
  explicit Fft2D(int q) : q_(q) {
    if (q < 2) throw std::invalid_argument("transform size must be >= 2");
    in_ = fftw_alloc_complex(static_cast<std::size_t>(q) * q);
    out_ = fftw_alloc_complex(static_cast<std::size_t>(q) * q);
    if (!in_ || !out_) {
      if (in_) fftw_free(in_);
      if (out_) fftw_free(out_);
      throw std::bad_alloc();
    }
    plan_ = fftw_plan_dft_2d(q, q, in_, out_, FFTW_FORWARD, FFTW_ESTIMATE);
    if (!plan_) {
      fftw_free(in_);
      fftw_free(out_);
      throw std::runtime_error("fft planning failed");
    }
  }

  Fft2D(const Fft2D&) = delete;
  Fft2D& operator=(const Fft2D&) = delete;

  ~Fft2D() {
    fftw_destroy_plan(plan_);
    fftw_free(in_);
    fftw_free(out_);
  }

  int size() const { return q_; }

  // src.size() must be q*q; returns the q*q spectrum.
  std::vector<std::complex<double>> forward(
      const std::vector<std::complex<double>>& src) {
    const std::size_t n = static_cast<std::size_t>(q_) * q_;
    if (src.size() != n) throw std::invalid_argument("fft input size mismatch");
    for (std::size_t i = 0; i < n; ++i) {
      in_[i][0] = src[i].real();
      in_[i][1] = src[i].imag();
    }
    fftw_execute(plan_);
    std::vector<std::complex<double>> dst(n);
    for (std::size_t i = 0; i < n; ++i) dst[i] = {out_[i][0], out_[i][1]};
    return dst;
  }

 private:
  int q_;
  fftw_complex* in_;
  fftw_complex* out_;
  fftw_plan plan_;
};

}  // namespace turbforward
