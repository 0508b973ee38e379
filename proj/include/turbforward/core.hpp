#pragma once
// Basic value types shared by every module: dense row-major images and
// rectangular convolution kernels. All data is double precision; operators
// treat images as plain arrays and never impose a value range.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace turbforward {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

/// H x W image, row-major. Index order is (row, col).
struct Image {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Image() = default;
  Image(int r, int c, double fill = 0.0) : rows(r), cols(c), v(static_cast<size_t>(r) * c, fill) {
    if (r <= 0 || c <= 0) throw std::invalid_argument("Image: dimensions must be positive");
  }

  double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
  bool inside(int r, int c) const { return r >= 0 && r < rows && c >= 0 && c < cols; }
  size_t size() const { return v.size(); }
};

/// Rectangular kernel stencil. The geometric center (rows-1)/2, (cols-1)/2
/// corresponds to zero displacement; odd extents keep the center on a sample.
struct Kernel {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Kernel() = default;
  Kernel(int r, int c, double fill = 0.0) : rows(r), cols(c), v(static_cast<size_t>(r) * c, fill) {
    if (r <= 0 || c <= 0) throw std::invalid_argument("Kernel: dimensions must be positive");
  }

  double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
  int center_row() const { return (rows - 1) / 2; }
  int center_col() const { return (cols - 1) / 2; }

  double sum() const {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }

  void normalize() {
    double s = sum();
    if (s <= 0.0) throw std::runtime_error("Kernel::normalize: nonpositive mass");
    for (double& x : v) x /= s;
  }
};

inline double max_abs(const std::vector<double>& a) {
  double m = 0.0;
  for (double x : a) m = std::max(m, std::abs(x));
  return m;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("max_abs_diff: size mismatch");
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double rms(const std::vector<double>& a) {
  if (a.empty()) return 0.0;
  double s = 0.0;
  for (double x : a) s += x * x;
  return std::sqrt(s / a.size());
}

/// Peak signal-to-noise ratio with an explicit peak value. Returns +inf for
/// identical inputs.
inline double psnr(const Image& a, const Image& b, double peak = 1.0) {
  if (a.rows != b.rows || a.cols != b.cols) throw std::invalid_argument("psnr: size mismatch");
  double mse = 0.0;
  for (size_t i = 0; i < a.v.size(); ++i) {
    double d = a.v[i] - b.v[i];
    mse += d * d;
  }
  mse /= a.v.size();
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

}  // namespace turbforward
