#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "turbforward/core.hpp"
#include "turbforward/fft.hpp"
#include "turbforward/pupil.hpp"
#include "turbforward/turbulence.hpp"
#include "turbforward/zernike.hpp"

namespace turbforward {

// A point spread function is a nonnegative unit-sum kernel whose geometric
// center is the zero-displacement bin.
using Psf = Kernel;

enum class KernelInterp { nearest, bilinear };

namespace detail {

// |DFT(mask * exp(-j 2 pi phase))|^2 on a (pad*P)^2 grid, cropped to the
// central K x K bins around DC and normalized to unit sum. Pupil placement in
// the transform grid only changes spectrum phase, never the modulus.
inline Psf synthesize_with(Fft2D& fft, const std::vector<double>& phase,
                           const PupilGrid& grid, int kernel_size) {
  const int p = grid.resolution;
  const int q = fft.size();
  if (static_cast<int>(phase.size()) != p * p)
    throw std::invalid_argument("phase size does not match pupil grid");

  std::vector<std::complex<double>> field(static_cast<std::size_t>(q) * q,
                                          {0.0, 0.0});
  constexpr double two_pi = 6.283185307179586476925286766559;
  for (int r = 0; r < p; ++r)
    for (int c = 0; c < p; ++c)
      if (grid.inside(r, c)) {
        const double ang = -two_pi * phase[static_cast<std::size_t>(r) * p + c];
        field[static_cast<std::size_t>(r) * q + c] = {std::cos(ang),
                                                      std::sin(ang)};
      }

  const auto spectrum = fft.forward(field);

  Psf kernel(kernel_size, kernel_size);
  const int half = (kernel_size - 1) / 2;
  for (int dr = -half; dr <= half; ++dr)
    for (int dc = -half; dc <= half; ++dc) {
      const int kr = ((dr % q) + q) % q;
      const int kc = ((dc % q) + q) % q;
      kernel.at(dr + half, dc + half) =
          std::norm(spectrum[static_cast<std::size_t>(kr) * q + kc]);
    }
  kernel.normalize();
  return kernel;
}

}  // namespace detail

inline Psf synthesize_psf(const std::vector<double>& phase,
                          const PupilGrid& grid, int kernel_size, int pad) {
  if (kernel_size < 1 || kernel_size % 2 == 0)
    throw std::invalid_argument("kernel size must be odd and positive");
  if (pad < 2) throw std::invalid_argument("pad factor must be >= 2");
  const int q = pad * grid.resolution;
  if (kernel_size > q)
    throw std::invalid_argument("kernel size exceeds padded transform");
  Fft2D fft(q);
  return detail::synthesize_with(fft, phase, grid, kernel_size);
}

// Intensity-weighted first moment relative to the geometric center,
// x along columns, y along rows.
inline Vec2 centroid(const Kernel& k) {
  double sum = 0.0, mx = 0.0, my = 0.0;
  for (int r = 0; r < k.rows; ++r)
    for (int c = 0; c < k.cols; ++c) {
      const double v = k.at(r, c);
      sum += v;
      mx += v * (c - k.center_col());
      my += v * (r - k.center_row());
    }
  if (sum <= 0.0) return {0.0, 0.0};
  return {mx / sum, my / sum};
}

struct TiltSplit {
  Vec2 tilt;                     // least-squares coefficients on modes 2, 3
  std::vector<double> residual;  // phase minus its tilt-plane component
};

// Least-squares split; projecting the residual back onto modes {2,3}
// yields zero to solver precision (idempotent removal).
inline TiltSplit split_tilt(const std::vector<double>& phase,
                            const PupilGrid& grid, const ZernikeStack& stack) {
  if (stack.modes < 3) throw std::invalid_argument("stack needs modes >= 3");
  const std::vector<int> tilt_modes = {2, 3};
  const auto coeffs = project_onto_modes(phase, grid, stack, tilt_modes);
  TiltSplit out;
  out.tilt = {coeffs[0], coeffs[1]};
  out.residual = phase;
  const int p = grid.resolution;
  const double* z2 = stack.plane(2);
  const double* z3 = stack.plane(3);
  for (int i = 0; i < p * p; ++i)
    out.residual[i] -= coeffs[0] * z2[i] + coeffs[1] * z3[i];
  return out;
}

// Kernel translated by a (possibly fractional) displacement; bilinear
// resampling, zero fill. Mass leaving the window is dropped.
inline Kernel translate_kernel(const Kernel& k, Vec2 shift) {
  Kernel out(k.rows, k.cols);
  for (int r = 0; r < k.rows; ++r)
    for (int c = 0; c < k.cols; ++c) {
      const double sr = r - shift.y;
      const double sc = c - shift.x;
      const int r0 = static_cast<int>(std::floor(sr));
      const int c0 = static_cast<int>(std::floor(sc));
      const double fr = sr - r0;
      const double fc = sc - c0;
      double v = 0.0;
      for (int dr = 0; dr <= 1; ++dr)
        for (int dc = 0; dc <= 1; ++dc) {
          const int rr = r0 + dr;
          const int cc = c0 + dc;
          if (rr < 0 || rr >= k.rows || cc < 0 || cc >= k.cols) continue;
          const double w = (dr ? fr : 1.0 - fr) * (dc ? fc : 1.0 - fc);
          v += w * k.at(rr, cc);
        }
      out.at(r, c) = v;
    }
  return out;
}

// Anchor lattice of cell centers; G=1 degenerates to the image center and
// first/last anchors always sit within half a cell of the borders.
inline std::vector<Vec2> make_anchor_lattice(int rows, int cols,
                                             int grid_points) {
  if (grid_points < 1) throw std::invalid_argument("anchor count must be >= 1");
  std::vector<Vec2> anchors;
  anchors.reserve(static_cast<std::size_t>(grid_points) * grid_points);
  const double cell_r = static_cast<double>(rows) / grid_points;
  const double cell_c = static_cast<double>(cols) / grid_points;
  for (int gr = 0; gr < grid_points; ++gr)
    for (int gc = 0; gc < grid_points; ++gc)
      anchors.push_back(
          {(gc + 0.5) * cell_c - 0.5, (gr + 0.5) * cell_r - 0.5});
  return anchors;
}

// Tilt-free kernels on a G x G anchor lattice plus the rule for assigning a
// kernel to an arbitrary pixel.
struct PsfField {
  int grid_points = 0;
  int image_rows = 0, image_cols = 0;
  int kernel_size = 0;
  std::vector<Vec2> anchors;  // x = column, y = row
  std::vector<Psf> kernels;   // one per anchor, row-major over the lattice
  KernelInterp interp = KernelInterp::nearest;

  int nearest_anchor(double row, double col) const {
    const double cell_r = static_cast<double>(image_rows) / grid_points;
    const double cell_c = static_cast<double>(image_cols) / grid_points;
    int gr = static_cast<int>(std::floor(row / cell_r));
    int gc = static_cast<int>(std::floor(col / cell_c));
    gr = std::max(0, std::min(grid_points - 1, gr));
    gc = std::max(0, std::min(grid_points - 1, gc));
    return gr * grid_points + gc;
  }

  // Kernel for the pixel at (row, col) under the field's interpolation rule.
  Psf kernel_at(double row, double col) const {
    if (interp == KernelInterp::nearest || grid_points == 1)
      return kernels[static_cast<std::size_t>(nearest_anchor(row, col))];
    const double cell_r = static_cast<double>(image_rows) / grid_points;
    const double cell_c = static_cast<double>(image_cols) / grid_points;
    // Lattice coordinates under the same pixel-center convention as the
    // anchors, so a pixel sitting on an anchor gets exactly that kernel.
    double gr = (row + 0.5) / cell_r - 0.5;
    double gc = (col + 0.5) / cell_c - 0.5;
    gr = std::max(0.0, std::min(static_cast<double>(grid_points - 1), gr));
    gc = std::max(0.0, std::min(static_cast<double>(grid_points - 1), gc));
    const int r0 = std::min(grid_points - 2, static_cast<int>(std::floor(gr)));
    const int c0 = std::min(grid_points - 2, static_cast<int>(std::floor(gc)));
    const double fr = gr - r0;
    const double fc = gc - c0;
    Psf out(kernel_size, kernel_size);
    const double w[4] = {(1 - fr) * (1 - fc), (1 - fr) * fc, fr * (1 - fc),
                         fr * fc};
    const int idx[4] = {r0 * grid_points + c0, r0 * grid_points + c0 + 1,
                        (r0 + 1) * grid_points + c0,
                        (r0 + 1) * grid_points + c0 + 1};
    for (int t = 0; t < 4; ++t) {
      const Psf& src = kernels[static_cast<std::size_t>(idx[t])];
      for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += w[t] * src.v[i];
    }
    return out;
  }
};

namespace detail {

// Phase at one image pixel assembled from the local coefficient vector;
// modes listed in `zeroed` are excluded.
inline std::vector<double> local_phase(const CoefficientField& coeffs,
                                       const ZernikeStack& stack, int row,
                                       int col, bool zero_tilt) {
  const int m = std::min(coeffs.modes, stack.modes);
  std::vector<double> a(static_cast<std::size_t>(stack.modes), 0.0);
  for (int k = 1; k <= m; ++k) {
    if (zero_tilt && (k == 2 || k == 3)) continue;
    a[static_cast<std::size_t>(k - 1)] = coeffs.at(k, row, col);
  }
  return assemble_phase(stack, a);
}

}  // namespace detail

namespace detail {

inline PsfField build_field_impl(const CoefficientField& coeffs,
                                 const PupilGrid& grid,
                                 const ZernikeStack& stack, int grid_points,
                                 int kernel_size, int pad, KernelInterp interp,
                                 bool zero_tilt) {
  if (kernel_size < 1 || kernel_size % 2 == 0)
    throw std::invalid_argument("kernel size must be odd and positive");
  if (pad < 2) throw std::invalid_argument("pad factor must be >= 2");
  const int q = pad * grid.resolution;
  if (kernel_size > q)
    throw std::invalid_argument("kernel size exceeds padded transform");

  PsfField field;
  field.grid_points = grid_points;
  field.image_rows = coeffs.rows;
  field.image_cols = coeffs.cols;
  field.kernel_size = kernel_size;
  field.interp = interp;
  field.anchors = make_anchor_lattice(coeffs.rows, coeffs.cols, grid_points);
  field.kernels.reserve(field.anchors.size());

  Fft2D fft(q);
  for (const Vec2& a : field.anchors) {
    const int row = std::max(
        0, std::min(coeffs.rows - 1, static_cast<int>(std::lround(a.y))));
    const int col = std::max(
        0, std::min(coeffs.cols - 1, static_cast<int>(std::lround(a.x))));
    const auto phase = local_phase(coeffs, stack, row, col, zero_tilt);
    field.kernels.push_back(synthesize_with(fft, phase, grid, kernel_size));
  }
  return field;
}

}  // namespace detail

// Tilt-free blur kernels sampled at the anchor lattice: the local coefficient
// vector is read at the rounded anchor pixel with modes {2,3} zeroed.
inline PsfField build_psf_field(const CoefficientField& coeffs,
                                const PupilGrid& grid,
                                const ZernikeStack& stack, int grid_points,
                                int kernel_size, int pad,
                                KernelInterp interp = KernelInterp::nearest) {
  return detail::build_field_impl(coeffs, grid, stack, grid_points,
                                  kernel_size, pad, interp, true);
}

// Same lattice but with every mode kept, tilt included: the kernel itself
// carries the local displacement.
inline PsfField build_full_psf_field(const CoefficientField& coeffs,
                                     const PupilGrid& grid,
                                     const ZernikeStack& stack, int grid_points,
                                     int kernel_size, int pad,
                                     KernelInterp interp = KernelInterp::nearest) {
  return detail::build_field_impl(coeffs, grid, stack, grid_points,
                                  kernel_size, pad, interp, false);
}

namespace detail {

// Signed x displacement of the pattern peak on the full transform grid:
// peak bin (unwrapped) plus the local centroid in a window centered on the
// peak. Centering the window makes tail clipping symmetric, so the estimate
// is free of the crop bias a fixed window would add.
inline double peak_displacement_x(Fft2D& fft, const std::vector<double>& phase,
                                  const PupilGrid& grid, int half_window) {
  const int p = grid.resolution;
  const int q = fft.size();
  std::vector<std::complex<double>> field(static_cast<std::size_t>(q) * q,
                                          {0.0, 0.0});
  constexpr double two_pi = 6.283185307179586476925286766559;
  for (int r = 0; r < p; ++r)
    for (int c = 0; c < p; ++c)
      if (grid.inside(r, c)) {
        const double ang = -two_pi * phase[static_cast<std::size_t>(r) * p + c];
        field[static_cast<std::size_t>(r) * q + c] = {std::cos(ang),
                                                      std::sin(ang)};
      }
  const auto spectrum = fft.forward(field);

  int peak_r = 0, peak_c = 0;
  double peak_v = -1.0;
  for (int r = 0; r < q; ++r)
    for (int c = 0; c < q; ++c) {
      const double v = std::norm(spectrum[static_cast<std::size_t>(r) * q + c]);
      if (v > peak_v) {
        peak_v = v;
        peak_r = r;
        peak_c = c;
      }
    }

  double sum = 0.0, moment = 0.0;
  for (int dr = -half_window; dr <= half_window; ++dr)
    for (int dc = -half_window; dc <= half_window; ++dc) {
      const int kr = ((peak_r + dr) % q + q) % q;
      const int kc = ((peak_c + dc) % q + q) % q;
      const double v = std::norm(spectrum[static_cast<std::size_t>(kr) * q + kc]);
      sum += v;
      moment += v * dc;
    }
  const int signed_col = peak_c > q / 2 ? peak_c - q : peak_c;
  return signed_col + moment / sum;
}

}  // namespace detail

// Pixel displacement per unit coefficient on mode 2, measured from the
// displacement of synthesized pure-tilt patterns. Signed; the same magnitude
// applies to mode 3 by symmetry.
inline double calibrate_tilt_gain(const PupilGrid& grid,
                                  const ZernikeStack& stack, int pad) {
  const int q = pad * grid.resolution;
  const double a_probe = 0.5 / pad;
  const int half_window = std::min(q / 4, 8 * pad);
  std::vector<double> coeffs(static_cast<std::size_t>(stack.modes), 0.0);

  Fft2D fft(q);
  coeffs[1] = a_probe;
  const double plus = detail::peak_displacement_x(
      fft, assemble_phase(stack, coeffs), grid, half_window);
  coeffs[1] = -a_probe;
  const double minus = detail::peak_displacement_x(
      fft, assemble_phase(stack, coeffs), grid, half_window);
  return (plus - minus) / (2.0 * a_probe);
}

}  // namespace turbforward
