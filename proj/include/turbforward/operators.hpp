#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "turbforward/core.hpp"
#include "turbforward/psf.hpp"
#include "turbforward/turbulence.hpp"

namespace turbforward {

namespace detail {

// Deposit v at fractional position (row, col) onto the 2x2 neighborhood.
// The four tent weights partition unity, so interior deposits conserve mass;
// weight falling outside the frame is returned as loss.
inline double splat_bilinear(Image& img, double row, double col, double v) {
  const int r0 = static_cast<int>(std::floor(row));
  const int c0 = static_cast<int>(std::floor(col));
  const double fr = row - r0;
  const double fc = col - c0;
  double lost = 0.0;
  for (int dr = 0; dr <= 1; ++dr)
    for (int dc = 0; dc <= 1; ++dc) {
      const double w = (dr ? fr : 1.0 - fr) * (dc ? fc : 1.0 - fc);
      if (w == 0.0) continue;
      const int rr = r0 + dr, cc = c0 + dc;
      if (rr < 0 || rr >= img.rows || cc < 0 || cc >= img.cols)
        lost += w * v;
      else
        img.at(rr, cc) += w * v;
    }
  return lost;
}

}  // namespace detail

// Forward-scatter warp: every source pixel is deposited at its displaced
// location; collisions add. Out-of-frame mass is dropped and reported.
inline Image apply_tilt(const Image& image, const TiltField& tilts,
                        double* mass_lost = nullptr) {
  if (tilts.rows != image.rows || tilts.cols != image.cols)
    throw std::invalid_argument("tilt field size mismatch");
  Image out(image.rows, image.cols);
  double lost = 0.0;
  for (int r = 0; r < image.rows; ++r)
    for (int c = 0; c < image.cols; ++c) {
      const double v = image.at(r, c);
      if (v == 0.0) continue;
      const Vec2 t = tilts.at(r, c);
      lost += detail::splat_bilinear(out, r + t.y, c + t.x, v);
    }
  if (mass_lost) *mass_lost = lost;
  return out;
}

// Spatially varying convolution, destination-anchored: output pixel x sums
// h_x over in-frame sources, zero padding outside. Boundary rows therefore
// sum to less than one, matching the dense-matrix convention.
inline Image apply_blur(const Image& image, const PsfField& field) {
  if (field.image_rows != image.rows || field.image_cols != image.cols)
    throw std::invalid_argument("kernel field size mismatch");
  Image out(image.rows, image.cols);
  const int half = (field.kernel_size - 1) / 2;
  const bool nearest =
      field.interp == KernelInterp::nearest || field.grid_points == 1;
  Psf blended(1, 1);
  for (int r = 0; r < image.rows; ++r)
    for (int c = 0; c < image.cols; ++c) {
      const Psf* k;
      if (nearest) {
        k = &field.kernels[static_cast<std::size_t>(
            field.nearest_anchor(r, c))];
      } else {
        blended = field.kernel_at(r, c);
        k = &blended;
      }
      double acc = 0.0;
      const int rlo = std::max(-half, r - (image.rows - 1));
      const int rhi = std::min(half, r);
      const int clo = std::max(-half, c - (image.cols - 1));
      const int chi = std::min(half, c);
      for (int dr = rlo; dr <= rhi; ++dr)
        for (int dc = clo; dc <= chi; ++dc)
          acc += k->at(dr + half, dc + half) * image.at(r - dr, c - dc);
      out.at(r, c) = acc;
    }
  return out;
}

// Blur first, then relocate the blurred pixels: the composition that
// destroys blur shape under a dense tilt field.
inline Image blur_then_tilt(const Image& image, const TiltField& tilts,
                            const PsfField& field,
                            double* mass_lost = nullptr) {
  return apply_tilt(apply_blur(image, field), tilts, mass_lost);
}

// Relocate first, then blur at the new location, evaluated directly as a
// per-source scatter: source u deposits its kernel centered at u + t_u, so
// the blur shape rides along with the relocation. The kernel is the one
// anchored at the source. Fractional displacements spread each kernel tap
// over its 2x2 neighborhood; integer displacements place taps exactly.
inline Image tilt_then_blur(const Image& image, const TiltField& tilts,
                            const PsfField& field) {
  if (tilts.rows != image.rows || tilts.cols != image.cols)
    throw std::invalid_argument("tilt field size mismatch");
  if (field.image_rows != image.rows || field.image_cols != image.cols)
    throw std::invalid_argument("kernel field size mismatch");
  Image out(image.rows, image.cols);
  const int half = (field.kernel_size - 1) / 2;
  const bool nearest =
      field.interp == KernelInterp::nearest || field.grid_points == 1;
  Psf blended(1, 1);
  for (int r = 0; r < image.rows; ++r)
    for (int c = 0; c < image.cols; ++c) {
      const double v = image.at(r, c);
      if (v == 0.0) continue;
      const Vec2 t = tilts.at(r, c);
      const Psf* k;
      if (nearest) {
        k = &field.kernels[static_cast<std::size_t>(
            field.nearest_anchor(r, c))];
      } else {
        blended = field.kernel_at(r, c);
        k = &blended;
      }
      const double cr = r + t.y;
      const double cc = c + t.x;
      // A pixel relocated off the frame is gone before the blur acts; this
      // mirrors the dense tilt matrix, whose column goes to zero in that case.
      if (cr < 0.0 || cr > image.rows - 1.0 || cc < 0.0 ||
          cc > image.cols - 1.0)
        continue;
      const int br = static_cast<int>(std::floor(cr));
      const int bc = static_cast<int>(std::floor(cc));
      const double fr = cr - br;
      const double fc = cc - bc;
      if (fr == 0.0 && fc == 0.0) {
        for (int dr = -half; dr <= half; ++dr) {
          const int rr = br + dr;
          if (rr < 0 || rr >= out.rows) continue;
          for (int dc = -half; dc <= half; ++dc) {
            const int ccc = bc + dc;
            if (ccc < 0 || ccc >= out.cols) continue;
            out.at(rr, ccc) += v * k->at(dr + half, dc + half);
          }
        }
      } else {
        const double w00 = (1 - fr) * (1 - fc), w01 = (1 - fr) * fc;
        const double w10 = fr * (1 - fc), w11 = fr * fc;
        for (int dr = -half; dr <= half; ++dr)
          for (int dc = -half; dc <= half; ++dc) {
            const double tap = v * k->at(dr + half, dc + half);
            if (tap == 0.0) continue;
            const int rr = br + dr, ccc = bc + dc;
            if (rr >= 0 && rr < out.rows) {
              if (ccc >= 0 && ccc < out.cols) out.at(rr, ccc) += w00 * tap;
              if (ccc + 1 >= 0 && ccc + 1 < out.cols)
                out.at(rr, ccc + 1) += w01 * tap;
            }
            if (rr + 1 >= 0 && rr + 1 < out.rows) {
              if (ccc >= 0 && ccc < out.cols) out.at(rr + 1, ccc) += w10 * tap;
              if (ccc + 1 >= 0 && ccc + 1 < out.cols)
                out.at(rr + 1, ccc + 1) += w11 * tap;
            }
          }
      }
    }
  return out;
}

// The all-modes model: each source deposits its full local kernel, tilt
// included, centered at the source itself; the displacement lives inside
// the kernel.
inline Image scatter_full_kernels(const Image& image, const PsfField& field) {
  if (field.image_rows != image.rows || field.image_cols != image.cols)
    throw std::invalid_argument("kernel field size mismatch");
  Image out(image.rows, image.cols);
  const int half = (field.kernel_size - 1) / 2;
  const bool nearest =
      field.interp == KernelInterp::nearest || field.grid_points == 1;
  Psf blended(1, 1);
  for (int r = 0; r < image.rows; ++r)
    for (int c = 0; c < image.cols; ++c) {
      const double v = image.at(r, c);
      if (v == 0.0) continue;
      const Psf* k;
      if (nearest) {
        k = &field.kernels[static_cast<std::size_t>(
            field.nearest_anchor(r, c))];
      } else {
        blended = field.kernel_at(r, c);
        k = &blended;
      }
      const int rlo = std::max(-half, -r);
      const int rhi = std::min(half, out.rows - 1 - r);
      const int clo = std::max(-half, -c);
      const int chi = std::min(half, out.cols - 1 - c);
      for (int dr = rlo; dr <= rhi; ++dr)
        for (int dc = clo; dc <= chi; ++dc)
          out.at(r + dr, c + dc) += v * k->at(dr + half, dc + half);
    }
  return out;
}

inline Image full_model(const Image& image, const CoefficientField& coeffs,
                        const PupilGrid& grid, const ZernikeStack& stack,
                        int grid_points, int kernel_size, int pad,
                        KernelInterp interp = KernelInterp::nearest) {
  const PsfField field = build_full_psf_field(coeffs, grid, stack, grid_points,
                                              kernel_size, pad, interp);
  return scatter_full_kernels(image, field);
}

}  // namespace turbforward
