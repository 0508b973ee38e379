#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "turbforward/psf.hpp"
#include "turbforward/pupil.hpp"
#include "turbforward/rng.hpp"
#include "turbforward/turbulence.hpp"
#include "turbforward/zernike.hpp"

namespace tf = turbforward;

namespace {

struct PsfFixture : ::testing::Test {
  tf::PupilGrid grid = tf::build_pupil(128);
  tf::ZernikeStack stack = tf::build_zernike_stack(grid, 36);

  std::vector<double> phase_of(const std::vector<double>& coeffs) const {
    return tf::assemble_phase(stack, coeffs);
  }
  std::vector<double> zero_phase() const {
    return std::vector<double>(grid.mask.size(), 0.0);
  }
};

// Crop the central size x size window of a larger odd kernel.
tf::Kernel central_crop(const tf::Kernel& k, int size) {
  tf::Kernel out(size, size);
  const int off_r = k.center_row() - out.center_row();
  const int off_c = k.center_col() - out.center_col();
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c) out.at(r, c) = k.at(r + off_r, c + off_c);
  return out;
}

double max_abs_diff_k(const tf::Kernel& a, const tf::Kernel& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.v.size(); ++i)
    d = std::max(d, std::abs(a.v[i] - b.v[i]));
  return d;
}

}  // namespace

TEST_F(PsfFixture, FlatPhaseGivesCenteredNormalizedKernel) {
  tf::Psf k = tf::synthesize_psf(zero_phase(), grid, 33, 4);
  ASSERT_EQ(k.rows, 33);
  ASSERT_EQ(k.cols, 33);

  double sum = 0.0, best = -1.0;
  int best_r = -1, best_c = -1;
  for (int r = 0; r < 33; ++r)
    for (int c = 0; c < 33; ++c) {
      const double v = k.at(r, c);
      EXPECT_GE(v, 0.0);
      sum += v;
      if (v > best) { best = v; best_r = r; best_c = c; }
    }
  EXPECT_NEAR(sum, 1.0, 1e-9);
  EXPECT_EQ(best_r, k.center_row());
  EXPECT_EQ(best_c, k.center_col());

  tf::Vec2 c = tf::centroid(k);
  EXPECT_NEAR(c.x, 0.0, 1e-6);
  EXPECT_NEAR(c.y, 0.0, 1e-6);
}

TEST_F(PsfFixture, RejectsBadKernelGeometry) {
  EXPECT_THROW(tf::synthesize_psf(zero_phase(), grid, 32, 4),
               std::invalid_argument);
  EXPECT_THROW(tf::synthesize_psf(zero_phase(), grid, -5, 4),
               std::invalid_argument);
  EXPECT_THROW(tf::synthesize_psf(zero_phase(), grid, 33, 1),
               std::invalid_argument);
  // Window larger than the padded transform (pad * resolution = 512).
  EXPECT_THROW(tf::synthesize_psf(zero_phase(), grid, 513, 4),
               std::invalid_argument);
}

TEST_F(PsfFixture, PistonLeavesKernelUnchanged) {
  std::vector<double> coeffs(36, 0.0);
  coeffs[0] = 0.7;
  tf::Psf with_piston = tf::synthesize_psf(phase_of(coeffs), grid, 33, 4);
  tf::Psf without = tf::synthesize_psf(zero_phase(), grid, 33, 4);
  EXPECT_LE(max_abs_diff_k(with_piston, without), 1e-13);
}

TEST_F(PsfFixture, TiltGainMatchesPaddingGeometry) {
  // One wave of the first tilt mode moves the pattern by -4 * pad pixels.
  EXPECT_NEAR(tf::calibrate_tilt_gain(grid, stack, 4), -16.0, 0.1);
  EXPECT_NEAR(tf::calibrate_tilt_gain(grid, stack, 8), -32.0, 0.1);
}

TEST_F(PsfFixture, CentroidDisplacementLinearInTiltCoefficient) {
  // Wide window so tail clipping does not bias the centroid.
  const int kWindow = 129;
  const double kappa = tf::calibrate_tilt_gain(grid, stack, 4);
  const double a2s[4] = {0.25, 0.5, 1.0, 2.0};
  double xs[4], ys[4];
  for (int i = 0; i < 4; ++i) {
    std::vector<double> coeffs(36, 0.0);
    coeffs[1] = a2s[i];
    tf::Psf k = tf::synthesize_psf(phase_of(coeffs), grid, kWindow, 4);
    tf::Vec2 c = tf::centroid(k);
    xs[i] = a2s[i];
    ys[i] = c.x;
    EXPECT_LE(std::abs(c.y), 0.05) << "a2=" << a2s[i];
  }

  // Unit coefficient lands within a tenth of a pixel of the calibrated gain.
  EXPECT_LE(std::abs(ys[2] - kappa * 1.0), 0.1);

  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (int i = 0; i < 4; ++i) {
    sx += xs[i]; sy += ys[i];
    sxx += xs[i] * xs[i]; sxy += xs[i] * ys[i]; syy += ys[i] * ys[i];
  }
  const double n = 4.0;
  const double cov = sxy - sx * sy / n;
  const double vx = sxx - sx * sx / n;
  const double vy = syy - sy * sy / n;
  const double r2 = cov * cov / (vx * vy);
  EXPECT_GT(r2, 0.999);
  EXPECT_LT(cov / vx, 0.0);  // displacement opposes the coefficient sign
}

TEST_F(PsfFixture, SplitRecoversPureTilt) {
  std::vector<double> coeffs(36, 0.0);
  coeffs[1] = 1.0;
  tf::TiltSplit sp = tf::split_tilt(phase_of(coeffs), grid, stack);
  EXPECT_NEAR(sp.tilt.x, 1.0, 1e-3);
  EXPECT_NEAR(sp.tilt.y, 0.0, 1e-3);
  EXPECT_LE(tf::max_abs(sp.residual), 1e-8);
}

TEST_F(PsfFixture, SplitLeavesHighOrderPhaseNearlyAlone) {
  std::mt19937_64 gen = tf::named_stream(3, "test/hi-order");
  std::normal_distribution<double> dist(0.0, 0.012);
  std::vector<double> coeffs(36, 0.0);
  for (int m = 4; m <= 36; ++m) coeffs[m - 1] = dist(gen);

  const std::vector<double> phase = phase_of(coeffs);
  tf::TiltSplit sp = tf::split_tilt(phase, grid, stack);
  // Leakage into the tilt pair comes only from discrete non-orthogonality.
  EXPECT_LE(std::abs(sp.tilt.x), 0.01);
  EXPECT_LE(std::abs(sp.tilt.y), 0.01);
  double dev = 0.0;
  for (std::size_t i = 0; i < phase.size(); ++i)
    dev = std::max(dev, std::abs(sp.residual[i] - phase[i]));
  EXPECT_LE(dev, 0.02);
}

TEST_F(PsfFixture, SplitIsIdempotent) {
  std::mt19937_64 gen = tf::named_stream(9, "test/idempotent");
  std::normal_distribution<double> dist(0.0, 0.1);
  std::vector<double> coeffs(36, 0.0);
  for (int m = 2; m <= 36; ++m) coeffs[m - 1] = dist(gen);

  tf::TiltSplit once = tf::split_tilt(phase_of(coeffs), grid, stack);
  tf::TiltSplit twice = tf::split_tilt(once.residual, grid, stack);
  EXPECT_LE(std::abs(twice.tilt.x), 1e-12);
  EXPECT_LE(std::abs(twice.tilt.y), 1e-12);
  double dev = 0.0;
  for (std::size_t i = 0; i < once.residual.size(); ++i)
    dev = std::max(dev, std::abs(twice.residual[i] - once.residual[i]));
  EXPECT_LE(dev, 1e-12);
}

TEST_F(PsfFixture, TiltRemovedKernelsStayCentered) {
  // Weak-turbulence regime: D/r0 = 0.3, eight independent draws.
  tf::OpticsConfig oc;
  oc.rows = 8;
  oc.cols = 1;
  oc.modes = 36;
  oc.seed = 0;
  oc.r0_override = oc.aperture_diameter / 0.3;
  tf::CorrelationModel corr{tf::CorrelationModel::Kind::independent, 0.0};
  tf::CoefficientField f = tf::sample_coefficient_field(oc, corr);

  double worst = 0.0;
  for (int r = 0; r < oc.rows; ++r) {
    std::vector<double> coeffs(36, 0.0);
    for (int m = 2; m <= 36; ++m) coeffs[m - 1] = f.at(m, r, 0);
    tf::TiltSplit sp = tf::split_tilt(phase_of(coeffs), grid, stack);
    tf::Vec2 c = tf::centroid(tf::synthesize_psf(sp.residual, grid, 33, 4));
    worst = std::max(worst, std::hypot(c.x, c.y));
  }
  EXPECT_LE(worst, 0.25);
}

TEST_F(PsfFixture, TiltCoefficientTranslatesKernel) {
  // Adding a2 * Z2 on top of a fixed high-order phase translates the kernel
  // by kappa * a2 pixels. The reference is synthesized on a wider window,
  // translated, then cropped, so no content enters from outside the frame.
  const int pad = 8;
  const int kWindow = 65;
  const double kappa = tf::calibrate_tilt_gain(grid, stack, pad);

  std::mt19937_64 gen = tf::named_stream(5, "test/shift");
  std::normal_distribution<double> dist(0.0, 0.0704);
  std::vector<double> hi(36, 0.0);
  for (int m = 4; m <= 36; ++m) hi[m - 1] = dist(gen);

  for (double shift : {2.0, 5.0, 8.0, 2.5, 3.25, 12.5}) {
    const int margin = 2 * static_cast<int>(std::ceil(shift));
    tf::Psf base = tf::synthesize_psf(phase_of(hi), grid,
                                      kWindow + 2 * margin, pad);
    std::vector<double> moved_coeffs = hi;
    moved_coeffs[1] = shift / kappa;
    tf::Psf moved = tf::synthesize_psf(phase_of(moved_coeffs), grid,
                                       kWindow, pad);

    tf::Kernel ref = central_crop(tf::translate_kernel(base, {shift, 0.0}),
                                  kWindow);
    ref.normalize();

    double peak = 0.0;
    for (double v : moved.v) peak = std::max(peak, v);
    EXPECT_LE(max_abs_diff_k(moved, ref), 0.02 * peak) << "shift=" << shift;
  }
}

TEST_F(PsfFixture, AnchorLatticeCoversImage) {
  const std::vector<tf::Vec2> single = tf::make_anchor_lattice(256, 256, 1);
  ASSERT_EQ(single.size(), 1u);
  EXPECT_DOUBLE_EQ(single[0].x, 127.5);
  EXPECT_DOUBLE_EQ(single[0].y, 127.5);

  const std::vector<tf::Vec2> l = tf::make_anchor_lattice(256, 256, 4);
  ASSERT_EQ(l.size(), 16u);
  const double half_cell = 256.0 / 4.0 / 2.0;
  EXPECT_LE(l.front().x, half_cell);
  EXPECT_LE(l.front().y, half_cell);
  EXPECT_GE(l.back().x, 255.0 - half_cell);
  EXPECT_GE(l.back().y, 255.0 - half_cell);

  EXPECT_THROW(tf::make_anchor_lattice(16, 16, 0), std::invalid_argument);
}

TEST_F(PsfFixture, ZeroCoefficientFieldGivesUniformKernels) {
  tf::CoefficientField f;
  f.rows = 16;
  f.cols = 16;
  f.modes = 36;
  f.values.assign(static_cast<std::size_t>(36) * 16 * 16, 0.0);

  tf::PsfField field = tf::build_psf_field(f, grid, stack, 2, 33, 4);
  ASSERT_EQ(field.kernels.size(), 4u);
  tf::Psf flat = tf::synthesize_psf(zero_phase(), grid, 33, 4);
  for (const tf::Psf& k : field.kernels)
    EXPECT_LE(max_abs_diff_k(k, flat), 1e-12);
}

TEST_F(PsfFixture, FieldKernelsRespondToLocalCoefficients) {
  tf::OpticsConfig oc;
  oc.rows = 16;
  oc.cols = 16;
  oc.modes = 36;
  oc.seed = 4;
  oc.r0_override = oc.aperture_diameter / 2.0;
  tf::CorrelationModel corr{tf::CorrelationModel::Kind::independent, 0.0};
  tf::CoefficientField f = tf::sample_coefficient_field(oc, corr);

  tf::PsfField field = tf::build_psf_field(f, grid, stack, 2, 33, 4);
  ASSERT_EQ(field.kernels.size(), 4u);

  // Every kernel is a unit-mass nonnegative blur.
  for (const tf::Psf& k : field.kernels) {
    double sum = 0.0;
    for (double v : k.v) {
      EXPECT_GE(v, 0.0);
      sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }

  // Independent draws at different anchors give visibly different kernels.
  double spread = 0.0;
  for (std::size_t i = 1; i < field.kernels.size(); ++i)
    spread = std::max(spread, max_abs_diff_k(field.kernels[0],
                                             field.kernels[i]));
  EXPECT_GT(spread, 1e-6);

  // At an anchor, both assignment rules return that anchor's kernel.
  for (std::size_t i = 0; i < field.anchors.size(); ++i) {
    tf::Psf nearest = field.kernel_at(field.anchors[i].y, field.anchors[i].x);
    EXPECT_LE(max_abs_diff_k(nearest, field.kernels[i]), 1e-15);
  }
  tf::PsfField blended = tf::build_psf_field(f, grid, stack, 2, 33, 4,
                                             tf::KernelInterp::bilinear);
  for (std::size_t i = 0; i < blended.anchors.size(); ++i) {
    tf::Psf at = blended.kernel_at(blended.anchors[i].y, blended.anchors[i].x);
    EXPECT_LE(max_abs_diff_k(at, blended.kernels[i]), 1e-15);
  }
}

TEST_F(PsfFixture, FullFieldKeepsTiltWhileBlurFieldDropsIt) {
  tf::CoefficientField f;
  f.rows = 8;
  f.cols = 8;
  f.modes = 36;
  f.values.assign(static_cast<std::size_t>(36) * 8 * 8, 0.0);
  // Uniform one-wave tilt everywhere, nothing else.
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 8; ++c) f.at(2, r, c) = 1.0;

  // Wide window: at 65 the clipped tails bias the centroid by ~0.2 px.
  tf::PsfField blur_only = tf::build_psf_field(f, grid, stack, 1, 129, 4);
  tf::PsfField full = tf::build_full_psf_field(f, grid, stack, 1, 129, 4);
  ASSERT_EQ(blur_only.kernels.size(), 1u);
  ASSERT_EQ(full.kernels.size(), 1u);

  const double kappa = tf::calibrate_tilt_gain(grid, stack, 4);
  tf::Vec2 c_blur = tf::centroid(blur_only.kernels[0]);
  tf::Vec2 c_full = tf::centroid(full.kernels[0]);
  EXPECT_NEAR(c_blur.x, 0.0, 1e-6);
  EXPECT_NEAR(c_blur.y, 0.0, 1e-6);
  EXPECT_NEAR(c_full.x, kappa, 0.1);
  EXPECT_NEAR(c_full.y, 0.0, 0.05);
}
