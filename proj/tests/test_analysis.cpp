#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "turbforward/analysis.hpp"
#include "turbforward/operators.hpp"
#include "turbforward/psf.hpp"
#include "turbforward/rng.hpp"
#include "turbforward/turbulence.hpp"

namespace tf = turbforward;

namespace {

struct AnalysisFixture : ::testing::Test {
  tf::PupilGrid grid = tf::build_pupil(128);
  tf::ZernikeStack stack = tf::build_zernike_stack(grid, 36);

  tf::PsfField invariant_field(int rows, int cols, int kernel_size) const {
    tf::PsfField f;
    f.grid_points = 1;
    f.image_rows = rows;
    f.image_cols = cols;
    f.kernel_size = kernel_size;
    f.anchors = tf::make_anchor_lattice(rows, cols, 1);
    f.kernels = {tf::synthesize_psf(std::vector<double>(grid.mask.size(), 0.0),
                                    grid, kernel_size, 4)};
    return f;
  }
};

tf::Image random_image(int rows, int cols, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  tf::Image img(rows, cols);
  for (double& v : img.v) v = dist(gen);
  return img;
}

double l2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST_F(AnalysisFixture, PsnrUsesDataRangeAndChecksSizes) {
  tf::Image a(8, 8), b(8, 8);
  for (std::size_t i = 0; i < a.v.size(); ++i) a.v[i] = 0.5;
  b.v = a.v;
  EXPECT_GT(tf::psnr_data_range(a, b), 100.0);

  b.at(3, 3) = 0.6;
  const double p = tf::psnr_data_range(a, b);
  EXPECT_GT(p, 0.0);
  EXPECT_LT(p, 100.0);

  tf::Image c(8, 7);
  EXPECT_THROW(tf::psnr_data_range(a, c), std::invalid_argument);
}

TEST_F(AnalysisFixture, ZeroTiltGivesIdenticallyZeroDifference) {
  std::mt19937_64 gen = tf::named_stream(1, "test/analysis");
  tf::Image img = random_image(48, 48, gen);
  tf::TiltField tilts(48, 48);
  tf::PsfField field = invariant_field(48, 48, 9);

  tf::DifferenceReport rep = tf::difference_report(img, tilts, field);
  EXPECT_EQ(rep.max_abs, 0.0);
  EXPECT_EQ(tf::max_abs(rep.first_order_map.v), 0.0);
  EXPECT_EQ(rep.residual_norm, 0.0);
}

TEST_F(AnalysisFixture, ConstantTiltGivesZeroDifference) {
  // Both orderings see the same fractional displacement everywhere, so the
  // evaluators produce identical taps in identical order.
  std::mt19937_64 gen = tf::named_stream(2, "test/analysis");
  tf::Image img = random_image(48, 48, gen);
  tf::TiltField tilts(48, 48);
  for (tf::Vec2& t : tilts.t) t = {1.3, -0.7};
  tf::PsfField field = invariant_field(48, 48, 9);

  tf::DifferenceReport rep = tf::difference_report(img, tilts, field);
  EXPECT_LE(rep.max_abs, 1e-12);
  EXPECT_EQ(tf::max_abs(rep.first_order_map.v), 0.0);
}

TEST_F(AnalysisFixture, FlatImageGivesZeroDifference) {
  tf::Image img(40, 40);
  for (double& v : img.v) v = 0.37;
  std::mt19937_64 gen = tf::named_stream(3, "test/analysis");
  std::uniform_real_distribution<double> tdist(-2.0, 2.0);
  tf::TiltField tilts(40, 40);
  for (tf::Vec2& t : tilts.t) t = {tdist(gen), tdist(gen)};
  tf::PsfField field = invariant_field(40, 40, 9);

  tf::DifferenceReport rep = tf::difference_report(img, tilts, field);
  EXPECT_LE(rep.max_abs, 1e-9);
  EXPECT_EQ(tf::max_abs(rep.first_order_map.v), 0.0);
}

TEST_F(AnalysisFixture, SwappingOrderNegatesFirstOrderMapExactly) {
  std::mt19937_64 gen = tf::named_stream(4, "test/analysis");
  tf::Image img = random_image(32, 32, gen);
  std::uniform_real_distribution<double> tdist(-1.5, 1.5);
  tf::TiltField tilts(32, 32);
  for (tf::Vec2& t : tilts.t) t = {tdist(gen), tdist(gen)};
  tf::PsfField field = invariant_field(32, 32, 7);

  tf::Image fwd = tf::difference_first_order(img, tilts, field.kernels[0]);
  tf::Image swp =
      tf::difference_first_order(img, tilts, field.kernels[0], true);
  for (std::size_t i = 0; i < fwd.v.size(); ++i)
    EXPECT_EQ(swp.v[i], -fwd.v[i]);
}

TEST_F(AnalysisFixture, ResidualShrinksQuadraticallyWithTiltAmplitude) {
  const int n = 64;
  tf::Image img = tf::make_test_scene(n, n);
  tf::OpticsConfig oc;
  oc.rows = n;
  oc.cols = n;
  oc.modes = 3;
  oc.seed = 5;
  oc.r0_override = oc.aperture_diameter;
  tf::CoefficientField f = tf::sample_coefficient_field(
      oc, {tf::CorrelationModel::Kind::smoothed, 16.0});
  tf::PsfField field = invariant_field(n, n, 15);

  double residual[3], share[3];
  const double eps[3] = {1.0, 0.5, 0.25};
  for (int i = 0; i < 3; ++i) {
    tf::TiltField tilts = tf::tilt_field_from_coefficients(f, -16.0 * eps[i]);
    tf::DifferenceReport rep = tf::difference_report(img, tilts, field);
    residual[i] = rep.residual_norm;
    share[i] = rep.residual_norm / l2(rep.diff_map.v);
  }
  // Halving the amplitude divides the first-order mismatch by about four.
  EXPECT_GT(residual[1] / residual[2], 3.0);
  EXPECT_LT(residual[1] / residual[2], 4.5);
  // And the first-order map explains an ever larger part of the difference.
  EXPECT_LT(share[1], share[0]);
  EXPECT_LT(share[2], share[1]);
}

TEST_F(AnalysisFixture, DifferenceConcentratesWhereTheImageHasEdges) {
  const int n = 256;
  tf::Image img(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 128; c < n; ++c) img.at(r, c) = 1.0;

  tf::OpticsConfig oc;
  oc.rows = n;
  oc.cols = n;
  oc.modes = 3;
  oc.seed = 2;
  oc.r0_override = oc.aperture_diameter / 2.0;
  tf::CoefficientField f = tf::sample_coefficient_field(
      oc, {tf::CorrelationModel::Kind::smoothed, 32.0});
  tf::TiltField tilts = tf::tilt_field_from_coefficients(f, -16.0);
  tf::PsfField field = invariant_field(n, n, 33);

  tf::DifferenceReport rep = tf::difference_exact(img, tilts, field);
  double total = 0.0, band = 0.0;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      const double e = rep.diff_map.at(r, c) * rep.diff_map.at(r, c);
      total += e;
      if (std::abs(c - 128) <= 16) band += e;
    }
  EXPECT_GT(rep.max_abs, 0.01);
  EXPECT_GE(band / total, 0.80);
}

TEST_F(AnalysisFixture, VaryingKernelsRequireExplicitOptIn) {
  std::mt19937_64 gen = tf::named_stream(6, "test/analysis");
  tf::Image img = random_image(16, 16, gen);
  tf::TiltField tilts(16, 16);

  tf::PsfField field;
  field.grid_points = 2;
  field.image_rows = 16;
  field.image_cols = 16;
  field.kernel_size = 5;
  field.anchors = tf::make_anchor_lattice(16, 16, 2);
  std::uniform_real_distribution<double> dist(0.1, 1.0);
  for (int i = 0; i < 4; ++i) {
    tf::Kernel k(5, 5);
    for (double& v : k.v) v = dist(gen);
    k.normalize();
    field.kernels.push_back(k);
  }

  EXPECT_THROW(tf::difference_exact(img, tilts, field), std::invalid_argument);
  tf::DifferenceReport rep = tf::difference_exact(img, tilts, field, true);
  EXPECT_EQ(rep.max_abs, 0.0);
}

TEST(PointGridExperiment, SmallGridSeparatesTheTwoOrderings) {
  tf::PointGridSettings s;
  s.spots_per_side = 2;
  s.spacing = 64;
  tf::PointGridResult res = tf::point_source_grid_experiment(s);

  ASSERT_EQ(res.clean.rows, 128);
  ASSERT_EQ(res.clean.cols, 128);
  EXPECT_EQ(res.clipped_count, 0);
  EXPECT_GE(res.min_preserved, 0.999);
  EXPECT_LT(res.max_destroyed, 0.95);
  EXPECT_LT(res.worst_full_dev, 0.02);
  EXPECT_TRUE(res.preserved_ok);
  EXPECT_TRUE(res.destroyed_ok);

  double peak = 0.0, dmax = 0.0;
  for (std::size_t i = 0; i < res.blur_then_tilt_out.v.size(); ++i) {
    peak = std::max(peak, res.blur_then_tilt_out.v[i]);
    dmax = std::max(dmax, std::abs(res.blur_then_tilt_out.v[i] -
                                   res.tilt_then_blur_out.v[i]));
  }
  EXPECT_GT(dmax, 0.1 * peak);
}

TEST(NaturalExperiment, VanishingTurbulenceMakesOrderingsAgree) {
  tf::NaturalSettings s;
  s.optics.rows = 128;
  s.optics.cols = 128;
  s.optics.cn2 = 1e-30;
  tf::Image input = tf::make_test_scene(128, 128);
  tf::NaturalResult res = tf::natural_image_experiment(input, s);

  EXPECT_LT(res.d_over_r0, 1e-6);
  EXPECT_FALSE(res.strength_clamped);
  EXPECT_LE(res.report.max_abs, 1e-9);
  EXPECT_LE(tf::max_abs_diff(res.blur_then_tilt_out.v,
                             res.tilt_then_blur_out.v),
            1e-9);
  EXPECT_GT(res.psnr_orderings, 100.0);
  // Diffraction blur still reshapes the input even without turbulence.
  EXPECT_GT(tf::max_abs_diff(res.clean.v, res.tilt_then_blur_out.v), 0.1);
}

TEST(NaturalExperiment, ModerateTurbulenceKeepsOrderingsCloserThanBlur) {
  tf::NaturalSettings s;
  s.optics.rows = 128;
  s.optics.cols = 128;
  s.optics.seed = 1;
  s.optics.r0_override = s.optics.aperture_diameter / 10.0;
  tf::Image input = tf::make_test_scene(128, 128);
  tf::NaturalResult res = tf::natural_image_experiment(input, s);

  EXPECT_NEAR(res.d_over_r0, 10.0, 1e-9);
  EXPECT_FALSE(res.strength_clamped);
  EXPECT_TRUE(res.warning.empty());
  EXPECT_GT(res.psnr_orderings, res.psnr_clean_vs_correct);
  EXPECT_EQ(res.threshold_ok, res.psnr_orderings >= s.psnr_threshold);
}

TEST(NaturalExperiment, RejectsUndersizedInput) {
  tf::NaturalSettings s;
  s.optics.rows = 64;
  s.optics.cols = 64;
  tf::Image input = tf::make_test_scene(64, 64);
  EXPECT_THROW(tf::natural_image_experiment(input, s), std::invalid_argument);
}

TEST(FitPower, RecoversExactExponentAndRejectsBadInput) {
  std::vector<double> x = {1.0, 2.0, 4.0, 8.0};
  std::vector<double> y;
  for (double v : x) y.push_back(3.0 * std::pow(v, 2.37));
  EXPECT_NEAR(tf::fit_power(x, y), 2.37, 1e-12);

  EXPECT_THROW(tf::fit_power({1.0}, {1.0}), std::invalid_argument);
  EXPECT_THROW(tf::fit_power({1.0, -2.0}, {1.0, 1.0}), std::invalid_argument);
  EXPECT_THROW(tf::fit_power({1.0, 2.0}, {0.0, 1.0}), std::invalid_argument);
  EXPECT_THROW(tf::fit_power({2.0, 2.0}, {1.0, 3.0}), std::invalid_argument);
}

TEST(TestScene, DeterministicBoundedAndStructured) {
  tf::Image a = tf::make_test_scene(128, 96);
  tf::Image b = tf::make_test_scene(128, 96);
  EXPECT_EQ(a.v, b.v);

  double lo = 1e9, hi = -1e9;
  for (double v : a.v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  EXPECT_GE(lo, 0.0);
  EXPECT_LE(hi, 1.0);
  EXPECT_GT(hi - lo, 0.5);

  EXPECT_THROW(tf::make_test_scene(4, 128), std::invalid_argument);
}
