#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "turbforward/pupil.hpp"
#include "turbforward/rng.hpp"
#include "turbforward/zernike.hpp"

namespace tf = turbforward;

namespace {

// Mean of Z_i * Z_j over the disk samples; the basis is unit-RMS over the
// disk, so this should approximate delta_ij.
double disk_inner(const tf::PupilGrid& grid, const tf::ZernikeStack& stack,
                  int i, int j) {
  const double* zi = stack.plane(i);
  const double* zj = stack.plane(j);
  double acc = 0.0;
  for (int idx : grid.disk) acc += zi[idx] * zj[idx];
  return acc / grid.disk_count;
}

double max_orthonormality_error(int resolution, int modes) {
  const tf::PupilGrid grid = tf::build_pupil(resolution);
  const tf::ZernikeStack stack = tf::build_zernike_stack(grid, modes);
  double worst = 0.0;
  for (int i = 1; i <= modes; ++i)
    for (int j = i; j <= modes; ++j) {
      const double expect = i == j ? 1.0 : 0.0;
      worst = std::max(worst, std::abs(disk_inner(grid, stack, i, j) - expect));
    }
  return worst;
}

}  // namespace

TEST(Pupil, DiskAreaMatchesCircle) {
  const tf::PupilGrid grid = tf::build_pupil(32);
  EXPECT_NEAR(grid.disk_count, 804, 16);
}

TEST(Pupil, RejectsTooSmallOrOddResolution) {
  EXPECT_THROW(tf::build_pupil(4), std::invalid_argument);
  EXPECT_THROW(tf::build_pupil(33), std::invalid_argument);
}

TEST(Pupil, CenterInsideCornerOutside) {
  const tf::PupilGrid grid = tf::build_pupil(128);
  EXPECT_TRUE(grid.inside(64, 64));
  EXPECT_FALSE(grid.inside(0, 0));
  EXPECT_FALSE(grid.inside(127, 127));
}

TEST(Zernike, NollIndexMapping) {
  int n = -1, m = -1;
  tf::noll_to_nm(1, n, m);
  EXPECT_EQ(n, 0);
  EXPECT_EQ(m, 0);
  tf::noll_to_nm(2, n, m);
  EXPECT_EQ(n, 1);
  EXPECT_EQ(m, 1);
  tf::noll_to_nm(3, n, m);
  EXPECT_EQ(n, 1);
  EXPECT_EQ(m, -1);
  tf::noll_to_nm(4, n, m);
  EXPECT_EQ(n, 2);
  EXPECT_EQ(m, 0);
  tf::noll_to_nm(11, n, m);
  EXPECT_EQ(n, 4);
  EXPECT_EQ(m, 0);
}

TEST(Zernike, PistonPlaneConstant) {
  const tf::PupilGrid grid = tf::build_pupil(64);
  const tf::ZernikeStack stack = tf::build_zernike_stack(grid, 3);
  const double* z1 = stack.plane(1);
  for (int idx : grid.disk) EXPECT_DOUBLE_EQ(z1[idx], 1.0);
}

TEST(Zernike, TiltPairNearlyOrthogonal) {
  const tf::PupilGrid grid = tf::build_pupil(128);
  const tf::ZernikeStack stack = tf::build_zernike_stack(grid, 3);
  EXPECT_LT(std::abs(disk_inner(grid, stack, 2, 3)), 5e-3);
}

TEST(Zernike, DefocusValueAtOrigin) {
  EXPECT_NEAR(tf::zernike_eval(4, 0.0, 0.0), -std::sqrt(3.0), 1e-12);
}

TEST(Zernike, TiltValueOnAxis) {
  // Mode 2 is the unit-RMS cosine tilt 2*rho*cos(theta).
  EXPECT_NEAR(tf::zernike_eval(2, 0.5, 0.0), 1.0, 1e-12);
  EXPECT_NEAR(tf::zernike_eval(3, 0.0, 0.5), 1.0, 1e-12);
}

TEST(Zernike, OrthonormalityEnvelope) {
  EXPECT_LE(max_orthonormality_error(128, 36), 1.5e-2);
  EXPECT_LE(max_orthonormality_error(256, 36), 5e-3);
}

TEST(Projection, SingleModeRecovered) {
  const tf::PupilGrid grid = tf::build_pupil(128);
  const tf::ZernikeStack stack = tf::build_zernike_stack(grid, 6);
  std::vector<double> coeffs(6, 0.0);
  coeffs[1] = 2.5;  // mode 2
  const std::vector<double> phase = tf::assemble_phase(stack, coeffs);
  const std::vector<double> got =
      tf::project_onto_modes(phase, grid, stack, {2, 3, 4});
  EXPECT_NEAR(got[0], 2.5, 1e-3);
  EXPECT_LT(std::abs(got[1]), 1e-3);
  EXPECT_LT(std::abs(got[2]), 1e-3);
}

TEST(Projection, ZeroPhaseGivesZeroCoefficients) {
  const tf::PupilGrid grid = tf::build_pupil(64);
  const tf::ZernikeStack stack = tf::build_zernike_stack(grid, 6);
  const std::vector<double> phase(64 * 64, 0.0);
  for (double c : tf::project_onto_modes(phase, grid, stack, {2, 3, 4}))
    EXPECT_DOUBLE_EQ(c, 0.0);
}

TEST(Projection, SubsetSeesOnlyItsModes) {
  const tf::PupilGrid grid = tf::build_pupil(128);
  const tf::ZernikeStack stack = tf::build_zernike_stack(grid, 6);
  std::vector<double> coeffs(6, 0.0);
  coeffs[1] = 1.0;  // mode 2
  coeffs[4] = 1.0;  // mode 5
  const std::vector<double> phase = tf::assemble_phase(stack, coeffs);
  const std::vector<double> got =
      tf::project_onto_modes(phase, grid, stack, {2, 3});
  EXPECT_NEAR(got[0], 1.0, 1e-3);
  EXPECT_LT(std::abs(got[1]), 1e-3);
}

TEST(Projection, EmptyModeSetRejected) {
  const tf::PupilGrid grid = tf::build_pupil(64);
  const tf::ZernikeStack stack = tf::build_zernike_stack(grid, 3);
  const std::vector<double> phase(64 * 64, 0.0);
  EXPECT_THROW(tf::project_onto_modes(phase, grid, stack, {}),
               std::invalid_argument);
}

TEST(Projection, RoundTripAllModes) {
  const tf::PupilGrid grid = tf::build_pupil(128);
  const int modes = 36;
  const tf::ZernikeStack stack = tf::build_zernike_stack(grid, modes);
  std::mt19937_64 gen = tf::named_stream(7, "test/roundtrip");
  std::normal_distribution<double> dist(0.0, 0.3);
  std::vector<double> coeffs(modes);
  for (double& c : coeffs) c = dist(gen);
  const std::vector<double> phase = tf::assemble_phase(stack, coeffs);

  std::vector<int> all(modes);
  for (int j = 1; j <= modes; ++j) all[j - 1] = j;
  const std::vector<double> got =
      tf::project_onto_modes(phase, grid, stack, all);
  double worst = 0.0;
  for (int j = 0; j < modes; ++j)
    worst = std::max(worst, std::abs(got[j] - coeffs[j]));
  EXPECT_LT(worst, 1e-2);
}

