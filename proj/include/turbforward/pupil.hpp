#pragma once
// Discretized circular aperture. The pupil is sampled on a P x P grid of
// normalized phase coordinates rho in [-1,1]^2 with a half-sample-centered
// convention: rho(i) = (i - (P-1)/2) / (P/2), so the grid is exactly
// symmetric about the disk center and no sample sits on the axis itself.

#include <vector>

#include "turbforward/core.hpp"

namespace turbforward {

struct PupilGrid {
  int resolution = 0;                 // samples per side, even
  std::vector<uint8_t> mask;          // P*P, true inside the unit disk
  std::vector<double> rho_x;          // P*P, normalized x coordinate
  std::vector<double> rho_y;          // P*P, normalized y coordinate
  std::vector<int> disk;              // flat indices of in-disk samples
  int disk_count = 0;

  bool inside(int r, int c) const { return mask[static_cast<size_t>(r) * resolution + c] != 0; }
};

inline PupilGrid build_pupil(int resolution) {
  if (resolution < 32) throw std::invalid_argument("build_pupil: resolution must be >= 32");
  if (resolution % 2 != 0) throw std::invalid_argument("build_pupil: resolution must be even");

  PupilGrid g;
  const int p = resolution;
  g.resolution = p;
  g.mask.assign(static_cast<size_t>(p) * p, 0);
  g.rho_x.assign(static_cast<size_t>(p) * p, 0.0);
  g.rho_y.assign(static_cast<size_t>(p) * p, 0.0);

  const double center = 0.5 * (p - 1);
  const double radius = 0.5 * p;
  for (int r = 0; r < p; ++r) {
    const double ry = (r - center) / radius;
    for (int c = 0; c < p; ++c) {
      const double rx = (c - center) / radius;
      const size_t i = static_cast<size_t>(r) * p + c;
      g.rho_x[i] = rx;
      g.rho_y[i] = ry;
      if (rx * rx + ry * ry <= 1.0) {
        g.mask[i] = 1;
        g.disk.push_back(static_cast<int>(i));
      }
    }
  }
  g.disk_count = static_cast<int>(g.disk.size());
  return g;
}

}  // namespace turbforward
