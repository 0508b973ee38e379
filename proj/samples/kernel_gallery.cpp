// Synthesizes a few point-spread kernels and writes scaled previews:
// the diffraction-limited core, a tilted copy, and an aberrated one.

#include <cstdio>
#include <filesystem>
#include <random>
#include <vector>

#include "turbforward/image_io.hpp"
#include "turbforward/psf.hpp"
#include "turbforward/pupil.hpp"
#include "turbforward/rng.hpp"
#include "turbforward/zernike.hpp"

namespace tf = turbforward;

namespace {

void save(const std::string& dir, const std::string& name,
          const tf::Psf& k) {
  tf::Image img(k.rows, k.cols);
  img.v = k.v;
  tf::write_image_pgm_preview(dir + "/" + name + ".pgm", img);
  const tf::Vec2 c = tf::centroid(k);
  std::printf("%-14s centroid (%+.3f, %+.3f) px\n", name.c_str(), c.x, c.y);
}

}  // namespace

int main() {
  const std::string dir = "kernel_gallery_out";
  std::filesystem::create_directories(dir);

  const tf::PupilGrid grid = tf::build_pupil(128);
  const tf::ZernikeStack stack = tf::build_zernike_stack(grid, 36);
  const int kernel_size = 65;
  const int pad = 4;

  std::vector<double> coeffs(36, 0.0);
  save(dir, "diffraction", tf::synthesize_psf(tf::assemble_phase(stack, coeffs),
                                              grid, kernel_size, pad));

  // One wave of the first tilt mode: a pure translation of the pattern.
  coeffs[1] = 1.0;
  save(dir, "tilted", tf::synthesize_psf(tf::assemble_phase(stack, coeffs),
                                         grid, kernel_size, pad));
  coeffs[1] = 0.0;

  std::mt19937_64 gen = tf::named_stream(0, "samples/gallery");
  std::normal_distribution<double> dist(0.0, 0.05);
  for (int m = 4; m <= 36; ++m) coeffs[m - 1] = dist(gen);
  save(dir, "aberrated", tf::synthesize_psf(tf::assemble_phase(stack, coeffs),
                                            grid, kernel_size, pad));

  std::printf("previews written to %s/\n", dir.c_str());
  return 0;
}
