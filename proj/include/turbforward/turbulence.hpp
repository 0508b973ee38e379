#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "turbforward/core.hpp"
#include "turbforward/rng.hpp"
#include "turbforward/zernike.hpp"

namespace turbforward {

struct OpticsConfig {
  double aperture_diameter = 0.2034;  // meters
  double wavelength = 0.525e-6;       // meters
  double path_length = 7000.0;        // meters
  double cn2 = 5e-6;                  // m^(-2/3)
  double focal_length = 1.2;          // meters
  int rows = 256;
  int cols = 256;
  int modes = 36;
  std::uint64_t seed = 0;
  double r0_override = 0.0;  // > 0 bypasses the Fried formula
  double dr0_cap = 50.0;     // clamp on D/r0; hitting it raises a warning
};

inline void validate(const OpticsConfig& c) {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0))
      throw std::invalid_argument(std::string(name) + " must be positive");
  };
  positive(c.aperture_diameter, "aperture_diameter");
  positive(c.wavelength, "wavelength");
  positive(c.path_length, "path_length");
  positive(c.cn2, "cn2");
  positive(c.focal_length, "focal_length");
  positive(c.dr0_cap, "dr0_cap");
  if (c.r0_override < 0.0)
    throw std::invalid_argument("r0_override must be zero or positive");
  if (c.rows < 1 || c.cols < 1)
    throw std::invalid_argument("image size must be positive");
  if (c.modes < 3) throw std::invalid_argument("mode count must be >= 3");
}

// Plane-wave Fried parameter for constant cn2 along the path.
inline double fried_r0(double wavelength, double cn2, double path_length) {
  const double k = 2.0 * 3.14159265358979323846 / wavelength;
  return std::pow(0.423 * k * k * cn2 * path_length, -3.0 / 5.0);
}

struct TurbulenceStrength {
  double d_over_r0 = 0.0;  // after the cap
  double raw = 0.0;        // before the cap
  bool clamped = false;
};

inline TurbulenceStrength turbulence_strength(const OpticsConfig& c) {
  const double r0 = c.r0_override > 0.0
                        ? c.r0_override
                        : fried_r0(c.wavelength, c.cn2, c.path_length);
  TurbulenceStrength s;
  s.raw = c.aperture_diameter / r0;
  s.clamped = s.raw > c.dr0_cap;
  s.d_over_r0 = s.clamped ? c.dr0_cap : s.raw;
  return s;
}

// Kolmogorov single-mode coefficient variance in rad^2 per unit
// (D/r0)^(5/3). Piston carries no optical effect and gets zero.
inline double kolmogorov_mode_variance_rad2(int mode) {
  if (mode < 2) return 0.0;
  int n = 0, m = 0;
  noll_to_nm(mode, n, m);
  static const double kk =
      std::pow(4.8 * std::tgamma(6.0 / 5.0), 5.0 / 6.0) *
      std::tgamma(14.0 / 3.0) * std::tgamma(11.0 / 6.0) *
      std::tgamma(11.0 / 6.0) / (std::pow(2.0, 8.0 / 3.0) * 3.14159265358979323846);
  const double g = std::lgamma(n - 5.0 / 6.0) - 2.0 * std::lgamma(17.0 / 6.0) -
                   std::lgamma(n + 23.0 / 6.0);
  return kk * (n + 1.0) * std::exp(g);
}

// Default per-mode variance profile in waves^2 per unit (D/r0)^(5/3);
// decays with radial order. Phase enters the pupil as exp(-j 2 pi phi),
// so waves^2 = rad^2 / (2 pi)^2.
inline std::vector<double> modal_variance_profile(int modes) {
  std::vector<double> p(static_cast<std::size_t>(modes), 0.0);
  constexpr double four_pi2 = 4.0 * 3.14159265358979323846 * 3.14159265358979323846;
  for (int m = 1; m <= modes; ++m)
    p[static_cast<std::size_t>(m - 1)] =
        kolmogorov_mode_variance_rad2(m) / four_pi2;
  return p;
}

// Plain-text override table: one "mode = variance" per line, '#' comments.
// Keys must be mode indices within the profile; anything else is rejected.
inline void apply_variance_table(std::vector<double>& profile,
                                 const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open variance table: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto eq = line.find('=');
    std::ostringstream where;
    where << path << ":" << lineno;
    if (eq == std::string::npos)
      throw std::runtime_error(where.str() + ": expected 'mode = variance'");
    std::istringstream key(line.substr(0, eq)), val(line.substr(eq + 1));
    int mode = 0;
    double variance = 0.0;
    std::string extra;
    if (!(key >> mode) || (key >> extra))
      throw std::runtime_error(where.str() + ": bad mode index");
    if (!(val >> variance) || (val >> extra))
      throw std::runtime_error(where.str() + ": bad variance value");
    if (mode < 1 || mode > static_cast<int>(profile.size()))
      throw std::runtime_error(where.str() + ": mode index out of range");
    if (variance < 0.0)
      throw std::runtime_error(where.str() + ": variance must be >= 0");
    profile[static_cast<std::size_t>(mode - 1)] = variance;
  }
}

struct CorrelationModel {
  enum class Kind { independent, smoothed };
  Kind kind = Kind::independent;
  double length_scale = 0.0;  // pixels; required positive for smoothed
};

// Per-pixel coefficient vectors, plane-major: values[(m-1)*rows*cols + ...].
struct CoefficientField {
  int rows = 0, cols = 0, modes = 0;
  std::vector<double> values;
  std::string covariance_descriptor;
  bool strength_clamped = false;
  std::string warning;

  double at(int mode, int r, int c) const {
    return values[plane_index(mode) + static_cast<std::size_t>(r) * cols + c];
  }
  double& at(int mode, int r, int c) {
    return values[plane_index(mode) + static_cast<std::size_t>(r) * cols + c];
  }

 private:
  std::size_t plane_index(int mode) const {
    return static_cast<std::size_t>(mode - 1) * rows * cols;
  }
};

namespace detail {

// Circular separable convolution with a normalized Gaussian, then rescale to
// restore the unit marginal variance. Wrap keeps the field stationary.
inline void smooth_plane_wrap(std::vector<double>& plane, int rows, int cols,
                              double sigma) {
  const int radius = static_cast<int>(std::ceil(4.0 * sigma));
  std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
  double tap_sum = 0.0;
  for (int d = -radius; d <= radius; ++d) {
    const double w = std::exp(-0.5 * (d / sigma) * (d / sigma));
    taps[static_cast<std::size_t>(d + radius)] = w;
    tap_sum += w;
  }
  double tap_sq = 0.0;
  for (auto& w : taps) {
    w /= tap_sum;
    tap_sq += w * w;
  }
  const double gain = 1.0 / tap_sq;  // separable: variance shrinks by tap_sq^2

  std::vector<double> tmp(plane.size());
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (int d = -radius; d <= radius; ++d) {
        const int cc = ((c + d) % cols + cols) % cols;
        acc += taps[static_cast<std::size_t>(d + radius)] *
               plane[static_cast<std::size_t>(r) * cols + cc];
      }
      tmp[static_cast<std::size_t>(r) * cols + c] = acc;
    }
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) {
      double acc = 0.0;
      for (int d = -radius; d <= radius; ++d) {
        const int rr = ((r + d) % rows + rows) % rows;
        acc += taps[static_cast<std::size_t>(d + radius)] *
               tmp[static_cast<std::size_t>(rr) * cols + c];
      }
      plane[static_cast<std::size_t>(r) * cols + c] = acc * gain;
    }
}

}  // namespace detail

// Correlation of the smoothed field at lag d is exp(-d^2 / (4 sigma^2));
// this sigma makes corr(length_scale) = 0.5.
inline double smoothing_sigma(double length_scale) {
  return 0.60056120439322491382 * length_scale;
}

// Zero-mean Gaussian coefficient field with the given absolute per-mode
// variances (waves^2). One named substream per mode: adding modes or
// experiments never perturbs another stream's draws.
inline CoefficientField sample_coefficient_field(
    const OpticsConfig& config, const CorrelationModel& correlation,
    const std::vector<double>& variance_waves2) {
  validate(config);
  if (correlation.kind == CorrelationModel::Kind::smoothed &&
      !(correlation.length_scale > 0.0))
    throw std::invalid_argument("length scale must be positive");
  if (static_cast<int>(variance_waves2.size()) < config.modes)
    throw std::invalid_argument("variance profile shorter than mode count");

  CoefficientField field;
  field.rows = config.rows;
  field.cols = config.cols;
  field.modes = config.modes;
  field.values.assign(
      static_cast<std::size_t>(config.modes) * config.rows * config.cols, 0.0);

  const std::size_t plane_n =
      static_cast<std::size_t>(config.rows) * config.cols;
  for (int m = 1; m <= config.modes; ++m) {
    const double var = variance_waves2[static_cast<std::size_t>(m - 1)];
    if (var <= 0.0) continue;
    const double sigma = std::sqrt(var);
    NormalStream stream(config.seed, "coeff/mode/" + std::to_string(m));
    std::vector<double> plane(plane_n);
    for (auto& v : plane) v = stream.next();
    if (correlation.kind == CorrelationModel::Kind::smoothed)
      detail::smooth_plane_wrap(plane, config.rows, config.cols,
                                smoothing_sigma(correlation.length_scale));
    const std::size_t base = static_cast<std::size_t>(m - 1) * plane_n;
    for (std::size_t i = 0; i < plane_n; ++i)
      field.values[base + i] = sigma * plane[i];
  }

  std::ostringstream desc;
  if (correlation.kind == CorrelationModel::Kind::smoothed)
    desc << "smoothed length_scale=" << correlation.length_scale;
  else
    desc << "independent";
  field.covariance_descriptor = desc.str();
  return field;
}

// Variant computing the variance profile from the optics: the default modal
// profile scaled by (D/r0)^(5/3), with D/r0 capped per config. A non-empty
// table path overrides individual per-mode variances after scaling.
inline CoefficientField sample_coefficient_field(
    const OpticsConfig& config, const CorrelationModel& correlation,
    const std::string& variance_table = std::string()) {
  validate(config);
  const TurbulenceStrength s = turbulence_strength(config);
  auto profile = modal_variance_profile(config.modes);
  const double scale = std::pow(s.d_over_r0, 5.0 / 3.0);
  for (auto& v : profile) v *= scale;
  if (!variance_table.empty()) apply_variance_table(profile, variance_table);
  CoefficientField field =
      sample_coefficient_field(config, correlation, profile);
  field.strength_clamped = s.clamped;
  if (s.clamped) {
    std::ostringstream w;
    w << "D/r0 = " << s.raw << " exceeds cap " << config.dr0_cap
      << "; clamped";
    field.warning = w.str();
  }
  std::ostringstream desc;
  desc << field.covariance_descriptor << " d_over_r0=" << s.d_over_r0;
  if (s.clamped) desc << " (clamped from " << s.raw << ")";
  field.covariance_descriptor = desc.str();
  return field;
}

struct TiltField {
  int rows = 0, cols = 0;
  std::vector<Vec2> t;  // x = column displacement, y = row displacement

  TiltField() = default;
  TiltField(int r, int c) : rows(r), cols(c) {
    if (r < 1 || c < 1) throw std::invalid_argument("tilt field size");
    t.assign(static_cast<std::size_t>(r) * c, {0.0, 0.0});
  }
  const Vec2& at(int r, int c) const {
    return t[static_cast<std::size_t>(r) * cols + c];
  }
  Vec2& at(int r, int c) {
    return t[static_cast<std::size_t>(r) * cols + c];
  }
};

// t_i = gain * (a_2, a_3): mode 2 displaces along columns, mode 3 along rows.
// Zero coefficients give exactly zero tilt; linearity is exact.
inline TiltField tilt_field_from_coefficients(const CoefficientField& field,
                                              double tilt_gain) {
  if (field.modes < 3) throw std::invalid_argument("need modes >= 3");
  TiltField tilts(field.rows, field.cols);
  for (int r = 0; r < field.rows; ++r)
    for (int c = 0; c < field.cols; ++c)
      tilts.at(r, c) = {tilt_gain * field.at(2, r, c),
                        tilt_gain * field.at(3, r, c)};
  return tilts;
}

}  // namespace turbforward
