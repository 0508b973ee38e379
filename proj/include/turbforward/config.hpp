#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "turbforward/turbulence.hpp"

namespace turbforward {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Everything an experiment run needs, with documented defaults. The file
// format is one `key = value` per line, '#' comments, unknown keys rejected.
struct ExperimentConfig {
  std::string experiment;  // point_grid | natural | matrix_oracle |
                           // difference_scaling
  OpticsConfig optics;
  CorrelationModel correlation{CorrelationModel::Kind::smoothed, 128.0};
  int grid_points = 16;
  int kernel_size = 33;
  int pad = 4;
  int pupil_resolution = 128;
  std::string input_image;   // empty: experiments use the built-in scene
  std::string output_dir = "out";
  std::string variance_table;  // optional per-mode variance override file
  double psnr_threshold = 30.0;
  // point_grid specifics
  int spots_per_side = 4;
  int spot_spacing = 64;
  double sigma_t = 2.0;
  double hi_order_sigma = 0.012;
  // matrix_oracle specifics
  int oracle_size = 12;
  int oracle_instances = 30;
  // difference_scaling specifics
  double scaling_strength_ratio = 0.2;
  double scaling_length_scale = 48.0;
  int scaling_size = 128;
  int scaling_kernel_size = 21;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

struct ConfigParser {
  std::map<std::string, std::string> kv;
  std::map<std::string, int> lines;
  std::string path;

  void load(const std::string& file_path) {
    path = file_path;
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string t = trim(line);
      if (t.empty()) continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos)
        throw ConfigError(path + ":" + std::to_string(lineno) +
                          ": expected key = value");
      const std::string key = trim(t.substr(0, eq));
      const std::string val = trim(t.substr(eq + 1));
      if (key.empty() || val.empty())
        throw ConfigError(path + ":" + std::to_string(lineno) +
                          ": empty key or value");
      if (kv.count(key))
        throw ConfigError(path + ":" + std::to_string(lineno) +
                          ": duplicate key '" + key + "'");
      kv[key] = val;
      lines[key] = lineno;
    }
  }

  std::string where(const std::string& key) const {
    return path + ":" + std::to_string(lines.at(key));
  }

  bool take_string(const std::string& key, std::string* out) {
    const auto it = kv.find(key);
    if (it == kv.end()) return false;
    *out = it->second;
    kv.erase(it);
    return true;
  }

  template <typename T, typename Parse>
  bool take(const std::string& key, T* out, Parse parse, const char* kind) {
    const auto it = kv.find(key);
    if (it == kv.end()) return false;
    try {
      std::size_t pos = 0;
      *out = parse(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument(it->second);
    } catch (const std::exception&) {
      throw ConfigError(where(key) + ": '" + it->second + "' is not " + kind);
    }
    kv.erase(it);
    return true;
  }

  bool take_int(const std::string& key, int* out) {
    return take(
        key, out,
        [](const std::string& s, std::size_t* pos) { return std::stoi(s, pos); },
        "an integer");
  }

  bool take_u64(const std::string& key, std::uint64_t* out) {
    return take(
        key, out,
        [](const std::string& s, std::size_t* pos) {
          return static_cast<std::uint64_t>(std::stoull(s, pos));
        },
        "an unsigned integer");
  }

  bool take_double(const std::string& key, double* out) {
    return take(
        key, out,
        [](const std::string& s, std::size_t* pos) { return std::stod(s, pos); },
        "a number");
  }
};

}  // namespace detail

inline void validate(const ExperimentConfig& c) {
  static const std::vector<std::string> known = {
      "point_grid", "natural", "matrix_oracle", "difference_scaling"};
  if (std::find(known.begin(), known.end(), c.experiment) == known.end())
    throw ConfigError("unknown experiment '" + c.experiment + "'");
  validate(c.optics);
  if (c.kernel_size < 1 || c.kernel_size % 2 == 0)
    throw ConfigError("kernel_size must be odd and positive");
  if (c.pad < 2) throw ConfigError("pad must be >= 2");
  if (c.grid_points < 1) throw ConfigError("grid_points must be >= 1");
  if (c.pupil_resolution < 16)
    throw ConfigError("pupil_resolution must be >= 16");
  if (c.correlation.kind == CorrelationModel::Kind::smoothed &&
      !(c.correlation.length_scale > 0.0))
    throw ConfigError("length_scale must be positive");
  if (c.spots_per_side < 1) throw ConfigError("spots_per_side must be >= 1");
  if (c.spot_spacing <= c.kernel_size)
    throw ConfigError("spot_spacing must exceed kernel_size");
  if (!(c.sigma_t >= 0.0)) throw ConfigError("sigma_t must be >= 0");
  if (c.oracle_size < 2 || c.oracle_size > 64)
    throw ConfigError("oracle_size must be in [2, 64]");
  if (c.oracle_instances < 1)
    throw ConfigError("oracle_instances must be >= 1");
  if (c.scaling_size < 32) throw ConfigError("scaling_size must be >= 32");
  if (c.scaling_kernel_size < 1 || c.scaling_kernel_size % 2 == 0)
    throw ConfigError("scaling_kernel_size must be odd and positive");
  if (!(c.scaling_strength_ratio > 0.0))
    throw ConfigError("scaling_strength_ratio must be positive");
  if (!(c.scaling_length_scale > 0.0))
    throw ConfigError("scaling_length_scale must be positive");
  if (c.output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

// Loads and validates a config file. Unknown keys fail closed: a typo must
// never silently fall back to a default.
inline ExperimentConfig load_config(const std::string& path) {
  detail::ConfigParser p;
  p.load(path);

  ExperimentConfig c;
  if (!p.take_string("experiment", &c.experiment))
    throw ConfigError(path + ": missing required key 'experiment'");

  p.take_double("aperture_diameter", &c.optics.aperture_diameter);
  p.take_double("wavelength", &c.optics.wavelength);
  p.take_double("path_length", &c.optics.path_length);
  p.take_double("cn2", &c.optics.cn2);
  p.take_double("focal_length", &c.optics.focal_length);
  p.take_int("rows", &c.optics.rows);
  p.take_int("cols", &c.optics.cols);
  p.take_int("modes", &c.optics.modes);
  p.take_u64("seed", &c.optics.seed);
  p.take_double("r0_override", &c.optics.r0_override);
  p.take_double("dr0_cap", &c.optics.dr0_cap);

  std::string corr;
  if (p.take_string("correlation", &corr)) {
    if (corr == "independent")
      c.correlation.kind = CorrelationModel::Kind::independent;
    else if (corr == "smoothed")
      c.correlation.kind = CorrelationModel::Kind::smoothed;
    else
      throw ConfigError(path +
                        ": correlation must be independent or smoothed");
  }
  p.take_double("length_scale", &c.correlation.length_scale);

  p.take_int("grid_points", &c.grid_points);
  p.take_int("kernel_size", &c.kernel_size);
  p.take_int("pad", &c.pad);
  p.take_int("pupil_resolution", &c.pupil_resolution);
  p.take_string("input_image", &c.input_image);
  p.take_string("output_dir", &c.output_dir);
  p.take_string("variance_table", &c.variance_table);
  p.take_double("psnr_threshold", &c.psnr_threshold);
  p.take_int("spots_per_side", &c.spots_per_side);
  p.take_int("spot_spacing", &c.spot_spacing);
  p.take_double("sigma_t", &c.sigma_t);
  p.take_double("hi_order_sigma", &c.hi_order_sigma);
  p.take_int("oracle_size", &c.oracle_size);
  p.take_int("oracle_instances", &c.oracle_instances);
  p.take_double("scaling_strength_ratio", &c.scaling_strength_ratio);
  p.take_double("scaling_length_scale", &c.scaling_length_scale);
  p.take_int("scaling_size", &c.scaling_size);
  p.take_int("scaling_kernel_size", &c.scaling_kernel_size);

  if (!p.kv.empty()) {
    std::ostringstream msg;
    msg << path << ": unknown key";
    if (p.kv.size() > 1) msg << "s";
    for (const auto& [k, v] : p.kv) msg << " '" << k << "'";
    throw ConfigError(msg.str());
  }
  validate(c);
  return c;
}

// Canonical echo of the effective configuration, for manifests. Stable key
// order, full double precision: two runs of the same config echo the same
// bytes.
inline std::string config_echo(const ExperimentConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "config.experiment: " << c.experiment << "\n";
  os << "config.aperture_diameter: " << c.optics.aperture_diameter << "\n";
  os << "config.wavelength: " << c.optics.wavelength << "\n";
  os << "config.path_length: " << c.optics.path_length << "\n";
  os << "config.cn2: " << c.optics.cn2 << "\n";
  os << "config.focal_length: " << c.optics.focal_length << "\n";
  os << "config.rows: " << c.optics.rows << "\n";
  os << "config.cols: " << c.optics.cols << "\n";
  os << "config.modes: " << c.optics.modes << "\n";
  os << "config.seed: " << c.optics.seed << "\n";
  os << "config.r0_override: " << c.optics.r0_override << "\n";
  os << "config.dr0_cap: " << c.optics.dr0_cap << "\n";
  os << "config.correlation: "
     << (c.correlation.kind == CorrelationModel::Kind::smoothed ? "smoothed"
                                                                : "independent")
     << "\n";
  os << "config.length_scale: " << c.correlation.length_scale << "\n";
  os << "config.grid_points: " << c.grid_points << "\n";
  os << "config.kernel_size: " << c.kernel_size << "\n";
  os << "config.pad: " << c.pad << "\n";
  os << "config.pupil_resolution: " << c.pupil_resolution << "\n";
  os << "config.input_image: " << c.input_image << "\n";
  os << "config.output_dir: " << c.output_dir << "\n";
  os << "config.variance_table: " << c.variance_table << "\n";
  os << "config.psnr_threshold: " << c.psnr_threshold << "\n";
  os << "config.spots_per_side: " << c.spots_per_side << "\n";
  os << "config.spot_spacing: " << c.spot_spacing << "\n";
  os << "config.sigma_t: " << c.sigma_t << "\n";
  os << "config.hi_order_sigma: " << c.hi_order_sigma << "\n";
  os << "config.oracle_size: " << c.oracle_size << "\n";
  os << "config.oracle_instances: " << c.oracle_instances << "\n";
  os << "config.scaling_strength_ratio: " << c.scaling_strength_ratio << "\n";
  os << "config.scaling_length_scale: " << c.scaling_length_scale << "\n";
  os << "config.scaling_size: " << c.scaling_size << "\n";
  os << "config.scaling_kernel_size: " << c.scaling_kernel_size << "\n";
  return os.str();
}

}  // namespace turbforward
