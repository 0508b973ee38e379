#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "turbforward/analysis.hpp"
#include "turbforward/config.hpp"
#include "turbforward/image_io.hpp"
#include "turbforward/matrix.hpp"
#include "turbforward/operators.hpp"
#include "turbforward/version.hpp"

namespace turbforward {

struct RunResult {
  int status = 0;  // 0 ok, 1 invariant violation
  std::vector<std::string> artifacts;  // names relative to output_dir
  std::vector<std::string> violations;
  std::string manifest_path;
};

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Collects metrics and artifact names, then writes the manifest in one
// deterministic pass. No timestamps: reruns must be byte-identical.
struct RunContext {
  const ExperimentConfig& cfg;
  std::filesystem::path dir;
  std::vector<std::string> artifacts;
  std::vector<std::pair<std::string, std::string>> metrics;
  std::vector<std::string> extra_lines;
  std::vector<std::string> warnings;
  std::vector<std::string> violations;

  explicit RunContext(const ExperimentConfig& c) : cfg(c), dir(c.output_dir) {
    std::filesystem::create_directories(dir);
  }

  std::string path(const std::string& name) const {
    return (dir / name).string();
  }

  void add_artifact(const std::string& name) { artifacts.push_back(name); }

  void write_image_artifacts(const std::string& stem, const Image& img,
                             bool preview_scaled = false) {
    if (preview_scaled)
      write_image_pgm_preview(path(stem + ".pgm"), img);
    else
      write_image_pgm(path(stem + ".pgm"), img);
    write_image_f32(path(stem + ".f32"), img);
    add_artifact(stem + ".pgm");
    add_artifact(stem + ".f32");
    add_artifact(stem + ".f32.txt");
  }

  void metric(const std::string& key, double value) {
    metrics.emplace_back(key, fmt_double(value));
  }
  void metric_text(const std::string& key, const std::string& value) {
    metrics.emplace_back(key, value);
  }

  void check(bool ok, const std::string& property) {
    if (!ok) violations.push_back(property);
  }

  std::string write_manifest() {
    const std::string name = "manifest.txt";
    std::ofstream out(path(name), std::ios::binary);
    if (!out) throw IoError("cannot write manifest: " + path(name));
    out << "program: " << kProgramName << " " << kVersion << "\n";
    out << "experiment: " << cfg.experiment << "\n";
    out << "seed: " << cfg.optics.seed << "\n";
    out << config_echo(cfg);
    for (const auto& [k, v] : metrics)
      out << "metric." << k << ": " << v << "\n";
    for (const auto& l : extra_lines) out << l << "\n";
    for (const auto& w : warnings) out << "warning: " << w << "\n";
    for (const auto& a : artifacts)
      out << "artifact: " << a << " " << hash_file(path(a)) << "\n";
    if (violations.empty()) {
      out << "status: ok\n";
    } else {
      out << "status: violated\n";
      for (const auto& v : violations) out << "violated: " << v << "\n";
    }
    return name;
  }

  RunResult finish() {
    RunResult out;
    out.violations = violations;
    out.status = violations.empty() ? 0 : 1;
    out.manifest_path = path(write_manifest());
    out.artifacts = artifacts;
    return out;
  }
};

inline int bounded(std::mt19937_64& g, int n) {
  // Modulo bias is irrelevant for picking test-instance shapes.
  return static_cast<int>(g() % static_cast<std::uint64_t>(n));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Randomized equivalence battery: image-space operators against the dense
// matrix backend, alternating 1-D columns and 2-D frames. Every instance
// uses one shared kernel and integer tilts, the regime where the image path
// must reproduce the matrix product exactly.

struct OracleBattery {
  int instances = 0;
  double worst_operator_vs_matrix = 0.0;
  double max_commutator = 0.0;
  bool structure_ok = true;
  bool have_witness = false;  // first instance whose orderings disagree
  OperatorMatrix witness_t;
  OperatorMatrix witness_b;
};

inline OracleBattery run_oracle_battery(int instances, int max_2d,
                                        std::uint64_t seed) {
  if (instances < 1) throw std::invalid_argument("need at least one instance");
  max_2d = std::min(std::max(max_2d, 4), 16);
  OracleBattery out;
  for (int inst = 0; inst < instances; ++inst) {
    std::mt19937_64 gen = named_stream(seed, "oracle/" + std::to_string(inst));
    const bool one_d = (inst % 2) == 0;
    const int rows = one_d ? 2 + detail::bounded(gen, 63)
                           : 4 + detail::bounded(gen, max_2d - 3);
    const int cols = one_d ? 1 : 4 + detail::bounded(gen, max_2d - 3);
    const int k = one_d ? 3 : 3 + 2 * detail::bounded(gen, 3);

    PsfField field;
    field.grid_points = 1;
    field.image_rows = rows;
    field.image_cols = cols;
    field.kernel_size = k;
    field.anchors = make_anchor_lattice(rows, cols, 1);
    Kernel kern(k, k);
    if (one_d) {
      // Column support only, so the kernel never couples across the
      // single-column frame boundary.
      for (int r = 0; r < k; ++r)
        kern.at(r, kern.center_col()) = 1.0 + detail::bounded(gen, 1000);
    } else {
      for (auto& v : kern.v) v = 1.0 + detail::bounded(gen, 1000);
    }
    kern.normalize();
    field.kernels.push_back(kern);

    Image img(rows, cols);
    for (auto& v : img.v) v = detail::bounded(gen, 1 << 20) / 1048576.0;
    TiltField tilts(rows, cols);
    for (auto& t : tilts.t) {
      const int ty = detail::bounded(gen, 7) - 3;
      const int tx = one_d ? 0 : detail::bounded(gen, 7) - 3;
      t = {static_cast<double>(tx), static_cast<double>(ty)};
    }

    const std::vector<double> j(img.v.begin(), img.v.end());
    const OperatorMatrix t = build_tilt_matrix(tilts);
    const OperatorMatrix b = build_blur_matrix(field);
    const std::vector<double> tbj = matvec(matmul(t, b), j);
    const std::vector<double> btj = matvec(matmul(b, t), j);
    const Image obt = blur_then_tilt(img, tilts, field);
    const Image otb = tilt_then_blur(img, tilts, field);
    out.worst_operator_vs_matrix =
        std::max({out.worst_operator_vs_matrix, max_abs_diff(obt.v, tbj),
                  max_abs_diff(otb.v, btj)});

    const CommutatorReport rep = commutator_report(t, b);
    out.structure_ok =
        out.structure_ok && rep.tb_relocates_rows && rep.bt_relocates_columns;
    out.max_commutator = std::max(out.max_commutator, rep.max_abs);
    if (!out.have_witness && rep.max_abs > 0.0) {
      out.witness_t = t;
      out.witness_b = b;
      out.have_witness = true;
    }
    ++out.instances;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Experiment drivers. Each writes its artifacts plus a manifest and records
// violated properties by name.

namespace detail {

inline RunResult finish_natural(RunContext& ctx, const NaturalResult& res) {
  if (!res.warning.empty()) std::cerr << "warning: " << res.warning << "\n";
  ctx.write_image_artifacts("natural_clean", res.clean);
  ctx.write_image_artifacts("natural_blur_then_tilt", res.blur_then_tilt_out);
  ctx.write_image_artifacts("natural_tilt_then_blur", res.tilt_then_blur_out);
  ctx.write_image_artifacts("natural_diff", res.report.diff_map,
                            /*preview_scaled=*/true);

  ctx.metric("psnr_between_orderings", res.psnr_orderings);
  ctx.metric("psnr_clean_vs_correct", res.psnr_clean_vs_correct);
  ctx.metric("diff_max_abs", res.report.max_abs);
  ctx.metric("diff_rms", res.report.rms);
  ctx.metric("d_over_r0", res.d_over_r0);
  ctx.metric_text("strength_clamped", res.strength_clamped ? "true" : "false");
  if (!res.warning.empty()) ctx.warnings.push_back(res.warning);

  ctx.check(res.threshold_ok, "orderings_close_in_psnr");
  return ctx.finish();
}

}  // namespace detail

inline RunResult run_point_grid(const ExperimentConfig& cfg) {
  detail::RunContext ctx(cfg);
  PointGridSettings s;
  s.spots_per_side = cfg.spots_per_side;
  s.spacing = cfg.spot_spacing;
  s.kernel_size = cfg.kernel_size;
  s.pad = cfg.pad;
  s.pupil_resolution = cfg.pupil_resolution;
  s.modes = cfg.optics.modes;
  s.sigma_t = cfg.sigma_t;
  s.hi_order_sigma = cfg.hi_order_sigma;
  s.seed = cfg.optics.seed;
  const PointGridResult res = point_source_grid_experiment(s);

  ctx.write_image_artifacts("point_grid_clean", res.clean);
  ctx.write_image_artifacts("point_grid_blur_then_tilt",
                            res.blur_then_tilt_out);
  ctx.write_image_artifacts("point_grid_tilt_then_blur",
                            res.tilt_then_blur_out);
  ctx.write_image_artifacts("point_grid_full", res.full_out);

  {
    std::ofstream tab(ctx.path("spot_metrics.txt"), std::ios::binary);
    if (!tab) throw IoError("cannot write spot metrics table");
    tab.precision(17);
    tab << "# row col clipped corr_preserved corr_destroyed full_dev\n";
    for (const SpotMetrics& m : res.spots)
      tab << m.row << " " << m.col << " " << (m.clipped ? 1 : 0) << " "
          << m.corr_preserved << " " << m.corr_destroyed << " " << m.full_dev
          << "\n";
    ctx.add_artifact("spot_metrics.txt");
  }

  ctx.metric("spots_total", static_cast<double>(res.spots.size()));
  ctx.metric("spots_clipped", res.clipped_count);
  ctx.metric("min_corr_preserved", res.min_preserved);
  ctx.metric("max_corr_destroyed", res.max_destroyed);
  ctx.metric("worst_full_vs_composition", res.worst_full_dev);

  ctx.check(res.preserved_ok, "relocate_then_blur_preserves_shape");
  ctx.check(res.destroyed_ok, "blur_then_relocate_destroys_shape");
  ctx.check(res.worst_full_dev < 0.02, "full_model_matches_composition");
  return ctx.finish();
}

inline RunResult run_natural(const ExperimentConfig& cfg) {
  detail::RunContext ctx(cfg);
  const Image input = cfg.input_image.empty()
                          ? make_test_scene(cfg.optics.rows, cfg.optics.cols)
                          : read_image(cfg.input_image);
  NaturalSettings s;
  s.optics = cfg.optics;
  s.correlation = cfg.correlation;
  s.kernel_size = cfg.kernel_size;
  s.pad = cfg.pad;
  s.pupil_resolution = cfg.pupil_resolution;
  s.psnr_threshold = cfg.psnr_threshold;
  s.variance_table = cfg.variance_table;
  const NaturalResult res = natural_image_experiment(input, s);
  return detail::finish_natural(ctx, res);
}

inline RunResult run_matrix_oracle(const ExperimentConfig& cfg) {
  detail::RunContext ctx(cfg);
  const OracleBattery bat = run_oracle_battery(
      cfg.oracle_instances, cfg.oracle_size, cfg.optics.seed);

  if (bat.have_witness) {
    write_matrix_text(ctx.path("oracle_T.txt"), bat.witness_t);
    write_matrix_text(ctx.path("oracle_B.txt"), bat.witness_b);
    write_matrix_text(ctx.path("oracle_TB.txt"),
                      matmul(bat.witness_t, bat.witness_b));
    write_matrix_text(ctx.path("oracle_BT.txt"),
                      matmul(bat.witness_b, bat.witness_t));
    ctx.add_artifact("oracle_T.txt");
    ctx.add_artifact("oracle_B.txt");
    ctx.add_artifact("oracle_TB.txt");
    ctx.add_artifact("oracle_BT.txt");
  }

  ctx.metric("instances", bat.instances);
  ctx.metric("max_abs_operator_vs_matrix", bat.worst_operator_vs_matrix);
  ctx.metric("max_commutator_entry", bat.max_commutator);
  ctx.extra_lines.push_back(std::string("TB_neq_BT: ") +
                            (bat.max_commutator > 0.0 ? "true" : "false"));

  ctx.check(bat.worst_operator_vs_matrix <= 1e-6,
            "operators_match_matrix_products");
  ctx.check(bat.structure_ok, "product_structure_verified");
  ctx.check(bat.max_commutator > 0.0, "orderings_differ");
  return ctx.finish();
}

inline RunResult run_difference_scaling(const ExperimentConfig& cfg) {
  detail::RunContext ctx(cfg);
  ScalingSettings s;
  s.size = cfg.scaling_size;
  s.kernel_size = cfg.scaling_kernel_size;
  s.pad = cfg.pad;
  s.pupil_resolution = cfg.pupil_resolution;
  s.modes = cfg.optics.modes;
  s.r0_override_ratio = cfg.scaling_strength_ratio;
  s.length_scale = cfg.scaling_length_scale;
  s.seed = cfg.optics.seed;
  const ScalingResult res = difference_scaling_experiment(s);

  ctx.write_image_artifacts("scaling_scene", res.scene);
  {
    std::ofstream tab(ctx.path("scaling_report.txt"), std::ios::binary);
    if (!tab) throw IoError("cannot write scaling report");
    tab.precision(17);
    tab << "# scale residual_norm\n";
    for (std::size_t i = 0; i < res.scales.size(); ++i)
      tab << res.scales[i] << " " << res.residual_norms[i] << "\n";
    tab << "# fitted_exponent " << res.exponent << "\n";
    ctx.add_artifact("scaling_report.txt");
  }
  ctx.metric("fitted_exponent", res.exponent);
  for (std::size_t i = 0; i < res.scales.size(); ++i)
    ctx.metric("residual_norm_" + std::to_string(i), res.residual_norms[i]);

  ctx.check(res.exponent >= 1.8 && res.exponent <= 2.2,
            "residual_exponent_second_order");
  return ctx.finish();
}

inline RunResult run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  if (cfg.experiment == "point_grid") return run_point_grid(cfg);
  if (cfg.experiment == "natural") return run_natural(cfg);
  if (cfg.experiment == "matrix_oracle") return run_matrix_oracle(cfg);
  if (cfg.experiment == "difference_scaling")
    return run_difference_scaling(cfg);
  throw ConfigError("unknown experiment '" + cfg.experiment + "'");
}

}  // namespace turbforward
