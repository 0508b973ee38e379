// Command-line front end: run experiments from a config file, validate a
// config, or exercise the dense-matrix oracle battery directly.
//
// Exit codes: 0 success, 1 invariant failure or I/O error, 2 usage/config
// error.

#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "turbforward/turbforward.hpp"

namespace {

int cmd_run(const std::string& config_path) {
  const turbforward::ExperimentConfig cfg =
      turbforward::load_config(config_path);
  const turbforward::RunResult res = turbforward::run_experiment(cfg);
  std::cout << "manifest: " << res.manifest_path << "\n";
  for (const std::string& a : res.artifacts)
    std::cout << "artifact: " << a << "\n";
  if (res.status != 0) {
    for (const std::string& v : res.violations)
      std::cerr << "violated: " << v << "\n";
  }
  return res.status;
}

int cmd_validate(const std::string& config_path) {
  const turbforward::ExperimentConfig cfg =
      turbforward::load_config(config_path);
  std::cout << turbforward::config_echo(cfg);
  std::cout << "ok\n";
  return 0;
}

int cmd_oracle(int size, std::uint64_t seed, int instances) {
  const turbforward::OracleBattery bat =
      turbforward::run_oracle_battery(instances, size, seed);
  std::cout << "instances: " << bat.instances << "\n";
  std::cout << "max_abs_operator_vs_matrix: " << bat.worst_operator_vs_matrix
            << "\n";
  std::cout << "max_commutator_entry: " << bat.max_commutator << "\n";
  std::cout << "TB_neq_BT: " << (bat.max_commutator > 0.0 ? "true" : "false")
            << "\n";
  bool ok = true;
  if (bat.worst_operator_vs_matrix > 1e-6) {
    std::cerr << "violated: operators_match_matrix_products\n";
    ok = false;
  }
  if (!bat.structure_ok) {
    std::cerr << "violated: product_structure_verified\n";
    ok = false;
  }
  if (!(bat.max_commutator > 0.0)) {
    std::cerr << "violated: orderings_differ\n";
    ok = false;
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Forward model for imaging through turbulence: relocation and "
               "blur operators, their compositions, and experiment drivers"};
  app.require_subcommand(1);

  std::string run_config;
  CLI::App* run = app.add_subcommand("run", "run an experiment from a config");
  run->add_option("config", run_config, "config file (key = value lines)")
      ->required();

  std::string val_config;
  CLI::App* val =
      app.add_subcommand("validate", "parse and echo a config, then exit");
  val->add_option("config", val_config, "config file (key = value lines)")
      ->required();

  int oracle_size = 12;
  std::uint64_t oracle_seed = 0;
  int oracle_instances = 100;
  CLI::App* oracle = app.add_subcommand(
      "oracle", "random operator-vs-matrix equivalence battery");
  oracle->add_option("--size", oracle_size, "max 2-D frame side (4..16)");
  oracle->add_option("--seed", oracle_seed, "stream seed");
  oracle->add_option("--instances", oracle_instances, "instance count");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) return cmd_run(run_config);
    if (val->parsed()) return cmd_validate(val_config);
    return cmd_oracle(oracle_size, oracle_seed, oracle_instances);
  } catch (const turbforward::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
