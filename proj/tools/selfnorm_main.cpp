// selfnorm <experiment> --config <path> [--seed N] [--out DIR]
//
// Exit status: 0 all checks passed, 1 a check failed, 2 bad usage or config.

#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "selfnorm/error.hpp"
#include "selfnorm/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Self-normalized concentration experiments"};
  std::string experiment;
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir;
  app.add_option("experiment", experiment, "coverage | widths | supermartingale | bandit | onedim-diagnostic")
      ->required();
  app.add_option("--config", config_path, "JSON experiment configuration")->required();
  auto* seed_opt = app.add_option("--seed", seed, "Override the configured seed");
  auto* out_opt = app.add_option("--out", out_dir, "Output directory (default: config output_dir or ./out)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    selfnorm::ExperimentConfig cfg = selfnorm::load_config(config_path);
    const selfnorm::Experiment requested = selfnorm::experiment_from_string(experiment);
    cfg.experiment = requested;
    if (*seed_opt) cfg.seed = seed;
    if (*out_opt) cfg.output_dir = out_dir;
    if (cfg.output_dir.empty()) cfg.output_dir = "out";
    cfg.validate();
    const int status = selfnorm::run_experiment(cfg);
    std::cout << selfnorm::to_string(cfg.experiment) << ": " << (status == 0 ? "passed" : "FAILED") << " (see "
              << cfg.output_dir << "/report.json)\n";
    return status;
  } catch (const selfnorm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n\n" << app.help();
    return 2;
  } catch (const selfnorm::DomainError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
