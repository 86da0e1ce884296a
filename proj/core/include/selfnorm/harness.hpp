#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "selfnorm/bandit.hpp"
#include "selfnorm/kernel.hpp"
#include "selfnorm/noise.hpp"
#include "selfnorm/radii.hpp"

namespace selfnorm {

enum class Experiment { Coverage, Widths, Supermartingale, Bandit, OnedimDiagnostic };

std::string to_string(Experiment experiment);
Experiment experiment_from_string(const std::string& name);

struct ExperimentConfig {
  Experiment experiment = Experiment::Coverage;
  std::size_t replicas = 200;
  std::size_t horizon = 500;
  std::uint64_t seed = 1;
  RadiusConfig radius;
  /// When true, radius.sigma_sq is replaced by the noise model's variance.
  bool sigma_sq_from_noise = true;
  /// Variance proxy fed to the radii when the noise is identically zero.
  double zero_noise_sigma_sq = 1e-6;
  KernelSpec kernel;
  NoiseModel noise;
  std::string output_dir;  // empty: nothing is written

  std::vector<RadiusMethod> methods;
  std::vector<double> lambdas;            // supermartingale
  std::vector<std::size_t> checkpoints;   // widths, supermartingale
  std::vector<double> deltas;             // widths
  std::vector<std::size_t> horizons;      // onedim-diagnostic
  std::vector<NoiseModel> scenarios;      // bandit
  BanditEnvConfig bandit;
  bool emit_rows = true;                  // per-step CSV rows and bandit traces
  std::size_t row_replicas = 20;          // coverage replicas whose rows are written
  std::size_t ville_replicas = 0;         // 0: use replicas

  ExperimentConfig();

  /// Fills empty lists with the per-experiment defaults and resolves sigma_sq.
  [[nodiscard]] ExperimentConfig resolved() const;
  /// Throws ConfigError or DomainError on an invalid configuration.
  void validate() const;
};

/// Parses a JSON document; unknown keys are rejected. Throws ConfigError.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
/// Fully resolved configuration as pretty-printed JSON.
std::string config_to_json(const ExperimentConfig& cfg);

/// Radius configuration for `method` with the shared fields of `base`.
RadiusConfig radius_for(const RadiusConfig& base, RadiusMethod method);

struct CoverageMethodResult {
  RadiusMethod method = RadiusMethod::MixedBennett;
  std::size_t violations = 0;
  double rate = 0.0;
  double se = 0.0;         // sqrt(delta (1 - delta) / N)
  double threshold = 0.0;  // delta + 3 se
  bool passed = false;
};

struct CoverageReport {
  std::size_t replicas = 0;
  std::size_t horizon = 0;
  double delta = 0.0;
  std::string noise;
  std::vector<CoverageMethodResult> methods;
  bool passed = false;
};

struct WidthRow {
  std::size_t t = 0;
  RadiusMethod method = RadiusMethod::MixedBennett;
  double delta = 0.0;
  double radius = 0.0;
  double nu = 0.0;
  double logdet = 0.0;
};

struct WidthReport {
  std::vector<WidthRow> rows;
  bool bennett_below_bernstein = true;
  bool monotone_in_delta = true;
  /// SubGaussianBaseline narrower than MixedBennett at the last checkpoint and largest delta.
  bool subgaussian_below_mixed_at_end = false;
  bool passed = false;
};

struct SupermartingaleRow {
  std::string form;  // "bernstein" or "bennett"
  double lambda = 0.0;
  std::size_t t = 0;
  double mean = 0.0;
  double se = 0.0;
  bool passed = false;  // mean <= 1 + 3 se
};

struct VilleRow {
  std::string form;
  double lambda = 0.0;
  std::size_t replicas = 0;
  std::size_t crossings = 0;  // runs with sup_t S_t >= 1/delta
  double rate = 0.0;
  double se = 0.0;
  bool passed = false;  // rate <= delta + 3 se
};

struct SupermartingaleReport {
  std::vector<SupermartingaleRow> rows;
  std::vector<VilleRow> ville;
  bool passed = false;
};

struct OnedimRow {
  std::size_t T = 0;
  RadiusMethod method = RadiusMethod::FixedBernstein;
  double radius = 0.0;
  double ratio = 0.0;       // radius / sqrt(ln T)
  double g_norm_sq_sum = 0.0;
  double harmonic = 0.0;    // sum_{i <= T} 1 / (rho + i)
  double classical = 0.0;   // univariate Bernstein radius / sqrt(rho + T)
  double s = 0.0;
};

struct OnedimReport {
  std::vector<OnedimRow> rows;
  double max_harmonic_error = 0.0;
  /// Relative change of radius / sqrt(ln T) between the last two horizons.
  std::map<RadiusMethod, double> ratio_variation;
  double classical_variation = 0.0;
  bool passed = false;
};

struct BanditRun {
  std::string scenario;
  RadiusMethod method = RadiusMethod::MixedBennett;
  std::uint64_t seed = 0;
  std::size_t T = 0;
  double cum_regret = 0.0;
  double eta_final = 0.0;
  bool aborted = false;
  bool regret_nonnegative = true;
};

struct BanditOrderingCheck {
  std::string scenario;
  RadiusMethod better = RadiusMethod::MixedBennett;
  RadiusMethod worse = RadiusMethod::SubGaussianBaseline;
  double better_median = 0.0;
  double worse_median = 0.0;
  bool passed = false;
};

struct BanditReport {
  std::vector<BanditRun> runs;
  std::map<std::string, std::map<RadiusMethod, double>> median_regret;
  std::vector<BanditOrderingCheck> orderings;
  bool passed = false;
};

CoverageReport run_coverage(const ExperimentConfig& cfg);
WidthReport run_widths(const ExperimentConfig& cfg);
SupermartingaleReport run_supermartingale(const ExperimentConfig& cfg);
OnedimReport run_onedim_diagnostic(const ExperimentConfig& cfg);
BanditReport run_bandit(const ExperimentConfig& cfg);

/// Runs cfg.experiment, writing config-echo.json, CSV files and report.json
/// under cfg.output_dir. Returns 0 when every check passes and 1 otherwise.
int run_experiment(const ExperimentConfig& cfg);

}  // namespace selfnorm
