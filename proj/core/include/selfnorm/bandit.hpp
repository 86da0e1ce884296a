#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "selfnorm/kernel.hpp"
#include "selfnorm/noise.hpp"
#include "selfnorm/radii.hpp"
#include "selfnorm/regression.hpp"

namespace selfnorm {

/// Constants of the synthetic reward function; every field is config-exposed.
struct BanditEnvConfig {
  std::size_t n_arms = 200;     // equally spaced on [0, 1]
  std::size_t n_centers = 50;   // points whose feature maps make up theta*
  double mode_low = 0.25;
  double mode_high = 0.75;
  double mode_sd = 0.05;
  double mean_scale = 1.0;      // max_a |f(a)| after rescaling

  void validate() const;
};

/// One-dimensional arms embedded by an RBF kernel, theta* a weighted sum of
/// feature maps, and bounded noise.
struct BanditEnv {
  KernelSpec kernel;
  NoiseModel noise;
  Eigen::MatrixXd arms;  // 1 x n_arms
  KernelExpansion theta_star;
  Eigen::VectorXd arm_means;
  double D = 0.0;  // |theta*| in the RKHS
  std::size_t best_arm = 0;

  [[nodiscard]] double best_mean() const { return arm_means(static_cast<Eigen::Index>(best_arm)); }
};

/// Draws centers from the two-mode mixture and weights from Uniform(0, 1),
/// then rescales the weights so that max_a |f(a)| = mean_scale.
BanditEnv make_bandit_env(const BanditEnvConfig& cfg, const KernelSpec& kernel, const NoiseModel& noise, Rng& rng);

/// Argmax of the UCB over the grid; lowest index wins ties.
std::size_t select_arm(const PosteriorGrid& grid, double eta);

/// Same rule evaluated directly through the regression state (arms are columns).
std::size_t select_arm(const RegressionState& state, const Eigen::MatrixXd& arms, double eta);

struct BanditRecord {
  std::size_t t = 0;
  std::size_t arm = 0;
  double reward = 0.0;
  double eta = 0.0;  // eta_{t-1}, used to pick this arm
  double regret = 0.0;
  double cum_regret = 0.0;
  double s = 0.0;
  double nu = 0.0;
};

struct EpisodeOptions {
  bool record_self_norm = true;
  bool check_containment = false;   // ellipsoid_deviation against eta_t every round
};

struct BanditTrace {
  std::vector<BanditRecord> records;
  bool aborted = false;
  std::string error;
  bool contained = true;  // theta* in every ellipsoid (when checked)
  double eta_final = 0.0;
  Eigen::VectorXd posterior_mean;  // over the arm grid after the last round
  Eigen::VectorXd ucb;             // posterior_mean + eta_final * width

  [[nodiscard]] double cum_regret() const { return records.empty() ? 0.0 : records.back().cum_regret; }
};

/// C^2 used by the fixed-horizon methods: sigma^2 min(T, 2 m ln(1 + T / (m rho)))
/// with m arms, a deterministic bound on sum_t |G_t|^2.
double bandit_fixed_c_sq(double sigma_sq, std::size_t T, std::size_t n_arms, double rho);

/// GP-UCB for T rounds with eta_0 = sqrt(rho) D and eta_t = J_t + sqrt(rho) D.
BanditTrace run_episode(const BanditEnv& env, const RadiusConfig& cfg, std::size_t T, Rng& noise_rng,
                        const EpisodeOptions& options = {});

}  // namespace selfnorm
