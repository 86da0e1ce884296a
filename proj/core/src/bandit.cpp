#include "selfnorm/bandit.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "selfnorm/error.hpp"

namespace selfnorm {

namespace {

using Eigen::Index;

}  // namespace

void BanditEnvConfig::validate() const {
  if (n_arms == 0) throw DomainError("bandit: n_arms must be >= 1");
  if (n_centers == 0) throw DomainError("bandit: n_centers must be >= 1");
  if (!(mode_sd > 0.0)) throw DomainError("bandit: mode_sd must be positive");
  if (!(mean_scale > 0.0)) throw DomainError("bandit: mean_scale must be positive");
}

BanditEnv make_bandit_env(const BanditEnvConfig& cfg, const KernelSpec& kernel, const NoiseModel& noise, Rng& rng) {
  cfg.validate();
  kernel.validate();
  noise.validate();
  if (kernel.input_dim != 1) throw DomainError("bandit: arms are one-dimensional, kernel input_dim must be 1");

  BanditEnv env;
  env.kernel = kernel;
  env.noise = noise;
  const auto n_arms = static_cast<Index>(cfg.n_arms);
  env.arms.resize(1, n_arms);
  for (Index a = 0; a < n_arms; ++a) {
    env.arms(0, a) = n_arms == 1 ? 0.5 : static_cast<double>(a) / static_cast<double>(n_arms - 1);
  }

  const auto m = static_cast<Index>(cfg.n_centers);
  env.theta_star.kernel = kernel;
  env.theta_star.centers.resize(1, m);
  env.theta_star.weights.resize(m);
  for (Index j = 0; j < m; ++j) {
    const double mode = rng.uniform() < 0.5 ? cfg.mode_low : cfg.mode_high;
    env.theta_star.centers(0, j) = rng.normal(mode, cfg.mode_sd);
  }
  for (Index j = 0; j < m; ++j) env.theta_star.weights(j) = rng.uniform();

  env.arm_means.resize(n_arms);
  for (Index a = 0; a < n_arms; ++a) env.arm_means(a) = env.theta_star({env.arms.col(a).data(), 1});
  const double peak = env.arm_means.cwiseAbs().maxCoeff();
  if (!(peak > 0.0)) throw NumericError("bandit: reward function vanishes on the arm grid");
  const double scale = cfg.mean_scale / peak;
  env.theta_star.weights *= scale;
  env.arm_means *= scale;

  env.D = std::sqrt(env.theta_star.rkhs_norm_sq());
  Index best = 0;
  env.arm_means.maxCoeff(&best);
  env.best_arm = static_cast<std::size_t>(best);
  return env;
}

std::size_t select_arm(const PosteriorGrid& grid, double eta) {
  if (grid.size() == 0) throw DomainError("select_arm: empty arm set");
  std::size_t best = 0;
  double best_value = grid.ucb(0, eta);
  for (std::size_t a = 1; a < grid.size(); ++a) {
    const double value = grid.ucb(a, eta);
    if (value > best_value) {
      best = a;
      best_value = value;
    }
  }
  return best;
}

std::size_t select_arm(const RegressionState& state, const Eigen::MatrixXd& arms, double eta) {
  if (arms.cols() == 0) throw DomainError("select_arm: empty arm set");
  const std::size_t dim = state.gram().kernel().input_dim;
  if (arms.rows() != static_cast<Index>(dim)) throw DomainError("select_arm: arm dimension mismatch");
  std::size_t best = 0;
  double best_value = 0.0;
  for (Index a = 0; a < arms.cols(); ++a) {
    const double value = state.ucb_value({arms.col(a).data(), dim}, eta);
    if (a == 0 || value > best_value) {
      best = static_cast<std::size_t>(a);
      best_value = value;
    }
  }
  return best;
}

double bandit_fixed_c_sq(double sigma_sq, std::size_t T, std::size_t n_arms, double rho) {
  const double t = static_cast<double>(T);
  const double m = static_cast<double>(n_arms);
  return sigma_sq * std::min(t, 2.0 * m * std::log1p(t / (m * rho)));
}

BanditTrace run_episode(const BanditEnv& env, const RadiusConfig& cfg, std::size_t T, Rng& noise_rng,
                        const EpisodeOptions& options) {
  if (T == 0) throw DomainError("run_episode: T must be >= 1");
  cfg.validate();
  RegressionState state(env.kernel, cfg.rho, env.D, cfg);
  PosteriorGrid grid(env.kernel, env.arms);
  const double fixed_c_sq = bandit_fixed_c_sq(cfg.sigma_sq, T, static_cast<std::size_t>(env.arms.cols()), cfg.rho);
  const double true_variance = env.noise.variance();

  BanditTrace trace;
  trace.records.reserve(T);
  WhitenedNoise whitened;
  double eta = std::sqrt(cfg.rho) * env.D;
  double cum_regret = 0.0;
  double g_sum = 0.0;

  try {
    for (std::size_t t = 1; t <= T; ++t) {
      grid.sync(state);
      const std::size_t arm = select_arm(grid, eta);
      const double mean = env.arm_means(static_cast<Index>(arm));
      const double eps = env.noise.sample(noise_rng);
      const double reward = mean + eps;
      const AppendResult appended = state.observe(grid.point(arm), reward);
      g_sum += appended.g_norm_sq;

      BanditRecord rec;
      rec.t = t;
      rec.arm = arm;
      rec.reward = reward;
      rec.eta = eta;
      rec.regret = std::max(0.0, env.best_mean() - mean);
      cum_regret += rec.regret;
      rec.cum_regret = cum_regret;
      rec.nu = true_variance * g_sum;
      if (options.record_self_norm) {
        whitened.push(state.gram(), eps);
        rec.s = std::sqrt(whitened.self_norm_sq(cfg.rho));
      }
      trace.records.push_back(rec);

      eta = state.ellipsoid_radius(state.confidence_radius(fixed_c_sq));
      if (options.check_containment && trace.contained && ellipsoid_deviation(state, env.theta_star) > eta) {
        trace.contained = false;
      }
    }
  } catch (const NumericError& e) {
    trace.aborted = true;
    trace.error = e.what();
  }

  trace.eta_final = eta;
  grid.sync(state);
  trace.posterior_mean = grid.means();
  trace.ucb.resize(static_cast<Index>(grid.size()));
  for (std::size_t a = 0; a < grid.size(); ++a) trace.ucb(static_cast<Index>(a)) = grid.ucb(a, eta);
  return trace;
}

}  // namespace selfnorm
