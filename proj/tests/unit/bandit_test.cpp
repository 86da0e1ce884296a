#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "selfnorm/bandit.hpp"
#include "selfnorm/error.hpp"
#include "selfnorm/rng.hpp"

using namespace selfnorm;

namespace {

const KernelSpec kRbf{KernelFamily::Rbf, 0.01, 1};

BanditEnv default_env(std::uint64_t seed, NoiseModel noise) {
  Rng rng = Rng::for_stream(seed, 0);
  return make_bandit_env(BanditEnvConfig{}, kRbf, noise, rng);
}

RadiusConfig method_cfg(RadiusMethod method, double sigma_sq) {
  RadiusConfig cfg;
  cfg.method = method;
  cfg.sigma_sq = sigma_sq;
  cfg.delta_split = std::make_pair(0.05, 0.05);
  return cfg;
}

}  // namespace

TEST(SelectArm, TieGoesToLowestIndex) {
  Eigen::MatrixXd arms(1, 7);
  for (int a = 0; a < 7; ++a) arms(0, a) = 0.1 * a;
  PosteriorGrid grid(kRbf, arms);
  RegressionState state(kRbf, 0.05, 1.0, RadiusConfig{});
  grid.sync(state);
  EXPECT_EQ(select_arm(grid, 0.3), 0u);
  EXPECT_EQ(select_arm(state, arms, 0.3), 0u);
}

TEST(SelectArm, SingleArmAndEmptySet) {
  Eigen::MatrixXd one(1, 1);
  one(0, 0) = 0.4;
  RegressionState state(kRbf, 0.05, 1.0, RadiusConfig{});
  EXPECT_EQ(select_arm(state, one, 2.0), 0u);
  EXPECT_THROW(select_arm(state, Eigen::MatrixXd(1, 0), 2.0), DomainError);
  PosteriorGrid empty(kRbf, Eigen::MatrixXd(1, 0));
  EXPECT_THROW(select_arm(empty, 1.0), DomainError);
}

TEST(SelectArm, LinearFiveArmsBruteForce) {
  const KernelSpec lin{KernelFamily::Linear, 1.0, 2};
  Eigen::MatrixXd arms(2, 5);
  arms << 1.0, 0.0, 0.7, -0.5, 0.3,  //
      0.0, 1.0, 0.7, 0.5, -0.9;
  const double rho = 0.5;
  RegressionState state(lin, rho, 1.0, RadiusConfig{});
  const double x1[2] = {1.0, 0.0};
  const double x2[2] = {0.7, 0.7};
  state.observe(x1, 0.8);
  state.observe(x2, 0.1);
  state.observe(x1, 0.6);
  // Closed form: theta = (V + rho I)^{-1} X^T y, width = sqrt(x^T (V + rho I)^{-1} x).
  Eigen::Matrix2d A = rho * Eigen::Matrix2d::Identity();
  Eigen::Vector2d b = Eigen::Vector2d::Zero();
  const Eigen::Vector2d v1(1.0, 0.0), v2(0.7, 0.7);
  A += 2.0 * v1 * v1.transpose() + v2 * v2.transpose();
  b += 1.4 * v1 + 0.1 * v2;
  const Eigen::Vector2d theta = A.ldlt().solve(b);
  for (double eta : {0.0, 0.2, 1.0, 5.0}) {
    std::size_t best = 0;
    double best_value = -INFINITY;
    for (int a = 0; a < 5; ++a) {
      const Eigen::Vector2d x = arms.col(a);
      const double value = theta.dot(x) + eta * std::sqrt(x.dot(A.ldlt().solve(x)));
      EXPECT_NEAR(state.ucb_value({arms.col(a).data(), 2}, eta), value, 1e-12);
      if (value > best_value) {
        best_value = value;
        best = static_cast<std::size_t>(a);
      }
    }
    EXPECT_EQ(select_arm(state, arms, eta), best) << "eta=" << eta;
    PosteriorGrid grid(lin, arms);
    grid.sync(state);
    EXPECT_EQ(select_arm(grid, eta), best) << "eta=" << eta;
  }
}

TEST(BanditEnv, Construction) {
  const BanditEnv env = default_env(1, NoiseModel{});
  EXPECT_EQ(env.arms.cols(), 200);
  EXPECT_NEAR(env.arm_means.cwiseAbs().maxCoeff(), 1.0, 1e-12);
  EXPECT_EQ(env.theta_star.centers.cols(), 50);
  // The mean function is the kernel sum.
  for (int a = 0; a < 200; a += 17) {
    double direct = 0.0;
    for (int j = 0; j < 50; ++j) {
      const double d = env.arms(0, a) - env.theta_star.centers(0, j);
      direct += env.theta_star.weights(j) * std::exp(-d * d / (2.0 * 0.01 * 0.01));
    }
    EXPECT_NEAR(env.arm_means(a), direct, 1e-12);
  }
  const Eigen::VectorXd& w = env.theta_star.weights;
  double quad = 0.0;
  for (int i = 0; i < 50; ++i) {
    for (int j = 0; j < 50; ++j) {
      const double d = env.theta_star.centers(0, i) - env.theta_star.centers(0, j);
      quad += w(i) * w(j) * std::exp(-d * d / (2.0 * 0.01 * 0.01));
    }
  }
  EXPECT_NEAR(env.D, std::sqrt(quad), 1e-10);
  EXPECT_EQ(env.best_mean(), env.arm_means.maxCoeff());
}

TEST(RunEpisode, DeterministicForSameSeed) {
  const NoiseModel noise{NoiseFamily::RescaledBeta, 5.0};
  const BanditEnv env = default_env(4, noise);
  const RadiusConfig cfg = method_cfg(RadiusMethod::MixedBennett, noise.variance());
  Rng r1 = Rng::for_stream(4, 1);
  Rng r2 = Rng::for_stream(4, 1);
  const BanditTrace a = run_episode(env, cfg, 150, r1);
  const BanditTrace b = run_episode(env, cfg, 150, r2);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].arm, b.records[i].arm);
    EXPECT_EQ(a.records[i].reward, b.records[i].reward);
    EXPECT_EQ(a.records[i].eta, b.records[i].eta);
    EXPECT_EQ(a.records[i].s, b.records[i].s);
  }
  EXPECT_EQ(a.eta_final, b.eta_final);
}

TEST(RunEpisode, RegretNonnegativeAndCumulative) {
  const NoiseModel noise{NoiseFamily::RescaledUniform, 0.0};
  for (RadiusMethod m : {RadiusMethod::FixedBernstein, RadiusMethod::FixedBennett, RadiusMethod::MixedBennett,
                         RadiusMethod::EmpiricalMixedBennett, RadiusMethod::SubGaussianBaseline}) {
    const BanditEnv env = default_env(9, noise);
    Rng rng = Rng::for_stream(9, 1);
    const BanditTrace trace = run_episode(env, method_cfg(m, noise.variance()), 200, rng);
    ASSERT_FALSE(trace.aborted) << trace.error;
    ASSERT_EQ(trace.records.size(), 200u);
    double prev = 0.0;
    for (const BanditRecord& rec : trace.records) {
      EXPECT_GE(rec.regret, 0.0);
      EXPECT_GE(rec.cum_regret, prev);
      prev = rec.cum_regret;
    }
    EXPECT_NEAR(trace.records.front().eta, std::sqrt(0.05) * env.D, 1e-12);
  }
}

// With no noise any B > 0 bounds it; a tiny B and sigma^2 make J_t negligible,
// so eta_t is close to sqrt(rho) D. With B = 1 the radii keep a B ln(2/delta)
// term whatever sigma^2 is.
RadiusConfig zero_noise_cfg() {
  RadiusConfig cfg;
  cfg.method = RadiusMethod::FixedBernstein;
  cfg.B = 1e-3;
  cfg.sigma_sq = 1e-6;
  return cfg;
}

TEST(RunEpisode, ZeroNoiseRegretVanishes) {
  const NoiseModel noise{NoiseFamily::Zero, 0.0};
  BanditEnvConfig small;
  small.n_arms = 50;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    Rng env_rng = Rng::for_stream(seed, 0);
    const BanditEnv env = make_bandit_env(small, {KernelFamily::Rbf, 0.05, 1}, noise, env_rng);
    Rng rng = Rng::for_stream(seed, 1);
    const BanditTrace trace = run_episode(env, zero_noise_cfg(), 500, rng);
    ASSERT_FALSE(trace.aborted) << trace.error;
    const double range = env.arm_means.maxCoeff() - env.arm_means.minCoeff();
    EXPECT_LT(trace.cum_regret() / 500.0, 0.1 * range) << "seed=" << seed;
  }
}

TEST(RunEpisode, ZeroNoiseRegretFlattensOnDefaultGrid) {
  // 200 arms at lengthscale 0.01 take most of 500 rounds to explore, so only
  // the late-round average is small here.
  const NoiseModel noise{NoiseFamily::Zero, 0.0};
  const BanditEnv env = default_env(2, noise);
  Rng rng = Rng::for_stream(2, 1);
  const BanditTrace trace = run_episode(env, zero_noise_cfg(), 500, rng);
  ASSERT_FALSE(trace.aborted) << trace.error;
  const double range = env.arm_means.maxCoeff() - env.arm_means.minCoeff();
  const double late = (trace.cum_regret() - trace.records[399].cum_regret) / 100.0;
  EXPECT_LT(late, 0.1 * range);
  EXPECT_LT(late, (trace.records[99].cum_regret) / 100.0);
}

TEST(RunEpisode, RegretRatioBounded) {
  const NoiseModel noise{NoiseFamily::RescaledBeta, 5.0};
  const double sigma = std::sqrt(noise.variance());
  const double rho = 0.05;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const BanditEnv env = default_env(seed, noise);
    for (std::size_t T : {100u, 250u, 500u}) {
      Rng rng = Rng::for_stream(seed, 1);
      const BanditTrace trace = run_episode(env, method_cfg(RadiusMethod::MixedBennett, noise.variance()), T, rng);
      // Information gain proxy: half the log-determinant of the pulled arms.
      GramState gram(env.kernel, rho);
      for (const BanditRecord& rec : trace.records) gram.append({env.arms.col(static_cast<Eigen::Index>(rec.arm)).data(), 1});
      const double gamma = 0.5 * gram.logdet_ratio();
      const double t = static_cast<double>(T);
      const double envelope = sigma * gamma * std::sqrt(t) + std::sqrt(rho * gamma * t);
      EXPECT_LT(trace.cum_regret() / envelope, 50.0) << "seed=" << seed << " T=" << T;
    }
  }
}

TEST(RunEpisode, ContainmentFailuresRare) {
  const NoiseModel noise{NoiseFamily::RescaledBeta, 5.0};
  const RadiusConfig cfg = method_cfg(RadiusMethod::MixedBennett, noise.variance());
  const std::size_t seeds = 500;
  std::size_t failures = 0;
  EpisodeOptions options;
  options.record_self_norm = false;
  options.check_containment = true;
  for (std::size_t seed = 0; seed < seeds; ++seed) {
    const BanditEnv env = default_env(1000 + seed, noise);
    Rng rng = Rng::for_stream(1000 + seed, 1);
    const BanditTrace trace = run_episode(env, cfg, 60, rng, options);
    if (!trace.contained) ++failures;
  }
  EXPECT_LE(static_cast<double>(failures) / seeds, cfg.delta);
}

TEST(BanditFixedCSq, Formula) {
  EXPECT_NEAR(bandit_fixed_c_sq(0.5, 10, 200, 0.05), 0.5 * 10.0, 1e-12);
  EXPECT_NEAR(bandit_fixed_c_sq(1.0, 100000, 3, 0.05), 6.0 * std::log1p(100000.0 / 0.15), 1e-9);
}
