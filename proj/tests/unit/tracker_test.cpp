#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "selfnorm/error.hpp"
#include "selfnorm/rng.hpp"
#include "selfnorm/tracker.hpp"

using namespace selfnorm;

TEST(Tracker, StartsAtZero) {
  KernelTracker tr(GramState({KernelFamily::Rbf, 0.01, 1}, 0.05));
  EXPECT_EQ(tr.t(), 0u);
  EXPECT_DOUBLE_EQ(tr.self_norm_stat(), 0.0);
  EXPECT_DOUBLE_EQ(tr.nu(), 0.0);
  EXPECT_DOUBLE_EQ(tr.info_gain_bound(), 0.0);
}

TEST(Tracker, SingleStepClosedForm) {
  // s_1 = |eps| |G_1| with |G_1|^2 = k / (k + rho) for k(x, x) = 1.
  const double rho = 0.5;
  KernelTracker tr(GramState({KernelFamily::Rbf, 0.01, 1}, rho));
  tr.step(std::vector<double>{0.2}, 0.8, 0.25);
  const double g_sq = 1.0 / (1.0 + rho);
  EXPECT_NEAR(tr.self_norm_stat(), 0.8 * std::sqrt(g_sq), 1e-15);
  EXPECT_NEAR(tr.nu(), 0.25 * g_sq, 1e-15);
  EXPECT_THROW(tr.step(std::vector<double>{0.3}, 0.1, -1.0), DomainError);
}

TEST(Tracker, KernelAndLinearAgreeWithDenseOracle) {
  constexpr int kDim = 4;
  const double rho = 0.3;
  KernelTracker kt(GramState({KernelFamily::Linear, 1.0, kDim}, rho));
  LinearTracker lt(FeatureGram(kDim, rho));
  oracle::Dense dense(kDim, rho);
  Rng rng(3);
  for (int t = 0; t < 300; ++t) {
    Eigen::VectorXd x(kDim);
    for (int i = 0; i < kDim; ++i) x(i) = rng.normal();
    const double eps = rng.uniform(-1.0, 1.0);
    const std::vector<double> xv(x.data(), x.data() + kDim);
    kt.step(xv, eps, 1.0 / 3.0);
    lt.step(xv, eps, 1.0 / 3.0);
    dense.add(x, eps);
    if (t % 25 == 0) {
      EXPECT_NEAR(kt.self_norm_stat(), dense.self_norm(), 1e-8);
      EXPECT_NEAR(lt.self_norm_stat(), dense.self_norm(), 1e-8);
    }
  }
  EXPECT_NEAR(kt.nu(), lt.nu(), 1e-9);
  EXPECT_NEAR(kt.g_norm_sq_sum(), lt.g_norm_sq_sum(), 1e-9);
  EXPECT_LE(kt.g_norm_sq_sum(), kt.info_gain_bound());
  const TrackerSnapshot snap = kt.snapshot();
  EXPECT_EQ(snap.t, 300u);
  EXPECT_DOUBLE_EQ(snap.s, kt.self_norm_stat());
}

TEST(Supermartingale, ValueAndOverflowSafety) {
  EXPECT_DOUBLE_EQ(supermartingale_value(0.0, 0.5, 0.0), 1.0);
  EXPECT_NEAR(supermartingale_value(2.0, 0.5, 0.3), std::cosh(1.0) * std::exp(-0.3), 1e-15);
  // Branches agree at the switch point.
  const double below = supermartingale_value(30.0, 1.0, 2.0);
  const double above = supermartingale_value(30.0 + 1e-12, 1.0, 2.0);
  EXPECT_NEAR(above / below, 1.0, 1e-10);
  EXPECT_TRUE(std::isfinite(supermartingale_value(800.0, 1.0, 100.0)));
  EXPECT_THROW(supermartingale_value(1.0, -0.1, 0.0), DomainError);
}
