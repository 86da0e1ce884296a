#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "selfnorm/gram.hpp"
#include "selfnorm/kernel.hpp"
#include "selfnorm/radii.hpp"

namespace selfnorm {

/// Online kernel ridge regression f_t(x) = k_t(x)^T (K_t + rho I)^{-1} Y_t with
/// the bookkeeping needed for anytime confidence ellipsoids.
///
/// Alongside the Gram state it keeps z = L^{-1} Y (extended per observation),
/// the running sum of |G_i|^2, and clipped squared residuals of each target
/// against the prediction made before that target was seen.
class RegressionState {
 public:
  RegressionState(KernelSpec kernel, double rho, double D, RadiusConfig radius_cfg);

  /// Adds (x, y); returns the whitened-norm and log-determinant increment of x.
  AppendResult observe(std::span<const double> x, double y);

  /// Posterior mean; 0 before the first observation.
  [[nodiscard]] double predict(std::span<const double> x) const;
  [[nodiscard]] double ridge_norm_sq(std::span<const double> x) const { return gram_.ridge_norm_sq(x); }
  /// J + sqrt(rho) D.
  [[nodiscard]] double ellipsoid_radius(double J) const;
  /// predict(x) + eta |(V_t + rho I)^{-1/2} phi(x)|.
  [[nodiscard]] double ucb_value(std::span<const double> x, double eta) const;

  /// Inputs for confidence_radius at the current time.
  [[nodiscard]] RadiusInputs radius_inputs(double fixed_c_sq) const;
  /// J_t(delta) for the configured method.
  [[nodiscard]] double confidence_radius(double fixed_c_sq) const;
  /// variance_ucb over the residuals seen so far at level delta1 (B^2 without a split).
  [[nodiscard]] double sigma_sq_ucb() const;

  [[nodiscard]] std::size_t size() const { return gram_.size(); }
  [[nodiscard]] const GramState& gram() const { return gram_; }
  [[nodiscard]] std::span<const double> targets() const { return targets_; }
  [[nodiscard]] double D() const { return D_; }
  [[nodiscard]] double rho() const { return gram_.rho(); }
  [[nodiscard]] const RadiusConfig& radius_config() const { return cfg_; }
  [[nodiscard]] double g_norm_sq_sum() const { return g_norm_sq_sum_; }
  [[nodiscard]] double residual_sq_sum() const { return residual_sq_sum_; }
  /// L^{-1} Y for the current Cholesky factor L.
  [[nodiscard]] const Eigen::VectorXd& whitened_targets() const { return z_; }
  /// (K_t + rho I)^{-1} Y.
  [[nodiscard]] const Eigen::VectorXd& dual_weights() const;

 private:
  GramState gram_;
  double D_;
  RadiusConfig cfg_;
  std::vector<double> targets_;
  Eigen::VectorXd z_;
  std::uint64_t z_generation_ = 0;
  mutable Eigen::VectorXd alpha_;
  mutable bool alpha_valid_ = true;
  double g_norm_sq_sum_ = 0.0;
  double residual_sq_sum_ = 0.0;
};

/// f = sum_j w_j k(c_j, .), an element of the RKHS spanned by finitely many points.
struct KernelExpansion {
  KernelSpec kernel;
  Eigen::MatrixXd centers;  // input_dim x m
  Eigen::VectorXd weights;

  [[nodiscard]] double operator()(std::span<const double> x) const;
  /// w^T K_c w.
  [[nodiscard]] double rkhs_norm_sq() const;
};

/// |(V_t + rho I)^{1/2} (theta_t(rho) - theta*)|, evaluated with kernels as
/// sqrt(rho |g|^2 + sum_i g(x_i)^2) for g = theta_t(rho) - theta*.
double ellipsoid_deviation(const RegressionState& state, const KernelExpansion& theta_star);

/// Posterior mean and ridge norm on a fixed candidate set, kept in step with a
/// RegressionState at O(n t) per observation.
///
/// Column a of the cache holds v_a = L^{-1} k_t(a); the mean is v_a^T z and the
/// ridge norm is (k(a, a) - |v_a|^2) / rho. The cache is rebuilt whenever the
/// state's Cholesky factor is recomputed.
class PosteriorGrid {
 public:
  PosteriorGrid(KernelSpec kernel, Eigen::MatrixXd points);

  void sync(const RegressionState& state);

  [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(points_.cols()); }
  [[nodiscard]] std::span<const double> point(std::size_t a) const;
  [[nodiscard]] double mean(std::size_t a) const { return mean_[static_cast<Eigen::Index>(a)]; }
  [[nodiscard]] double ridge_norm_sq(std::size_t a) const;
  [[nodiscard]] double ucb(std::size_t a, double eta) const;
  [[nodiscard]] const Eigen::VectorXd& means() const { return mean_; }

 private:
  void rebuild(const RegressionState& state);
  void extend_row(const RegressionState& state, std::size_t j);

  KernelSpec kernel_;
  Eigen::MatrixXd points_;  // input_dim x n
  Eigen::VectorXd self_kernel_;
  Eigen::MatrixXd v_;  // capacity x n
  Eigen::VectorXd v_norm_sq_;
  Eigen::VectorXd mean_;
  double rho_ = 1.0;
  std::size_t rows_ = 0;
  std::uint64_t generation_ = 0;
};

}  // namespace selfnorm
