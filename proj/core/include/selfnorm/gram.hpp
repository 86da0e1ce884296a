#pragma once

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "selfnorm/kernel.hpp"

namespace selfnorm {

/// Outcome of adding one covariate to a regularized Gram operator.
struct AppendResult {
  /// |(rho I + V_t)^{-1/2} phi(x_t)|^2 with V_t already including x_t; always in [0, 1].
  double g_norm_sq = 0.0;
  /// ln(1 + |(rho I + V_{t-1})^{-1/2} phi(x_t)|^2), the log-determinant increment.
  double logdet_increment = 0.0;
};

/// Kernel (dual) representation of rho I + V_t through the t x t matrix K_t + rho I.
///
/// Holds the Gram matrix and a lower Cholesky factor that is extended by one
/// row per append. Every `kRefactorInterval` appends the factor is recomputed
/// from K_t to bound drift; `factor_generation()` changes whenever that happens.
class GramState {
 public:
  static constexpr std::size_t kRefactorInterval = 128;

  GramState(KernelSpec spec, double rho);

  AppendResult append(std::span<const double> x);

  /// |(rho I + V_t)^{-1/2} phi(x)|^2 = (k(x,x) - k_t(x)^T (K_t + rho I)^{-1} k_t(x)) / rho.
  [[nodiscard]] double ridge_norm_sq(std::span<const double> x) const;

  /// s^2 = eps^T K (K + rho I)^{-1} eps, evaluated as |K w|^2 + rho w^T K w with
  /// w = (K + rho I)^{-1} eps so that no cancellation occurs.
  [[nodiscard]] double self_norm_sq(std::span<const double> noises) const;

  [[nodiscard]] double logdet_ratio() const { return logdet_; }
  [[nodiscard]] std::size_t size() const { return size_; }
  [[nodiscard]] double rho() const { return rho_; }
  [[nodiscard]] const KernelSpec& kernel() const { return spec_; }
  [[nodiscard]] std::uint64_t factor_generation() const { return generation_; }

  [[nodiscard]] std::span<const double> point(std::size_t i) const;

  /// k_t(x) = (k(x_1, x), ..., k(x_t, x)).
  [[nodiscard]] Eigen::VectorXd cross_kernel(std::span<const double> x) const;
  /// L^{-1} b where L L^T = K_t + rho I.
  [[nodiscard]] Eigen::VectorXd solve_lower(const Eigen::VectorXd& b) const;
  /// (K_t + rho I)^{-1} b.
  [[nodiscard]] Eigen::VectorXd solve(const Eigen::VectorXd& b) const;

  [[nodiscard]] Eigen::Block<const Eigen::MatrixXd> gram() const {
    return gram_.topLeftCorner(static_cast<Eigen::Index>(size_), static_cast<Eigen::Index>(size_));
  }
  [[nodiscard]] Eigen::Block<const Eigen::MatrixXd> chol() const {
    return chol_.topLeftCorner(static_cast<Eigen::Index>(size_), static_cast<Eigen::Index>(size_));
  }

  /// Recomputes the Cholesky factor of K_t + rho I from scratch.
  void refactor();

 private:
  void reserve(std::size_t capacity);

  KernelSpec spec_;
  double rho_;
  std::size_t size_ = 0;
  Eigen::MatrixXd points_;  // input_dim x capacity
  Eigen::MatrixXd gram_;    // capacity x capacity, symmetric
  Eigen::MatrixXd chol_;    // capacity x capacity, lower triangle used
  double logdet_ = 0.0;
  std::uint64_t generation_ = 0;
};

/// Running u = L^{-1} eps for the noises of the points in a GramState, so that
/// s^2 = |eps|^2 - rho |u|^2 costs O(t) per point instead of O(t^2).
///
/// `push` must follow each `GramState::append`; u is recomputed from scratch
/// whenever the state's Cholesky factor has been rebuilt.
class WhitenedNoise {
 public:
  void push(const GramState& gram, double eps);
  [[nodiscard]] double self_norm_sq(double rho) const;
  [[nodiscard]] std::span<const double> noises() const { return noises_; }

 private:
  std::vector<double> noises_;
  Eigen::VectorXd u_;
  double eps_sq_ = 0.0;
  std::uint64_t generation_ = 0;
};

/// Explicit (primal) representation of rho I + V_t for the Linear kernel in R^d.
///
/// Keeps (rho I + V_t)^{-1} up to date with Sherman-Morrison, so each append
/// costs O(d^2) regardless of t. Used for long streams where the t x t Gram
/// matrix would not fit.
class FeatureGram {
 public:
  static constexpr std::size_t kRefreshInterval = 128;

  FeatureGram(std::size_t dim, double rho);

  AppendResult append(std::span<const double> x);
  [[nodiscard]] double ridge_norm_sq(std::span<const double> x) const;
  /// M^T (rho I + V_t)^{-1} M with M = sum_i x_i eps_i.
  [[nodiscard]] double self_norm_sq(std::span<const double> noises) const;

  [[nodiscard]] double logdet_ratio() const { return logdet_; }
  [[nodiscard]] std::size_t size() const { return size_; }
  [[nodiscard]] double rho() const { return rho_; }
  [[nodiscard]] std::size_t dim() const { return dim_; }
  [[nodiscard]] const Eigen::MatrixXd& inverse() const { return inverse_; }
  /// m^T (rho I + V_t)^{-1} m.
  [[nodiscard]] double inverse_quad(const Eigen::VectorXd& m) const;

 private:
  std::size_t dim_;
  double rho_;
  std::size_t size_ = 0;
  Eigen::MatrixXd points_;   // dim x capacity
  Eigen::MatrixXd gram_op_;  // V_t
  Eigen::MatrixXd inverse_;  // (rho I + V_t)^{-1}
  double logdet_ = 0.0;
};

/// Operations the self-normalized tracker needs from a Gram representation.
template <class G>
concept RidgeGeometry = requires(G g, const G cg, std::span<const double> x) {
  { g.append(x) } -> std::same_as<AppendResult>;
  { cg.ridge_norm_sq(x) } -> std::convertible_to<double>;
  { cg.self_norm_sq(x) } -> std::convertible_to<double>;
  { cg.logdet_ratio() } -> std::convertible_to<double>;
  { cg.size() } -> std::convertible_to<std::size_t>;
};

}  // namespace selfnorm
