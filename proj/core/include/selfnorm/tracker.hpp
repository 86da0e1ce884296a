#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <numbers>
#include <span>
#include <sstream>
#include <utility>
#include <vector>

#include "selfnorm/error.hpp"
#include "selfnorm/gram.hpp"

namespace selfnorm {

/// One row of tracker state, matching the harness snapshot columns.
struct TrackerSnapshot {
  std::size_t t = 0;
  double s = 0.0;
  double nu = 0.0;
  double g_norm_sq_sum = 0.0;
  double logdet_ratio = 0.0;
};

/// Online self-normalized statistic s_t = |(rho I + V_t)^{-1/2} M_t| for a
/// stream of (x_t, eps_t) pairs, together with the whitened norms |G_t|^2
/// and the pseudo-variance nu_t = sum_i sigma_i^2 |G_i|^2.
///
/// `step` appends x_t to the Gram representation before measuring |G_t|, so
/// V_t includes x_t x_t^T and |G_t| <= 1 holds structurally.
template <RidgeGeometry Geometry>
class SelfNormTracker {
 public:
  explicit SelfNormTracker(Geometry geometry) : geometry_(std::move(geometry)) {}

  void step(std::span<const double> x, double eps, double sigma_sq) {
    if (!(sigma_sq >= 0.0)) {
      std::ostringstream msg;
      msg << "SelfNormTracker::step: variance proxy must be nonnegative, got " << sigma_sq;
      throw DomainError(msg.str());
    }
    const AppendResult appended = geometry_.append(x);
    noises_.push_back(eps);
    g_norm_sq_.push_back(appended.g_norm_sq);
    g_norm_sq_sum_ += appended.g_norm_sq;
    nu_ += sigma_sq * appended.g_norm_sq;
    if constexpr (std::same_as<Geometry, GramState>) {
      whitened_.push(geometry_, eps);
      s_ = std::sqrt(whitened_.self_norm_sq(geometry_.rho()));
    } else if constexpr (std::same_as<Geometry, FeatureGram>) {
      if (m_.size() == 0) m_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(x.size()));
      m_ += eps * Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
      s_ = std::sqrt(geometry_.inverse_quad(m_));
    } else {
      s_ = std::sqrt(std::max(0.0, geometry_.self_norm_sq(noises_)));
    }
  }

  /// s_t; zero before the first step.
  [[nodiscard]] double self_norm_stat() const { return s_; }
  /// 2 ln det(I + K_t / rho), an upper bound on sum_i |G_i|^2.
  [[nodiscard]] double info_gain_bound() const { return 2.0 * geometry_.logdet_ratio(); }

  [[nodiscard]] double nu() const { return nu_; }
  [[nodiscard]] double g_norm_sq_sum() const { return g_norm_sq_sum_; }
  [[nodiscard]] double logdet_ratio() const { return geometry_.logdet_ratio(); }
  [[nodiscard]] std::size_t t() const { return noises_.size(); }
  [[nodiscard]] std::span<const double> noises() const { return noises_; }
  [[nodiscard]] std::span<const double> g_norm_sq_history() const { return g_norm_sq_; }
  [[nodiscard]] const Geometry& geometry() const { return geometry_; }

  [[nodiscard]] TrackerSnapshot snapshot() const {
    return {t(), s_, nu_, g_norm_sq_sum_, geometry_.logdet_ratio()};
  }

 private:
  Geometry geometry_;
  std::vector<double> noises_;
  std::vector<double> g_norm_sq_;
  double g_norm_sq_sum_ = 0.0;
  double nu_ = 0.0;
  double s_ = 0.0;
  WhitenedNoise whitened_;
  Eigen::VectorXd m_;  // sum_i x_i eps_i, primal geometry only
};

using KernelTracker = SelfNormTracker<GramState>;
using LinearTracker = SelfNormTracker<FeatureGram>;

/// cosh(lambda s) exp(-e_sum), evaluated in log space once lambda s > 30.
inline double supermartingale_value(double s, double lambda, double e_sum) {
  if (!(lambda >= 0.0) || !(e_sum >= 0.0) || !(s >= 0.0)) {
    throw DomainError("supermartingale_value: s, lambda and e_sum must be nonnegative");
  }
  const double z = lambda * s;
  if (z <= 30.0) return std::cosh(z) * std::exp(-e_sum);
  return std::exp(z - e_sum + std::log1p(std::exp(-2.0 * z)) - std::numbers::ln2);
}

template <RidgeGeometry Geometry>
double supermartingale_value(const SelfNormTracker<Geometry>& tracker, double lambda, double e_sum) {
  return supermartingale_value(tracker.self_norm_stat(), lambda, e_sum);
}

}  // namespace selfnorm
