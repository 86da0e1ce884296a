#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>

#include "selfnorm/specfun.hpp"

namespace selfnorm {

enum class RadiusMethod {
  FixedBernstein,
  FixedBennett,
  MixedBennett,
  EmpiricalMixedBennett,
  SubGaussianBaseline,
};

std::string to_string(RadiusMethod method);
RadiusMethod radius_method_from_string(const std::string& name);

struct RadiusConfig {
  double delta = 0.1;
  double rho = 0.05;
  double B = 1.0;
  double sigma_sq = 1.0;
  double theta = 1.0;
  RadiusMethod method = RadiusMethod::MixedBennett;
  /// (delta1, delta2): variance-sequence level and radius level for the empirical method.
  std::optional<std::pair<double, double>> delta_split;
  /// Sub-Gaussian parameter of the baseline; B when unset (Hoeffding for |eps| <= B).
  std::optional<double> subgaussian_scale;

  [[nodiscard]] double baseline_scale() const { return subgaussian_scale.value_or(B); }
  /// Throws DomainError when an invariant is violated.
  void validate() const;
};

/// (e_sum + ln(2/delta)) / lambda, the fixed-lambda bound.
double generic_radius(double lambda, double e_sum, double delta);

/// B L + C sqrt(2 L) with L = ln(2/delta); the exact minimum of generic_radius
/// over lambda in (0, 1/B) with Bernstein compensator.
double bernstein_radius(double B, double C, double delta);

/// (C^2 / B) h^{-1}(B^2 L / C^2); requires B > 0 and C > 0.
double bennett_radius(double B, double C, double delta, const ToleranceSpec& tol = {});

/// ln of the gamma-mixed Bennett supermartingale at (s, nu).
///
/// With c = theta/B^2, a = (B s + nu + theta)/B^2 and x = (nu + theta)/B^2:
///   c ln c - ln Gamma(c) - ln Q(c, c) + ln Gamma(a) + ln Q(a, x) - a ln x + nu/B^2.
double log_mixture_value(double s, double nu, double theta, double B, const ToleranceSpec& tol = {});

/// exp(log_mixture_value); overflows to +inf for very large s.
double mixture_value(double s, double nu, double theta, double B, const ToleranceSpec& tol = {});

/// The s* solving mixture_value(s*, nu) = 2/delta.
///
/// The bracket starts at [0, B L + sqrt(2 nu L)] and is doubled until it holds
/// the root; Illinois regula falsi with bisection fallback then narrows it.
double mixed_bennett_radius(double nu, const RadiusConfig& cfg, const ToleranceSpec& tol = {});

/// Anytime upper confidence value for the noise variance from squared residuals.
///
/// Residuals are treated as Z_i in [0, R] with R = residual_bound^2 (default
/// (2B)^2). For a candidate mean m the process
///   exp(lambda (t m - sum Z) - lambda^2 R t m / 2)
/// is a supermartingale for every lambda >= 0; mixing lambda over a half-normal
/// with precision R^2 gives a closed form, and the returned value is the
/// largest m whose mixture stays below 1/delta1, capped at B^2.
/// Returns B^2 when count = 0.
double variance_ucb(double residual_sq_sum, std::size_t count, double B, double delta1,
                    std::optional<double> residual_bound = std::nullopt);

/// ln of the variance-sequence mixture at candidate mean m.
double variance_ucb_log_mixture(double m, double residual_sq_sum, std::size_t count, double R);

/// mixed_bennett_radius(variance_ucb_value * g_norm_sq_sum) at level delta2.
double empirical_mixed_bennett_radius(double g_norm_sq_sum, double variance_ucb_value, const RadiusConfig& cfg,
                                      const ToleranceSpec& tol = {});

/// scale * sqrt(2 ln(1/delta) + logdet_ratio).
double subgaussian_baseline_radius(double sub_gauss_scale, double logdet_ratio, double delta);

/// Per-time quantities a radius may depend on.
struct RadiusInputs {
  double g_norm_sq_sum = 0.0;  // sum_i |G_i|^2
  double logdet_ratio = 0.0;   // ln det(I + K_t / rho)
  double fixed_c_sq = 0.0;     // deterministic C^2 for the fixed-horizon methods
  double sigma_sq_ucb = 0.0;   // variance_ucb value for the empirical method
};

/// Pseudo-variance the mixture methods use: sigma^2 or the variance UCB times sum |G_i|^2.
double mixture_nu(const RadiusInputs& in, const RadiusConfig& cfg);

/// Mixture level: delta for MixedBennett, delta2 for EmpiricalMixedBennett.
double mixture_delta(const RadiusConfig& cfg);

/// J_t(delta) for cfg.method. The Bennett method with C = 0 falls back to the
/// Bernstein closed form, which is its limit.
double confidence_radius(const RadiusInputs& in, const RadiusConfig& cfg, const ToleranceSpec& tol = {});

/// s > J_t(delta). For the mixture methods this is decided by comparing the
/// mixture at s with 2/delta, which needs no root finding.
bool exceeds_radius(double s, const RadiusInputs& in, const RadiusConfig& cfg, const ToleranceSpec& tol = {});

}  // namespace selfnorm
