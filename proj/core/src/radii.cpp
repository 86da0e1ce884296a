#include "selfnorm/radii.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "selfnorm/error.hpp"

namespace selfnorm {

namespace {

void require_delta(double delta, const char* who) {
  if (!(delta > 0.0 && delta < 1.0)) {
    std::ostringstream msg;
    msg << who << ": delta must lie in (0, 1), got " << delta;
    throw DomainError(msg.str());
  }
}

void require_nonneg(double v, const char* what, const char* who) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    std::ostringstream msg;
    msg << who << ": " << what << " must be nonnegative and finite, got " << v;
    throw DomainError(msg.str());
  }
}

// Smallest s in [lo, hi] with f(s) >= 0 for increasing f, given f(lo) < 0 <= f(hi).
template <class F>
double increasing_root(F&& f, double lo, double f_lo, double hi, double f_hi, double abs_tol, int max_iter,
                       const char* who) {
  int side = 0;
  for (int iter = 0; iter < max_iter; ++iter) {
    if (hi - lo <= abs_tol + 4.0 * std::numeric_limits<double>::epsilon() * hi) return hi;
    double mid = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
    if (!(mid > lo && mid < hi) || iter % 8 == 7) mid = 0.5 * (lo + hi);
    const double f_mid = f(mid);
    if (f_mid == 0.0) return mid;
    if (f_mid < 0.0) {
      lo = mid;
      f_lo = f_mid;
      if (side == -1) f_hi *= 0.5;
      side = -1;
    } else {
      hi = mid;
      f_hi = f_mid;
      if (side == 1) f_lo *= 0.5;
      side = 1;
    }
  }
  std::ostringstream msg;
  msg << who << ": root finder did not converge in [" << lo << ", " << hi << "]";
  throw NumericError(msg.str());
}

}  // namespace

std::string to_string(RadiusMethod method) {
  switch (method) {
    case RadiusMethod::FixedBernstein:
      return "FixedBernstein";
    case RadiusMethod::FixedBennett:
      return "FixedBennett";
    case RadiusMethod::MixedBennett:
      return "MixedBennett";
    case RadiusMethod::EmpiricalMixedBennett:
      return "EmpiricalMixedBennett";
    case RadiusMethod::SubGaussianBaseline:
      return "SubGaussianBaseline";
  }
  return "unknown";
}

RadiusMethod radius_method_from_string(const std::string& name) {
  for (RadiusMethod m : {RadiusMethod::FixedBernstein, RadiusMethod::FixedBennett, RadiusMethod::MixedBennett,
                         RadiusMethod::EmpiricalMixedBennett, RadiusMethod::SubGaussianBaseline}) {
    if (name == to_string(m)) return m;
  }
  throw ConfigError("unknown radius method '" + name + "'");
}

void RadiusConfig::validate() const {
  require_delta(delta, "RadiusConfig");
  if (!(rho > 0.0)) throw DomainError("RadiusConfig: rho must be positive");
  if (!(B > 0.0)) throw DomainError("RadiusConfig: B must be positive");
  if (!(theta > 0.0)) throw DomainError("RadiusConfig: theta must be positive");
  if (subgaussian_scale && !(*subgaussian_scale > 0.0 && std::isfinite(*subgaussian_scale))) {
    throw DomainError("RadiusConfig: subgaussian_scale must be positive and finite");
  }
  if (!(sigma_sq >= 0.0)) throw DomainError("RadiusConfig: sigma_sq must be nonnegative");
  if (method == RadiusMethod::EmpiricalMixedBennett && !delta_split) {
    throw DomainError("RadiusConfig: EmpiricalMixedBennett requires delta1 and delta2");
  }
  if (delta_split) {
    const auto [d1, d2] = *delta_split;
    require_delta(d1, "RadiusConfig delta1");
    require_delta(d2, "RadiusConfig delta2");
    if (d1 + d2 > delta * (1.0 + 1e-12)) {
      std::ostringstream msg;
      msg << "RadiusConfig: delta1 + delta2 = " << d1 + d2 << " exceeds delta = " << delta;
      throw DomainError(msg.str());
    }
  }
}

double generic_radius(double lambda, double e_sum, double delta) {
  if (!(lambda > 0.0)) throw DomainError("generic_radius: lambda must be positive");
  require_nonneg(e_sum, "e_sum", "generic_radius");
  if (!(delta > 0.0)) throw DomainError("generic_radius: delta must be positive");
  return (e_sum + std::log(2.0 / delta)) / lambda;
}

double bernstein_radius(double B, double C, double delta) {
  require_delta(delta, "bernstein_radius");
  require_nonneg(B, "B", "bernstein_radius");
  require_nonneg(C, "C", "bernstein_radius");
  const double L = std::log(2.0 / delta);
  return B * L + C * std::sqrt(2.0 * L);
}

double bennett_radius(double B, double C, double delta, const ToleranceSpec& tol) {
  require_delta(delta, "bennett_radius");
  if (!(B > 0.0) || !(C > 0.0) || !std::isfinite(B) || !std::isfinite(C)) {
    std::ostringstream msg;
    msg << "bennett_radius: requires B > 0 and C > 0, got B=" << B << ", C=" << C;
    throw DomainError(msg.str());
  }
  const double L = std::log(2.0 / delta);
  const double c_sq = C * C;
  return (c_sq / B) * bennett_h_inv(B * B * L / c_sq, tol);
}

double log_mixture_value(double s, double nu, double theta, double B, const ToleranceSpec& tol) {
  require_nonneg(s, "s", "mixture_value");
  require_nonneg(nu, "nu", "mixture_value");
  if (!(theta > 0.0) || !(B > 0.0)) throw DomainError("mixture_value: theta and B must be positive");
  const double b_sq = B * B;
  const double c = theta / b_sq;
  const double a = (B * s + nu + theta) / b_sq;
  const double x = (nu + theta) / b_sq;
  const double prior = c * std::log(c) - log_gamma(c) - log_reg_upper_gamma(c, c, tol);
  const double posterior = log_gamma(a) + log_reg_upper_gamma(a, x, tol) - a * std::log(x);
  return prior + posterior + nu / b_sq;
}

double mixture_value(double s, double nu, double theta, double B, const ToleranceSpec& tol) {
  return std::exp(log_mixture_value(s, nu, theta, B, tol));
}

double mixed_bennett_radius(double nu, const RadiusConfig& cfg, const ToleranceSpec& tol) {
  require_nonneg(nu, "nu", "mixed_bennett_radius");
  require_delta(cfg.delta, "mixed_bennett_radius");
  if (!(cfg.theta > 0.0) || !(cfg.B > 0.0)) {
    throw DomainError("mixed_bennett_radius: theta and B must be positive");
  }
  const double target = std::log(2.0 / cfg.delta);
  auto f = [&](double s) { return log_mixture_value(s, nu, cfg.theta, cfg.B, tol) - target; };

  const double lo = 0.0;
  const double f_lo = f(lo);  // ln M(0, nu) <= 0 < target
  if (f_lo >= 0.0) return 0.0;
  double hi = cfg.B * target + std::sqrt(2.0 * nu * target);
  double f_hi = f(hi);
  double below = lo;
  double f_below = f_lo;
  for (int grow = 0; f_hi < 0.0; ++grow) {
    if (grow >= 200) throw NumericError("mixed_bennett_radius: could not bracket the root");
    below = hi;
    f_below = f_hi;
    hi *= 2.0;
    f_hi = f(hi);
  }
  const double abs_tol = 1e-13 * std::max(1.0, hi);
  return increasing_root(f, below, f_below, hi, f_hi, abs_tol, 4 * tol.max_iter, "mixed_bennett_radius");
}

double variance_ucb_log_mixture(double m, double residual_sq_sum, std::size_t count, double R) {
  const double n = static_cast<double>(count);
  const double x = n * m - residual_sq_sum;
  const double v = R * n * m;
  const double c = R * R;
  const double w = v + c;
  return std::numbers::ln2 + 0.5 * std::log(c / w) + x * x / (2.0 * w) + log_normal_cdf(x / std::sqrt(w));
}

double variance_ucb(double residual_sq_sum, std::size_t count, double B, double delta1,
                    std::optional<double> residual_bound) {
  require_delta(delta1, "variance_ucb");
  if (!(B > 0.0)) throw DomainError("variance_ucb: B must be positive");
  require_nonneg(residual_sq_sum, "residual_sq_sum", "variance_ucb");
  const double cap = B * B;
  if (count == 0) return cap;
  const double bound = residual_bound.value_or(2.0 * B);
  if (!(bound > 0.0)) throw DomainError("variance_ucb: residual bound must be positive");
  const double R = bound * bound;
  const double mean = residual_sq_sum / static_cast<double>(count);
  if (mean >= R) return cap;

  const double target = std::log(1.0 / delta1);
  auto f = [&](double m) { return variance_ucb_log_mixture(m, residual_sq_sum, count, R) - target; };
  // At m = mean the mixture is sqrt(c / (V + c)) <= 1 < 1/delta1.
  double lo = mean;
  double hi = std::min(R, cap);
  if (f(hi) < 0.0) return cap;
  for (int iter = 0; iter < 200 && hi - lo > 1e-14 * hi; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::min(cap, hi);
}

double empirical_mixed_bennett_radius(double g_norm_sq_sum, double variance_ucb_value, const RadiusConfig& cfg,
                                      const ToleranceSpec& tol) {
  require_nonneg(g_norm_sq_sum, "g_norm_sq_sum", "empirical_mixed_bennett_radius");
  require_nonneg(variance_ucb_value, "variance_ucb_value", "empirical_mixed_bennett_radius");
  if (!cfg.delta_split) throw DomainError("empirical_mixed_bennett_radius: delta split required");
  RadiusConfig at_delta2 = cfg;
  at_delta2.delta = cfg.delta_split->second;
  return mixed_bennett_radius(variance_ucb_value * g_norm_sq_sum, at_delta2, tol);
}

double subgaussian_baseline_radius(double sub_gauss_scale, double logdet_ratio, double delta) {
  require_nonneg(sub_gauss_scale, "sub_gauss_scale", "subgaussian_baseline_radius");
  require_nonneg(logdet_ratio, "logdet_ratio", "subgaussian_baseline_radius");
  require_delta(delta, "subgaussian_baseline_radius");
  return sub_gauss_scale * std::sqrt(2.0 * std::log(1.0 / delta) + logdet_ratio);
}

double mixture_nu(const RadiusInputs& in, const RadiusConfig& cfg) {
  const double variance = cfg.method == RadiusMethod::EmpiricalMixedBennett ? in.sigma_sq_ucb : cfg.sigma_sq;
  return variance * in.g_norm_sq_sum;
}

double mixture_delta(const RadiusConfig& cfg) {
  if (cfg.method == RadiusMethod::EmpiricalMixedBennett) {
    if (!cfg.delta_split) throw DomainError("EmpiricalMixedBennett requires a delta split");
    return cfg.delta_split->second;
  }
  return cfg.delta;
}

double confidence_radius(const RadiusInputs& in, const RadiusConfig& cfg, const ToleranceSpec& tol) {
  switch (cfg.method) {
    case RadiusMethod::FixedBernstein:
      return bernstein_radius(cfg.B, std::sqrt(in.fixed_c_sq), cfg.delta);
    case RadiusMethod::FixedBennett:
      if (in.fixed_c_sq <= 0.0) return bernstein_radius(cfg.B, 0.0, cfg.delta);
      return bennett_radius(cfg.B, std::sqrt(in.fixed_c_sq), cfg.delta, tol);
    case RadiusMethod::MixedBennett:
      return mixed_bennett_radius(mixture_nu(in, cfg), cfg, tol);
    case RadiusMethod::EmpiricalMixedBennett:
      return empirical_mixed_bennett_radius(in.g_norm_sq_sum, in.sigma_sq_ucb, cfg, tol);
    case RadiusMethod::SubGaussianBaseline:
      return subgaussian_baseline_radius(cfg.baseline_scale(), in.logdet_ratio, cfg.delta);
  }
  throw DomainError("confidence_radius: unknown method");
}

bool exceeds_radius(double s, const RadiusInputs& in, const RadiusConfig& cfg, const ToleranceSpec& tol) {
  if (cfg.method == RadiusMethod::MixedBennett || cfg.method == RadiusMethod::EmpiricalMixedBennett) {
    const double level = std::log(2.0 / mixture_delta(cfg));
    return log_mixture_value(s, mixture_nu(in, cfg), cfg.theta, cfg.B, tol) > level;
  }
  return s > confidence_radius(in, cfg, tol);
}

}  // namespace selfnorm
