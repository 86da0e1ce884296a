#include "selfnorm/specfun.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "selfnorm/error.hpp"

namespace selfnorm {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kTiny = std::numeric_limits<double>::min() / kEps;

int iteration_budget(double a, const ToleranceSpec& tol) {
  return tol.max_iter + static_cast<int>(std::ceil(9.0 * std::sqrt(a)));
}

void check_gamma_args(double a, double x) {
  if (!(a > 0.0) || !std::isfinite(a)) {
    std::ostringstream msg;
    msg << "incomplete gamma: shape must be positive and finite, got " << a;
    throw DomainError(msg.str());
  }
  if (!(x >= 0.0) || std::isnan(x)) {
    std::ostringstream msg;
    msg << "incomplete gamma: argument must be nonnegative, got " << x;
    throw DomainError(msg.str());
  }
}

// Series sum S with P(a, x) = exp(a ln x - x - lnGamma(a + 1)) * S.
double lower_series(double a, double x, int budget) {
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k <= budget; ++k) {
    term *= x / (a + k);
    sum += term;
    if (term < sum * kEps) {
      return sum;
    }
  }
  std::ostringstream msg;
  msg << "incomplete gamma series did not converge for a=" << a << ", x=" << x;
  throw NumericError(msg.str());
}

// Continued fraction h with Q(a, x) = exp(a ln x - x - lnGamma(a)) * h.
double upper_continued_fraction(double a, double x, int budget) {
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= budget; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) {
      return h;
    }
  }
  std::ostringstream msg;
  msg << "incomplete gamma continued fraction did not converge for a=" << a << ", x=" << x;
  throw NumericError(msg.str());
}

}  // namespace

void ToleranceSpec::validate() const {
  if (!(abs_tol > 0.0) || !(rel_tol > 0.0) || max_iter < 1) {
    throw DomainError("ToleranceSpec requires abs_tol > 0, rel_tol > 0 and max_iter >= 1");
  }
}

double log_gamma(double a) {
  if (!(a > 0.0) || !std::isfinite(a)) {
    std::ostringstream msg;
    msg << "log_gamma: argument must be positive and finite, got " << a;
    throw DomainError(msg.str());
  }
  // Shift into the Stirling regime z >= 10; the shift product stays < 10^14.
  double shift_log = 0.0;
  double z = a;
  if (z < 10.0) {
    double prod = 1.0;
    while (z < 10.0) {
      prod *= z;
      z += 1.0;
    }
    shift_log = std::log(prod);
  }
  const double inv = 1.0 / z;
  const double inv2 = inv * inv;
  // Bernoulli-number tail of the Stirling expansion, truncated after z^-13.
  const double series =
      inv * (1.0 / 12.0 +
             inv2 * (-1.0 / 360.0 +
                     inv2 * (1.0 / 1260.0 +
                             inv2 * (-1.0 / 1680.0 +
                                     inv2 * (1.0 / 1188.0 +
                                             inv2 * (-691.0 / 360360.0 + inv2 * (1.0 / 156.0)))))));
  const double half_log_two_pi = 0.5 * std::log(2.0 * std::numbers::pi);
  return (z - 0.5) * std::log(z) - z + half_log_two_pi + series - shift_log;
}

double reg_upper_gamma(double a, double x, const ToleranceSpec& tol) {
  tol.validate();
  check_gamma_args(a, x);
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  const int budget = iteration_budget(a, tol);
  if (x < a + 1.0) {
    const double lower = std::exp(a * std::log(x) - x - log_gamma(a + 1.0)) * lower_series(a, x, budget);
    return std::clamp(1.0 - lower, 0.0, 1.0);
  }
  const double h = upper_continued_fraction(a, x, budget);
  return std::clamp(std::exp(a * std::log(x) - x - log_gamma(a)) * h, 0.0, 1.0);
}

double log_reg_upper_gamma(double a, double x, const ToleranceSpec& tol) {
  tol.validate();
  check_gamma_args(a, x);
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return -std::numeric_limits<double>::infinity();
  const int budget = iteration_budget(a, tol);
  if (x < a + 1.0) {
    const double lower = std::exp(a * std::log(x) - x - log_gamma(a + 1.0)) * lower_series(a, x, budget);
    return std::log1p(-std::min(lower, 1.0));
  }
  const double h = upper_continued_fraction(a, x, budget);
  return a * std::log(x) - x - log_gamma(a) + std::log(h);
}

double bennett_h(double u) {
  if (!(u >= 0.0)) {
    std::ostringstream msg;
    msg << "bennett_h: argument must be nonnegative, got " << u;
    throw DomainError(msg.str());
  }
  if (u < 1e-3) {
    // sum_{k>=2} (-1)^k u^k / (k (k - 1)); avoids cancellation near zero.
    double term = u * u;
    double sum = 0.0;
    for (int k = 2; k <= 8; ++k) {
      sum += ((k % 2 == 0) ? term : -term) / (k * (k - 1.0));
      term *= u;
    }
    return sum;
  }
  return (1.0 + u) * std::log1p(u) - u;
}

double bennett_h_inv(double y, const ToleranceSpec& tol) {
  tol.validate();
  if (!(y >= 0.0) || !std::isfinite(y)) {
    std::ostringstream msg;
    msg << "bennett_h_inv: argument must be nonnegative and finite, got " << y;
    throw DomainError(msg.str());
  }
  if (y == 0.0) return 0.0;

  double lo = 0.0;
  double hi = std::sqrt(2.0 * y) + y / 3.0;
  // Relative in y below 1: near zero u ~ sqrt(2y), so an absolute residual
  // would stop at the starting guess. |h(u) - y| cannot go below a few ulps of y.
  const double target_tol = std::max(tol.abs_tol * std::min(1.0, y), 4.0 * kEps * y);
  double u = std::sqrt(2.0 * y);  // exact to second order near zero
  if (u > hi) u = 0.5 * (lo + hi);

  for (int iter = 0; iter < tol.max_iter; ++iter) {
    const double f = bennett_h(u) - y;
    if (std::abs(f) <= target_tol) return u;
    if (f > 0.0) {
      hi = u;
    } else {
      lo = u;
    }
    if (hi - lo <= kEps * hi) return u;
    // h'(u) = ln(1 + u); reject Newton steps leaving the bracket.
    const double slope = std::log1p(u);
    double next = slope > 0.0 ? u - f / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    u = next;
  }
  std::ostringstream msg;
  msg << "bennett_h_inv did not converge for y=" << y;
  throw NumericError(msg.str());
}

double log_normal_cdf(double z) {
  if (std::isnan(z)) throw DomainError("log_normal_cdf: NaN argument");
  if (z > -35.0) return std::log(0.5 * std::erfc(-z / std::numbers::sqrt2));
  // Mills-ratio asymptotics; the truncation error is below 1e-12 here.
  const double r = 1.0 / (z * z);
  const double series = 1.0 - r * (1.0 - r * (3.0 - r * (15.0 - 105.0 * r)));
  return -0.5 * z * z - std::log(-z) - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(series);
}

}  // namespace selfnorm
