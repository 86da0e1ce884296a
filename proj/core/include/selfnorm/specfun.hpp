#pragma once

namespace selfnorm {

/// Convergence controls shared by the iterative special functions.
struct ToleranceSpec {
  double abs_tol = 1e-12;
  double rel_tol = 1e-10;
  int max_iter = 200;

  /// Throws DomainError unless abs_tol > 0, rel_tol > 0 and max_iter >= 1.
  void validate() const;
};

/// ln Gamma(a) for a > 0.
double log_gamma(double a);

/// Regularized upper incomplete gamma Q(a, x) = Gamma(a, x) / Gamma(a).
///
/// Uses the power series for P = 1 - Q when x < a + 1 and a Lentz continued
/// fraction for Q otherwise. Both run to machine precision; the iteration
/// budget is `tol.max_iter` plus an O(sqrt(a)) allowance because the number
/// of terms needed near the transition x ~ a grows like sqrt(a).
double reg_upper_gamma(double a, double x, const ToleranceSpec& tol = {});

/// ln Q(a, x), accurate also when Q underflows.
double log_reg_upper_gamma(double a, double x, const ToleranceSpec& tol = {});

/// ln Phi(z) for the standard normal distribution function, finite for all real z.
double log_normal_cdf(double z);

/// Bennett rate function h(u) = (1 + u) ln(1 + u) - u for u >= 0.
double bennett_h(double u);

/// Inverse of bennett_h on [0, inf).
///
/// Safeguarded Newton iteration inside the bracket [0, sqrt(2y) + y/3]; the
/// upper end is valid because h^{-1}(y) <= sqrt(2y) + y/3.
double bennett_h_inv(double y, const ToleranceSpec& tol = {});

}  // namespace selfnorm
