#include "selfnorm/noise.hpp"

#include <cmath>
#include <sstream>

#include "selfnorm/error.hpp"

namespace selfnorm {

void NoiseModel::validate() const {
  if (family == NoiseFamily::RescaledBeta && !(beta_a > 0.0 && std::isfinite(beta_a))) {
    throw DomainError("NoiseModel: beta shape must be positive and finite");
  }
}

double NoiseModel::variance() const {
  switch (family) {
    case NoiseFamily::RescaledUniform:
      return 1.0 / 3.0;
    case NoiseFamily::RescaledBeta:
      // Var Beta(a, a) = 1 / (4 (2a + 1)); the map x -> 2x - 1 scales it by 4.
      return 1.0 / (2.0 * beta_a + 1.0);
    case NoiseFamily::Rademacher:
      return 1.0;
    case NoiseFamily::Zero:
      return 0.0;
  }
  return 0.0;
}

double NoiseModel::sample(Rng& rng) const {
  switch (family) {
    case NoiseFamily::RescaledUniform:
      return 2.0 * rng.uniform_open() - 1.0;
    case NoiseFamily::RescaledBeta:
      return 2.0 * rng.beta(beta_a, beta_a) - 1.0;
    case NoiseFamily::Rademacher:
      return rng.rademacher();
    case NoiseFamily::Zero:
      return 0.0;
  }
  return 0.0;
}

std::string NoiseModel::name() const {
  if (family == NoiseFamily::RescaledBeta) {
    std::ostringstream out;
    out << "beta" << beta_a;
    return out.str();
  }
  return to_string(family);
}

std::string to_string(NoiseFamily family) {
  switch (family) {
    case NoiseFamily::RescaledUniform:
      return "RescaledUniform";
    case NoiseFamily::RescaledBeta:
      return "RescaledBeta";
    case NoiseFamily::Rademacher:
      return "Rademacher";
    case NoiseFamily::Zero:
      return "Zero";
  }
  return "unknown";
}

NoiseFamily noise_family_from_string(const std::string& name) {
  if (name == "RescaledUniform" || name == "uniform") return NoiseFamily::RescaledUniform;
  if (name == "RescaledBeta" || name == "beta") return NoiseFamily::RescaledBeta;
  if (name == "Rademacher" || name == "rademacher") return NoiseFamily::Rademacher;
  if (name == "Zero" || name == "zero" || name == "None") return NoiseFamily::Zero;
  throw ConfigError("unknown noise family '" + name + "'");
}

double bernstein_mgf_bound(double lambda, double B, double sigma_sq) {
  if (!(lambda >= 0.0) || !(B >= 0.0) || !(sigma_sq >= 0.0)) {
    throw DomainError("bernstein_mgf_bound: arguments must be nonnegative");
  }
  if (!(lambda * B < 1.0)) {
    std::ostringstream msg;
    msg << "bernstein_mgf_bound: requires lambda < 1/B, got lambda=" << lambda << ", B=" << B;
    throw DomainError(msg.str());
  }
  return lambda * lambda * sigma_sq / (2.0 * (1.0 - lambda * B));
}

double bennett_mgf_bound(double lambda, double B, double sigma_sq) {
  if (!(lambda >= 0.0) || !(B > 0.0) || !(sigma_sq >= 0.0)) {
    throw DomainError("bennett_mgf_bound: requires lambda >= 0, B > 0, sigma_sq >= 0");
  }
  const double x = lambda * B;
  // expm1(x) - x loses digits for small x; use the series there.
  const double phi = x < 1e-4 ? x * x * (0.5 + x / 6.0 + x * x / 24.0) : std::expm1(x) - x;
  return phi * sigma_sq / (B * B);
}

}  // namespace selfnorm
