#pragma once

#include <string>

#include "selfnorm/rng.hpp"

namespace selfnorm {

enum class NoiseFamily {
  RescaledUniform,  // Uniform(-1, 1)
  RescaledBeta,     // 2 Beta(a, a) - 1
  Rademacher,       // +-1 with probability 1/2
  Zero,             // degenerate at 0
};

/// Bounded zero-mean noise on [-1, 1]; bound B = 1 for every family.
struct NoiseModel {
  NoiseFamily family = NoiseFamily::RescaledBeta;
  double beta_a = 5.0;  // RescaledBeta only, symmetric shape a = b

  void validate() const;
  [[nodiscard]] double bound() const { return 1.0; }
  /// 1/3 for uniform, 1/(2a + 1) for rescaled Beta(a, a), 1 for Rademacher, 0 for Zero.
  [[nodiscard]] double variance() const;
  double sample(Rng& rng) const;
  [[nodiscard]] std::string name() const;
};

std::string to_string(NoiseFamily family);
NoiseFamily noise_family_from_string(const std::string& name);

// Per-step controls of E[exp(lambda |eps|) - lambda |eps| - 1]; multiplying by
// |G_t|^2 gives the supermartingale compensator e_t(lambda).

/// lambda^2 sigma^2 / (2 (1 - lambda B)) under the Bernstein condition, 0 <= lambda < 1/B.
double bernstein_mgf_bound(double lambda, double B, double sigma_sq);

/// (e^{lambda B} - lambda B - 1) sigma^2 / B^2 for |eps| <= B.
double bennett_mgf_bound(double lambda, double B, double sigma_sq);

}  // namespace selfnorm
