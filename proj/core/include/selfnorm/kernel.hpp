#pragma once

#include <cstddef>
#include <span>
#include <string>

namespace selfnorm {

enum class KernelFamily { Rbf, Linear };

/// Kernel family plus hyperparameters defining the feature embedding.
///
/// RBF uses exp(-|x - y|^2 / (2 l^2)), so k(x, x) = 1.
struct KernelSpec {
  KernelFamily family = KernelFamily::Rbf;
  double lengthscale = 0.01;  // RBF only
  std::size_t input_dim = 1;

  void validate() const;
};

double eval_kernel(const KernelSpec& spec, std::span<const double> x, std::span<const double> y);

std::string to_string(KernelFamily family);
KernelFamily kernel_family_from_string(const std::string& name);

}  // namespace selfnorm
