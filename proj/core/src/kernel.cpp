#include "selfnorm/kernel.hpp"

#include <cmath>
#include <sstream>

#include "selfnorm/error.hpp"

namespace selfnorm {

void KernelSpec::validate() const {
  if (input_dim == 0) throw DomainError("KernelSpec: input_dim must be >= 1");
  if (family == KernelFamily::Rbf && !(lengthscale > 0.0 && std::isfinite(lengthscale))) {
    throw DomainError("KernelSpec: RBF lengthscale must be positive and finite");
  }
}

double eval_kernel(const KernelSpec& spec, std::span<const double> x, std::span<const double> y) {
  if (x.size() != spec.input_dim || y.size() != spec.input_dim) {
    std::ostringstream msg;
    msg << "eval_kernel: expected inputs of dimension " << spec.input_dim << ", got " << x.size()
        << " and " << y.size();
    throw DomainError(msg.str());
  }
  switch (spec.family) {
    case KernelFamily::Rbf: {
      double dist_sq = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double diff = x[i] - y[i];
        dist_sq += diff * diff;
      }
      return std::exp(-dist_sq / (2.0 * spec.lengthscale * spec.lengthscale));
    }
    case KernelFamily::Linear: {
      double dot = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) dot += x[i] * y[i];
      return dot;
    }
  }
  throw DomainError("eval_kernel: unknown kernel family");
}

std::string to_string(KernelFamily family) {
  return family == KernelFamily::Rbf ? "RBF" : "Linear";
}

KernelFamily kernel_family_from_string(const std::string& name) {
  if (name == "RBF" || name == "Rbf" || name == "rbf") return KernelFamily::Rbf;
  if (name == "Linear" || name == "linear") return KernelFamily::Linear;
  throw ConfigError("unknown kernel family '" + name + "'");
}

}  // namespace selfnorm
