#include "selfnorm/regression.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "selfnorm/error.hpp"

namespace selfnorm {

namespace {

using Eigen::Index;

}  // namespace

RegressionState::RegressionState(KernelSpec kernel, double rho, double D, RadiusConfig radius_cfg)
    : gram_(kernel, rho), D_(D), cfg_(radius_cfg) {
  if (!(D > 0.0) || !std::isfinite(D)) {
    std::ostringstream msg;
    msg << "RegressionState: norm bound D must be positive and finite, got " << D;
    throw DomainError(msg.str());
  }
  cfg_.validate();
  z_generation_ = gram_.factor_generation();
}

AppendResult RegressionState::observe(std::span<const double> x, double y) {
  if (!std::isfinite(y)) throw DomainError("RegressionState::observe: target must be finite");
  const double residual = y - predict(x);
  const double bound = 2.0 * cfg_.B;
  residual_sq_sum_ += std::min(residual * residual, bound * bound);

  const AppendResult appended = gram_.append(x);
  targets_.push_back(y);
  g_norm_sq_sum_ += appended.g_norm_sq;

  const auto n = static_cast<Index>(gram_.size());
  if (gram_.factor_generation() != z_generation_) {
    const Eigen::Map<const Eigen::VectorXd> ys(targets_.data(), n);
    z_ = gram_.solve_lower(ys);
    z_generation_ = gram_.factor_generation();
  } else {
    const auto lower = gram_.chol();
    z_.conservativeResize(n);
    const double dot = n > 1 ? lower.row(n - 1).head(n - 1).dot(z_.head(n - 1)) : 0.0;
    z_(n - 1) = (y - dot) / lower(n - 1, n - 1);
  }
  alpha_valid_ = false;
  return appended;
}

const Eigen::VectorXd& RegressionState::dual_weights() const {
  if (!alpha_valid_) {
    alpha_ = z_;
    gram_.chol().transpose().triangularView<Eigen::Upper>().solveInPlace(alpha_);
    alpha_valid_ = true;
  }
  return alpha_;
}

double RegressionState::predict(std::span<const double> x) const {
  if (gram_.size() == 0) return 0.0;
  return gram_.cross_kernel(x).dot(dual_weights());
}

double RegressionState::ellipsoid_radius(double J) const {
  if (!(J >= 0.0)) throw DomainError("ellipsoid_radius: J must be nonnegative");
  return J + std::sqrt(gram_.rho()) * D_;
}

double RegressionState::ucb_value(std::span<const double> x, double eta) const {
  if (!(eta >= 0.0)) throw DomainError("ucb_value: eta must be nonnegative");
  return predict(x) + eta * std::sqrt(gram_.ridge_norm_sq(x));
}

double RegressionState::sigma_sq_ucb() const {
  if (!cfg_.delta_split) return cfg_.B * cfg_.B;
  return variance_ucb(residual_sq_sum_, gram_.size(), cfg_.B, cfg_.delta_split->first);
}

RadiusInputs RegressionState::radius_inputs(double fixed_c_sq) const {
  RadiusInputs in;
  in.g_norm_sq_sum = g_norm_sq_sum_;
  in.logdet_ratio = gram_.logdet_ratio();
  in.fixed_c_sq = fixed_c_sq;
  if (cfg_.method == RadiusMethod::EmpiricalMixedBennett) in.sigma_sq_ucb = sigma_sq_ucb();
  return in;
}

double RegressionState::confidence_radius(double fixed_c_sq) const {
  return selfnorm::confidence_radius(radius_inputs(fixed_c_sq), cfg_);
}

double KernelExpansion::operator()(std::span<const double> x) const {
  double total = 0.0;
  for (Index j = 0; j < centers.cols(); ++j) {
    total += weights(j) * eval_kernel(kernel, {centers.col(j).data(), kernel.input_dim}, x);
  }
  return total;
}

double KernelExpansion::rkhs_norm_sq() const {
  const Index m = centers.cols();
  double total = 0.0;
  for (Index i = 0; i < m; ++i) {
    const std::span<const double> ci{centers.col(i).data(), kernel.input_dim};
    total += weights(i) * weights(i) * eval_kernel(kernel, ci, ci);
    for (Index j = 0; j < i; ++j) {
      total += 2.0 * weights(i) * weights(j) * eval_kernel(kernel, ci, {centers.col(j).data(), kernel.input_dim});
    }
  }
  return std::max(0.0, total);
}

double ellipsoid_deviation(const RegressionState& state, const KernelExpansion& theta_star) {
  const GramState& gram = state.gram();
  const KernelSpec& spec = gram.kernel();
  if (theta_star.kernel.family != spec.family || theta_star.kernel.input_dim != spec.input_dim ||
      (spec.family == KernelFamily::Rbf && theta_star.kernel.lengthscale != spec.lengthscale)) {
    throw DomainError("ellipsoid_deviation: theta* must live in the regression kernel's RKHS");
  }
  const double star_sq = theta_star.rkhs_norm_sq();
  const double rho = gram.rho();
  const std::size_t t = gram.size();
  if (t == 0) return std::sqrt(rho * star_sq);

  const auto n = static_cast<Index>(t);
  const Eigen::VectorXd& alpha = state.dual_weights();
  const Eigen::VectorXd k_alpha = gram.gram().selfadjointView<Eigen::Lower>() * alpha;
  Eigen::VectorXd f_star(n);
  for (Index i = 0; i < n; ++i) f_star(i) = theta_star(gram.point(static_cast<std::size_t>(i)));

  // <theta_t, theta*> = sum_i alpha_i theta*(x_i).
  const double g_sq = std::max(0.0, alpha.dot(k_alpha) - 2.0 * alpha.dot(f_star) + star_sq);
  const double fit_sq = (k_alpha - f_star).squaredNorm();
  return std::sqrt(rho * g_sq + fit_sq);
}

PosteriorGrid::PosteriorGrid(KernelSpec kernel, Eigen::MatrixXd points) : kernel_(kernel), points_(std::move(points)) {
  kernel_.validate();
  if (points_.rows() != static_cast<Index>(kernel_.input_dim)) {
    throw DomainError("PosteriorGrid: point dimension does not match the kernel");
  }
  const Index n = points_.cols();
  self_kernel_.resize(n);
  for (Index a = 0; a < n; ++a) self_kernel_(a) = eval_kernel(kernel_, point(static_cast<std::size_t>(a)), point(static_cast<std::size_t>(a)));
  v_norm_sq_ = Eigen::VectorXd::Zero(n);
  mean_ = Eigen::VectorXd::Zero(n);
}

std::span<const double> PosteriorGrid::point(std::size_t a) const {
  return {points_.col(static_cast<Index>(a)).data(), kernel_.input_dim};
}

void PosteriorGrid::extend_row(const RegressionState& state, std::size_t j) {
  const GramState& gram = state.gram();
  const auto jj = static_cast<Index>(j);
  if (v_.rows() <= jj) v_.conservativeResize(std::max<Index>(16, 2 * v_.rows()), points_.cols());
  const std::span<const double> xj = gram.point(j);
  Eigen::RowVectorXd row(points_.cols());
  for (Index a = 0; a < points_.cols(); ++a) row(a) = eval_kernel(kernel_, xj, point(static_cast<std::size_t>(a)));
  const auto lower = gram.chol();
  if (jj > 0) row.noalias() -= lower.row(jj).head(jj) * v_.topRows(jj);
  row /= lower(jj, jj);
  v_.row(jj) = row;
  v_norm_sq_ += row.transpose().cwiseAbs2();
}

void PosteriorGrid::rebuild(const RegressionState& state) {
  rows_ = 0;
  v_norm_sq_.setZero();
  for (std::size_t j = 0; j < state.size(); ++j) extend_row(state, j);
  rows_ = state.size();
}

void PosteriorGrid::sync(const RegressionState& state) {
  if (state.gram().kernel().family != kernel_.family || state.gram().kernel().input_dim != kernel_.input_dim) {
    throw DomainError("PosteriorGrid::sync: kernel mismatch");
  }
  rho_ = state.rho();
  if (state.size() < rows_ || state.gram().factor_generation() != generation_) {
    rebuild(state);
    generation_ = state.gram().factor_generation();
  } else {
    for (std::size_t j = rows_; j < state.size(); ++j) extend_row(state, j);
    rows_ = state.size();
  }
  const auto n = static_cast<Index>(rows_);
  if (n == 0) {
    mean_.setZero();
  } else {
    mean_.noalias() = v_.topRows(n).transpose() * state.whitened_targets();
  }
}

double PosteriorGrid::ridge_norm_sq(std::size_t a) const {
  const auto i = static_cast<Index>(a);
  return std::max(0.0, self_kernel_(i) - v_norm_sq_(i)) / rho_;
}

double PosteriorGrid::ucb(std::size_t a, double eta) const { return mean(a) + eta * std::sqrt(ridge_norm_sq(a)); }

}  // namespace selfnorm
