#include "selfnorm/gram.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "selfnorm/error.hpp"

namespace selfnorm {

namespace {

using Eigen::Index;

void check_rho(double rho) {
  if (!(rho > 0.0) || !std::isfinite(rho)) {
    std::ostringstream msg;
    msg << "regularizer rho must be positive and finite, got " << rho;
    throw DomainError(msg.str());
  }
}

}  // namespace

GramState::GramState(KernelSpec spec, double rho) : spec_(spec), rho_(rho) {
  spec_.validate();
  check_rho(rho_);
  reserve(16);
}

void GramState::reserve(std::size_t capacity) {
  const auto old_cap = static_cast<std::size_t>(gram_.rows());
  if (capacity <= old_cap) return;
  const auto cap = static_cast<Index>(capacity);
  points_.conservativeResize(static_cast<Index>(spec_.input_dim), cap);
  gram_.conservativeResize(cap, cap);
  chol_.conservativeResize(cap, cap);
}

std::span<const double> GramState::point(std::size_t i) const {
  return {points_.data() + i * spec_.input_dim, spec_.input_dim};
}

Eigen::VectorXd GramState::cross_kernel(std::span<const double> x) const {
  Eigen::VectorXd k(static_cast<Index>(size_));
  for (std::size_t i = 0; i < size_; ++i) k(static_cast<Index>(i)) = eval_kernel(spec_, point(i), x);
  return k;
}

Eigen::VectorXd GramState::solve_lower(const Eigen::VectorXd& b) const {
  return chol().triangularView<Eigen::Lower>().solve(b);
}

Eigen::VectorXd GramState::solve(const Eigen::VectorXd& b) const {
  const auto lower = chol();
  Eigen::VectorXd y = lower.triangularView<Eigen::Lower>().solve(b);
  lower.transpose().triangularView<Eigen::Upper>().solveInPlace(y);
  return y;
}

AppendResult GramState::append(std::span<const double> x) {
  if (x.size() != spec_.input_dim) {
    std::ostringstream msg;
    msg << "GramState::append: expected dimension " << spec_.input_dim << ", got " << x.size();
    throw DomainError(msg.str());
  }
  const double kxx = eval_kernel(spec_, x, x);
  const Eigen::VectorXd k = cross_kernel(x);
  const Eigen::VectorXd l = size_ > 0 ? solve_lower(k) : Eigen::VectorXd();
  double pivot_sq = kxx + rho_ - l.squaredNorm();
  if (!(pivot_sq > 0.0)) {
    // K_t + rho I is SPD in exact arithmetic; only rounding can get here.
    pivot_sq += 1e-12 * rho_;
    if (!(pivot_sq > 0.0)) {
      std::ostringstream msg;
      msg << "GramState::append: non-positive Cholesky pivot " << pivot_sq << " at t=" << size_ + 1
          << " (k(x,x)=" << kxx << ", |L^-1 k|^2=" << l.squaredNorm() << ", rho=" << rho_ << ")";
      throw NumericError(msg.str());
    }
  }

  if (size_ == static_cast<std::size_t>(gram_.rows())) reserve(2 * size_);
  const auto n = static_cast<Index>(size_);
  std::copy(x.begin(), x.end(), points_.col(n).data());
  if (n > 0) {
    gram_.row(n).head(n) = k.transpose();
    gram_.col(n).head(n) = k;
    chol_.row(n).head(n) = l.transpose();
  }
  gram_(n, n) = kxx;
  chol_(n, n) = std::sqrt(pivot_sq);
  ++size_;

  // Pre-append norm q = (pivot^2 - rho) / rho; Sherman-Morrison gives q / (1 + q) after.
  AppendResult result;
  result.g_norm_sq = std::clamp(1.0 - rho_ / pivot_sq, 0.0, 1.0);
  result.logdet_increment = std::max(0.0, std::log(pivot_sq / rho_));
  logdet_ += result.logdet_increment;

  if (size_ % kRefactorInterval == 0) refactor();
  return result;
}

void GramState::refactor() {
  if (size_ == 0) return;
  Eigen::MatrixXd shifted = gram();
  shifted.diagonal().array() += rho_;
  Eigen::LLT<Eigen::MatrixXd> llt(shifted);
  if (llt.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "GramState::refactor: K + rho I lost positive definiteness at t=" << size_;
    throw NumericError(msg.str());
  }
  const auto n = static_cast<Index>(size_);
  chol_.topLeftCorner(n, n) = llt.matrixL();
  ++generation_;
}

double GramState::ridge_norm_sq(std::span<const double> x) const {
  const double kxx = eval_kernel(spec_, x, x);
  if (size_ == 0) return kxx / rho_;
  const Eigen::VectorXd v = solve_lower(cross_kernel(x));
  return std::max(0.0, kxx - v.squaredNorm()) / rho_;
}

double GramState::self_norm_sq(std::span<const double> noises) const {
  if (noises.size() != size_) {
    throw DomainError("GramState::self_norm_sq: noise vector length must equal the number of points");
  }
  if (size_ == 0) return 0.0;
  const Eigen::Map<const Eigen::VectorXd> eps(noises.data(), static_cast<Index>(noises.size()));
  const Eigen::VectorXd w = solve(eps);
  const Eigen::VectorXd u = gram().selfadjointView<Eigen::Lower>() * w;
  return u.squaredNorm() + rho_ * std::max(0.0, w.dot(u));
}

void WhitenedNoise::push(const GramState& gram, double eps) {
  noises_.push_back(eps);
  eps_sq_ += eps * eps;
  const auto n = static_cast<Index>(noises_.size());
  if (static_cast<std::size_t>(n) != gram.size()) {
    throw DomainError("WhitenedNoise::push: noise count must equal the number of points");
  }
  if (gram.factor_generation() != generation_ || u_.size() != n - 1) {
    const Eigen::Map<const Eigen::VectorXd> all(noises_.data(), n);
    u_ = gram.solve_lower(all);
    generation_ = gram.factor_generation();
    return;
  }
  const auto lower = gram.chol();
  const double dot = n > 1 ? lower.row(n - 1).head(n - 1).dot(u_) : 0.0;
  u_.conservativeResize(n);
  u_(n - 1) = (eps - dot) / lower(n - 1, n - 1);
}

double WhitenedNoise::self_norm_sq(double rho) const {
  // eps^T K (K + rho I)^{-1} eps = |eps|^2 - rho eps^T (K + rho I)^{-1} eps.
  return std::max(0.0, eps_sq_ - rho * u_.squaredNorm());
}

FeatureGram::FeatureGram(std::size_t dim, double rho)
    : dim_(dim),
      rho_(rho),
      gram_op_(Eigen::MatrixXd::Zero(static_cast<Index>(dim), static_cast<Index>(dim))),
      inverse_(Eigen::MatrixXd::Identity(static_cast<Index>(dim), static_cast<Index>(dim)) / rho) {
  if (dim == 0) throw DomainError("FeatureGram: dimension must be >= 1");
  check_rho(rho);
  points_.resize(static_cast<Index>(dim), 16);
}

AppendResult FeatureGram::append(std::span<const double> x) {
  if (x.size() != dim_) {
    std::ostringstream msg;
    msg << "FeatureGram::append: expected dimension " << dim_ << ", got " << x.size();
    throw DomainError(msg.str());
  }
  const Eigen::Map<const Eigen::VectorXd> v(x.data(), static_cast<Index>(dim_));
  const Eigen::VectorXd pv = inverse_ * v;
  const double q = std::max(0.0, v.dot(pv));
  inverse_.noalias() -= (pv * pv.transpose()) / (1.0 + q);
  gram_op_.noalias() += v * v.transpose();

  if (size_ == static_cast<std::size_t>(points_.cols())) {
    points_.conservativeResize(Eigen::NoChange, 2 * points_.cols());
  }
  points_.col(static_cast<Index>(size_)) = v;
  ++size_;

  AppendResult result;
  result.g_norm_sq = std::clamp(q / (1.0 + q), 0.0, 1.0);
  result.logdet_increment = std::log1p(q);
  logdet_ += result.logdet_increment;

  if (size_ % kRefreshInterval == 0) {
    Eigen::MatrixXd shifted = gram_op_;
    shifted.diagonal().array() += rho_;
    Eigen::LLT<Eigen::MatrixXd> llt(shifted);
    if (llt.info() != Eigen::Success) throw NumericError("FeatureGram: rho I + V_t lost positive definiteness");
    inverse_ = llt.solve(Eigen::MatrixXd::Identity(static_cast<Index>(dim_), static_cast<Index>(dim_)));
  }
  return result;
}

double FeatureGram::ridge_norm_sq(std::span<const double> x) const {
  if (x.size() != dim_) throw DomainError("FeatureGram::ridge_norm_sq: dimension mismatch");
  const Eigen::Map<const Eigen::VectorXd> v(x.data(), static_cast<Index>(dim_));
  return std::max(0.0, v.dot(inverse_ * v));
}

double FeatureGram::inverse_quad(const Eigen::VectorXd& m) const {
  if (m.size() != static_cast<Index>(dim_)) throw DomainError("FeatureGram::inverse_quad: dimension mismatch");
  return std::max(0.0, m.dot(inverse_ * m));
}

double FeatureGram::self_norm_sq(std::span<const double> noises) const {
  if (noises.size() != size_) {
    throw DomainError("FeatureGram::self_norm_sq: noise vector length must equal the number of points");
  }
  if (size_ == 0) return 0.0;
  const Eigen::Map<const Eigen::VectorXd> eps(noises.data(), static_cast<Index>(size_));
  const Eigen::VectorXd m = points_.leftCols(static_cast<Index>(size_)) * eps;
  return std::max(0.0, m.dot(inverse_ * m));
}

}  // namespace selfnorm
