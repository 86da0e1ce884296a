#pragma once

// Dense feature-space references for the Linear kernel, independent of the
// kernel-trick code paths under test.

#include <cmath>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

struct Dense {
  Eigen::MatrixXd V;  // sum x x^T
  Eigen::VectorXd M;  // sum x eps
  Eigen::VectorXd XtY;
  double rho;

  Dense(int dim, double rho_)
      : V(Eigen::MatrixXd::Zero(dim, dim)), M(Eigen::VectorXd::Zero(dim)), XtY(Eigen::VectorXd::Zero(dim)), rho(rho_) {}

  void add(const Eigen::VectorXd& x, double eps, double y = 0.0) {
    V += x * x.transpose();
    M += eps * x;
    XtY += y * x;
  }

  [[nodiscard]] Eigen::MatrixXd shifted() const {
    return V + rho * Eigen::MatrixXd::Identity(V.rows(), V.cols());
  }

  // |(rho I + V)^{-1/2} M| through an eigendecomposition.
  [[nodiscard]] double self_norm() const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(shifted());
    const Eigen::VectorXd proj = es.eigenvectors().transpose() * M;
    return std::sqrt((proj.array().square() / es.eigenvalues().array()).sum());
  }

  [[nodiscard]] double ridge_norm_sq(const Eigen::VectorXd& x) const { return x.dot(shifted().ldlt().solve(x)); }

  [[nodiscard]] double logdet_ratio() const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(V);
    return (1.0 + es.eigenvalues().array().max(0.0) / rho).log().sum();
  }

  [[nodiscard]] Eigen::VectorXd theta() const { return shifted().ldlt().solve(XtY); }
};

}  // namespace oracle
