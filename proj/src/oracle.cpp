/*
 * This file is part of skr, a library for sparse kernel-based regression
 * and black-box optimization.
 *
 * Licensed under the Apache License Version 2.0. See LICENSE file in the
 * project root for license information.
 */
#include "skr/oracle.hpp"

#include <cmath>
#include <stdexcept>

namespace skr {
namespace oracle {

namespace {

// Symmetric inverse via eigendecomposition; shifts every eigenvalue by
// `shift` before inverting.  Used instead of Cholesky so the oracle shares
// no numerical machinery with the production code.
Eigen::MatrixXd shifted_inverse(const Eigen::MatrixXd& m, double shift) {
  if (m.rows() == 0) return m;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  if (eig.info() != Eigen::Success) {
    throw std::runtime_error("oracle: eigendecomposition failed");
  }
  const Eigen::VectorXd inv =
      (eig.eigenvalues().array() + shift).inverse().matrix();
  return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

// Moore-Penrose pseudo-inverse with a relative spectral cutoff.
Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& m) {
  if (m.rows() == 0) return m;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  if (eig.info() != Eigen::Success) {
    throw std::runtime_error("oracle: eigendecomposition failed");
  }
  const double cutoff = 1e-12 * std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
  Eigen::VectorXd inv = eig.eigenvalues();
  for (Eigen::Index i = 0; i < inv.size(); ++i) {
    inv[i] = std::abs(inv[i]) > cutoff ? 1.0 / inv[i] : 0.0;
  }
  return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

Eigen::VectorXd kernel_column(const Kernel& k, const Points& x, const Point& q) {
  Eigen::VectorXd out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] = k(x.row(i), q);
  return out;
}

}  // namespace

Moments exact_posterior(const Kernel& kernel, const Dataset& data, const Point& x) {
  Moments out;
  out.variance = kernel(x, x);
  if (data.n() == 0) return out;
  const Eigen::MatrixXd inv =
      shifted_inverse(kernel_matrix(kernel, data.x), data.tau * data.tau);
  const Eigen::VectorXd kx = kernel_column(kernel, data.x, x);
  out.mean = kx.dot(inv * data.y);
  out.variance -= kx.dot(inv * kx);
  return out;
}

SparseMoments sparse_posterior(const Kernel& kernel, const Dataset& data,
                               const Points& inducing, const Point& x) {
  SparseMoments out;
  const double prior = kernel(x, x);
  if (inducing.rows() == 0) {
    out.variance = prior;
    out.projection = prior;
    return out;
  }
  const double tau2 = data.tau * data.tau;
  const Eigen::MatrixXd kzz = kernel_matrix(kernel, inducing);
  const Eigen::MatrixXd kxz = kernel_matrix(kernel, data.x, inducing);
  const Eigen::MatrixXd kzz_inv = pseudo_inverse(kzz);
  const Eigen::VectorXd kz = kernel_column(kernel, inducing, x);

  const Eigen::MatrixXd a = tau2 * kzz + kxz.transpose() * kxz;
  const Eigen::MatrixXd a_inv = pseudo_inverse(a);
  out.mean = kz.dot(a_inv * (kxz.transpose() * data.y));

  const Eigen::MatrixXd c = kzz + kxz.transpose() * kxz / tau2;
  out.variance = prior - kz.dot(kzz_inv * kz) + kz.dot(pseudo_inverse(c) * kz);

  out.projection = prior - kz.dot(kzz_inv * kz);

  // Posterior variance of the rank-m kernel from its own n x n ridge system.
  const Eigen::MatrixXd qxx = kxz * kzz_inv * kxz.transpose();
  const Eigen::VectorXd qx = kxz * (kzz_inv * kz);
  const double q_prior = kz.dot(kzz_inv * kz);
  if (data.n() == 0) {
    out.surrogate_variance = q_prior;
  } else {
    out.surrogate_variance = q_prior - qx.dot(shifted_inverse(qxx, tau2) * qx);
  }

  const Eigen::VectorXd v = kxz * (a_inv * kz);
  out.noise = tau2 * v.squaredNorm();
  return out;
}

Moments variational_posterior(const Kernel& kernel, const Dataset& data,
                              const Points& inducing, const Point& x) {
  Moments out;
  const double prior = kernel(x, x);
  if (inducing.rows() == 0) {
    out.variance = prior;
    return out;
  }
  const double tau2 = data.tau * data.tau;
  const Eigen::MatrixXd kzz = kernel_matrix(kernel, inducing);
  const Eigen::MatrixXd kxz = kernel_matrix(kernel, data.x, inducing);
  const Eigen::MatrixXd kzz_inv = pseudo_inverse(kzz);
  const Eigen::VectorXd kz = kernel_column(kernel, inducing, x);

  const Eigen::MatrixXd a = tau2 * kzz + kxz.transpose() * kxz;
  const Eigen::MatrixXd a_inv = pseudo_inverse(a);
  // Optimizing distribution over the inducing values.
  const Eigen::VectorXd mu_v = kzz * (a_inv * (kxz.transpose() * data.y));
  const Eigen::MatrixXd sigma_v = tau2 * kzz * a_inv * kzz;
  // Substituted into the predictive family.
  const Eigen::VectorXd w = kzz_inv * kz;
  out.mean = w.dot(mu_v);
  out.variance = prior - w.dot((kzz - sigma_v) * w);
  return out;
}

Eigen::VectorXd prediction_weights(const Kernel& kernel, const Dataset& data,
                                   const Points& inducing, const Point& x) {
  if (inducing.rows() == 0) return Eigen::VectorXd::Zero(data.n());
  const double tau2 = data.tau * data.tau;
  const Eigen::MatrixXd kzz = kernel_matrix(kernel, inducing);
  const Eigen::MatrixXd kxz = kernel_matrix(kernel, data.x, inducing);
  const Eigen::MatrixXd a = tau2 * kzz + kxz.transpose() * kxz;
  const Eigen::VectorXd kz = kernel_column(kernel, inducing, x);
  return kxz * (pseudo_inverse(a) * kz);
}

Eigen::VectorXd prediction_weights_dual(const Kernel& kernel, const Dataset& data,
                                        const Points& inducing, const Point& x) {
  if (inducing.rows() == 0) return Eigen::VectorXd::Zero(data.n());
  const double tau2 = data.tau * data.tau;
  const Eigen::MatrixXd kzz = kernel_matrix(kernel, inducing);
  const Eigen::MatrixXd kxz = kernel_matrix(kernel, data.x, inducing);
  const Eigen::MatrixXd kzz_inv = pseudo_inverse(kzz);
  const Eigen::MatrixXd qxx = kxz * kzz_inv * kxz.transpose();
  const Eigen::VectorXd qx = kxz * (kzz_inv * kernel_column(kernel, inducing, x));
  return shifted_inverse(qxx, tau2) * qx;
}

Eigen::VectorXd leverage_scores(const Kernel& kernel, const Points& x, double tau) {
  if (x.rows() == 0) return Eigen::VectorXd(0);
  const Eigen::MatrixXd k = kernel_matrix(kernel, x);
  return (k * shifted_inverse(k, tau * tau)).diagonal();
}

double lambda_max(const Kernel& kernel, const Points& x, const Points& inducing) {
  if (x.rows() == 0) return 0.0;
  const Eigen::MatrixXd kxx = kernel_matrix(kernel, x);
  Eigen::MatrixXd gap = kxx;
  if (inducing.rows() > 0) {
    const Eigen::MatrixXd kxz = kernel_matrix(kernel, x, inducing);
    gap -= kxz * pseudo_inverse(kernel_matrix(kernel, inducing)) * kxz.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gap, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().maxCoeff();
}

double information_gain(const Kernel& kernel, const Points& x, double tau) {
  if (x.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(kernel_matrix(kernel, x),
                                                     Eigen::EigenvaluesOnly);
  double sum = 0.0;
  for (double lambda : eig.eigenvalues()) {
    sum += std::log1p(std::max(lambda, 0.0) / (tau * tau));
  }
  return 0.5 * sum;
}

double effective_dimension(const Kernel& kernel, const Points& x, double tau) {
  if (x.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(kernel_matrix(kernel, x),
                                                     Eigen::EigenvaluesOnly);
  double sum = 0.0;
  for (double lambda : eig.eigenvalues()) {
    const double l = std::max(lambda, 0.0);
    sum += l / (l + tau * tau);
  }
  return sum;
}

}  // namespace oracle
}  // namespace skr
