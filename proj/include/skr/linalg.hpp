/*
 * This file is part of skr, a library for sparse kernel-based regression
 * and black-box optimization.
 *
 * Licensed under the Apache License Version 2.0. See LICENSE file in the
 * project root for license information.
 */
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>

#include "skr/rng.hpp"

namespace skr {

/// Relative floor applied when validating that a matrix is positive
/// semi-definite up to round-off.
inline constexpr double kPsdTolerance = 1e-8;

/// Smallest and largest relative jitter tried when factoring a nearly
/// singular kernel matrix.  The ladder escalates tenfold per attempt.
inline constexpr double kJitterFloor = 1e-10;
inline constexpr double kJitterCeiling = 1e-6;

struct JitteredLlt {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;  // final diagonal shift actually applied
};

/**
 * Cholesky factorization with an escalating diagonal shift.
 *
 * The unshifted matrix is tried first, so well-conditioned inputs factor
 * exactly.  On breakdown the shift starts at kJitterFloor * scale and grows
 * tenfold until the factorization succeeds or the shift would exceed
 * kJitterCeiling * scale, in which case the matrix is treated as genuinely
 * indefinite and an exception is raised.  `scale` should be the natural
 * magnitude of the matrix diagonal (the kernel's maximum variance for
 * kernel matrices).
 */
inline JitteredLlt jittered_llt(const Eigen::MatrixXd& m, double scale,
                                const std::string& label) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument(label + ": matrix must be square");
  }
  JitteredLlt out;
  if (m.rows() == 0) {
    out.llt.compute(Eigen::MatrixXd::Zero(0, 0));
    return out;
  }
  for (double eta = 0.0; eta <= kJitterCeiling * scale * (1 + 1e-12);
       eta = (eta == 0.0 ? kJitterFloor * scale : eta * 10.0)) {
    Eigen::MatrixXd shifted = m;
    shifted.diagonal().array() += eta;
    out.llt.compute(shifted);
    if (out.llt.info() == Eigen::Success) {
      out.jitter = eta;
      return out;
    }
  }
  throw std::runtime_error(label + ": not positive definite even with jitter " +
                           std::to_string(kJitterCeiling * scale));
}

/// Exact largest eigenvalue of a symmetric matrix (full dense solve).
inline double top_eigenvalue_dense(const Eigen::MatrixXd& s) {
  if (s.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) {
    throw std::runtime_error("top_eigenvalue_dense: eigensolver failed");
  }
  return eig.eigenvalues().maxCoeff();
}

/**
 * Randomized power iteration for the largest eigenvalue of a symmetric
 * positive semi-definite matrix.  Stops after `max_iters` Rayleigh-quotient
 * refinements or when the iterate changes by less than `rtol` relatively.
 */
inline double top_eigenvalue_power(const Eigen::MatrixXd& s, int max_iters,
                                   double rtol, Rng& rng) {
  const auto n = s.rows();
  if (n == 0) return 0.0;
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.normal();
  v.normalize();
  double value = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    Eigen::VectorXd w = s * v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    const double next = v.dot(s * v);
    if (it > 0 && std::abs(next - value) <= rtol * std::max(1.0, std::abs(next))) {
      return next;
    }
    value = next;
  }
  return value;
}

/// Kahan-Neumaier compensated sum; used for long accumulations whose terms
/// can differ by many orders of magnitude.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  [[nodiscard]] double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace skr
