/*
 * This file is part of skr, a library for sparse kernel-based regression
 * and black-box optimization.
 *
 * Licensed under the Apache License Version 2.0. See LICENSE file in the
 * project root for license information.
 */
#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>

#include "skr/kernel.hpp"

namespace skr {

/// Observed design: one point per row of x, responses y, noise scale tau > 0.
struct Dataset {
  Points x;
  Eigen::VectorXd y;
  double tau = 1.0;

  Dataset(int dimension, double tau_in) : x(0, dimension), y(0), tau(tau_in) {
    if (tau_in <= 0) throw std::invalid_argument("dataset: tau must be positive");
  }
  Dataset(Points x_in, Eigen::VectorXd y_in, double tau_in)
      : x(std::move(x_in)), y(std::move(y_in)), tau(tau_in) {
    if (tau <= 0) throw std::invalid_argument("dataset: tau must be positive");
    if (x.rows() != y.size()) throw std::invalid_argument("dataset: x/y size mismatch");
  }

  [[nodiscard]] Eigen::Index n() const noexcept { return x.rows(); }
  [[nodiscard]] int dimension() const noexcept { return static_cast<int>(x.cols()); }

  void append(const Point& point, double value) {
    if (point.size() != x.cols()) {
      throw std::invalid_argument("dataset: appended point dimension mismatch");
    }
    x.conservativeResize(x.rows() + 1, Eigen::NoChange);
    x.row(x.rows() - 1) = point;
    y.conservativeResize(y.size() + 1);
    y[y.size() - 1] = value;
  }
};

/**
 * Kernel ridge posterior computed from the full n x n Gram matrix:
 *
 *   mean(x)     = k_X(x)^T (K + tau^2 I)^{-1} Y
 *   variance(x) = k(x, x) - k_X(x)^T (K + tau^2 I)^{-1} k_X(x)
 *
 * With no data the prior is returned (mean 0, variance k(x, x)).  The
 * Cholesky factor of K + tau^2 I is extended in place when a point is
 * appended, so sequential designs cost O(n^2) per step instead of O(n^3).
 */
class ExactPosterior {
 public:
  ExactPosterior(Kernel kernel, Dataset data);

  [[nodiscard]] double mean(const Point& x) const;
  [[nodiscard]] double variance(const Point& x) const;

  void append(const Point& x, double y);

  /// 0.5 * log det(I + K / tau^2) of the current design.
  [[nodiscard]] double information_gain() const;

  [[nodiscard]] Eigen::Index n() const noexcept { return data_.n(); }
  [[nodiscard]] const Dataset& data() const noexcept { return data_; }
  [[nodiscard]] const Kernel& kernel() const noexcept { return kernel_; }

 private:
  void refresh_weights() const;

  Kernel kernel_;
  Dataset data_;
  Eigen::MatrixXd factor_;  // lower Cholesky of K + tau^2 I
  mutable Eigen::VectorXd weights_;
  mutable bool weights_fresh_ = false;
};

/// Additive split of the sparse posterior variance; see decompose_variance.
struct VarianceDecomposition {
  double projection = 0.0;          // k(x,x) - q(x,x): rank-m floor
  double reduced_prediction = 0.0;  // surrogate posterior variance net of noise
  double noise = 0.0;               // tau^2 |V_n(x)|^2
  double clamp_magnitude = 0.0;     // largest negative excursion clamped to 0

  [[nodiscard]] double total() const noexcept {
    return projection + reduced_prediction + noise;
  }
};

/**
 * Inducing-point posterior over m points Z.  With G = k_XZ^T k_XZ and
 * A = tau^2 k_ZZ + G:
 *
 *   mean(x)     = k_Z(x)^T A^{-1} k_ZX Y
 *   variance(x) = k(x,x) - q(x,x) + tau^2 k_Z(x)^T A^{-1} k_Z(x)
 *
 * which agrees with the variational-optimum posterior for fixed Z.  The
 * constructor factors A once in O(n m^2 + m^3); every query afterwards is
 * O(m^2) and never touches n-sized quantities.  Appending a point performs
 * rank-one updates of the cached factors in O(m^2 + n m).
 *
 * Negative variances no larger than 1e-8 * k_max in magnitude are treated as
 * round-off and clamped to zero; anything more negative raises, since it
 * indicates a broken factorization rather than noise.
 */
class SparsePosterior {
 public:
  SparsePosterior(Kernel kernel, Dataset data, Points inducing);

  [[nodiscard]] double mean(const Point& x) const;
  [[nodiscard]] double variance(const Point& x) const;
  [[nodiscard]] VarianceDecomposition decompose(const Point& x) const;

  /// Prediction weights V_n(x): mean(x) = V_n(x) . Y.  O(n m) per call.
  [[nodiscard]] Eigen::VectorXd prediction_weights(const Point& x) const;

  void append(const Point& x, double y);

  /// Coefficients of the mean in the span of k(., z_j); the mean's
  /// reproducing-space norm is sqrt(c^T k_ZZ c).
  [[nodiscard]] Eigen::VectorXd mean_coefficients() const;
  [[nodiscard]] double mean_rkhs_norm() const;

  [[nodiscard]] Eigen::Index n() const noexcept { return data_.n(); }
  [[nodiscard]] Eigen::Index rank() const noexcept { return reduced_.rank(); }
  [[nodiscard]] const Dataset& data() const noexcept { return data_; }
  [[nodiscard]] const Kernel& kernel() const noexcept { return kernel_; }
  [[nodiscard]] const Points& inducing() const noexcept { return reduced_.inducing(); }
  [[nodiscard]] const ReducedRankKernel& reduced() const noexcept { return reduced_; }
  /// Diagonal shifts actually applied to k_ZZ and to A.
  [[nodiscard]] double gram_jitter() const noexcept { return reduced_.jitter(); }
  [[nodiscard]] double ridge_jitter() const noexcept { return ridge_jitter_; }
  /// Cached G = k_XZ^T k_XZ; exposed for spectral bookkeeping.
  [[nodiscard]] const Eigen::MatrixXd& data_gram() const noexcept {
    return data_gram_;
  }

 private:
  [[nodiscard]] Eigen::VectorXd solve_ridge(const Eigen::VectorXd& v) const;
  [[nodiscard]] double clamp_variance(double raw, const char* what) const;

  Kernel kernel_;
  Dataset data_;
  ReducedRankKernel reduced_;
  Eigen::MatrixXd gram_zz_;        // raw k_ZZ
  Eigen::MatrixXd cross_;          // k_XZ, grown on append
  Eigen::MatrixXd data_gram_;      // G = k_XZ^T k_XZ
  Eigen::LLT<Eigen::MatrixXd> ridge_;  // factor of A (+ jitter if needed)
  double ridge_jitter_ = 0.0;
  Eigen::VectorXd cross_y_;        // k_ZX Y
  mutable Eigen::VectorXd weights_;  // A^{-1} k_ZX Y
  mutable bool weights_fresh_ = false;
};

/**
 * Projection of f onto the span of k(., z_j): coefficients k_ZZ^{-1} f_Z.
 * The result interpolates f on Z and never has larger norm than f.
 */
RkhsFunction project_function(const RkhsFunction& f, const ReducedRankKernel& reduced);

/// 0.5 * log det(I + K / tau^2); zero for an empty design.
double information_gain(const Kernel& kernel, const Points& x, double tau);

/// tr(K (K + tau^2 I)^{-1}); zero for an empty design.  Equals the sum of
/// the tau-regularized leverage scores of the design.
double effective_dimension(const Kernel& kernel, const Points& x, double tau);

/**
 * Writes mean/deviation columns (and the sparse variance split) for a set of
 * query points.  Either posterior may be omitted; its columns then read nan.
 */
void export_snapshot(const std::string& path, const Points& queries,
                     const ExactPosterior* exact, const SparsePosterior* sparse);

}  // namespace skr
