/*
 * This file is part of skr, a library for sparse kernel-based regression
 * and black-box optimization.
 *
 * Licensed under the Apache License Version 2.0. See LICENSE file in the
 * project root for license information.
 */
#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "skr/rng.hpp"

#include <nlohmann/json_fwd.hpp>

namespace skr {

using Points = Eigen::MatrixXd;       // one point per row
using Point = Eigen::RowVectorXd;

enum class KernelFamily {
  kSquaredExponential,
  kMatern12,
  kMatern32,
  kMatern52,
  kTabulated,
};

std::string to_string(KernelFamily family);
KernelFamily kernel_family_from_string(const std::string& name);

/**
 * Positive-definite covariance function.
 *
 * Stationary families (squared exponential and Matern with smoothness
 * 1/2, 3/2, 5/2) are parameterized by a lengthscale l and a variance scale v:
 *
 *   squared exponential: k(x, x') = v * exp(-r^2 / (2 l^2))
 *   Matern 1/2:          k(x, x') = v * exp(-r / l)
 *   Matern 3/2:          k(x, x') = v * (1 + s) * exp(-s),        s = sqrt(3) r / l
 *   Matern 5/2:          k(x, x') = v * (1 + s + s^2/3) * exp(-s), s = sqrt(5) r / l
 *
 * with r = |x - x'|_2.  Squared distances in dimension above eight are
 * accumulated with compensated summation to keep r^2 accurate when
 * coordinates span many orders of magnitude.
 *
 * The tabulated family wraps an explicit symmetric positive semi-definite
 * matrix over a finite domain; its points are scalar row/column indices.
 * This is how finite arm sets and hand-crafted fixtures enter the same
 * code paths as analytic kernels.
 *
 * Kernel is an immutable value type; copies share the table storage.
 */
class Kernel {
 public:
  static Kernel squared_exponential(int dimension, double lengthscale,
                                    double variance = 1.0);
  static Kernel matern(int dimension, double smoothness, double lengthscale,
                       double variance = 1.0);
  /// `table` must be symmetric with smallest eigenvalue >= -1e-8 * max diag.
  static Kernel tabulated(Eigen::MatrixXd table);
  /// Reads a tabulated kernel from CSV; the header row carries point ids.
  static Kernel tabulated_from_csv(const std::string& path);
  void tabulated_to_csv(const std::string& path) const;

  [[nodiscard]] double operator()(const Point& a, const Point& b) const;
  [[nodiscard]] Eigen::VectorXd against(const Points& x, const Point& q) const;

  [[nodiscard]] KernelFamily family() const noexcept { return family_; }
  [[nodiscard]] int dimension() const noexcept { return dimension_; }
  [[nodiscard]] double lengthscale() const noexcept { return lengthscale_; }
  [[nodiscard]] double variance() const noexcept { return variance_; }

  /// sup_x k(x, x): the variance scale for stationary families, the largest
  /// diagonal entry for tabulated kernels.
  [[nodiscard]] double k_max() const noexcept { return k_max_; }

  /// -d^2 k / dr^2 at r = 0 for twice-differentiable stationary families;
  /// bounds |g(x) - g(y)| <= |g|_H * r * sqrt(curvature()) for unit-ball g
  /// and calibrates discretization grids.  Throws for Matern 1/2 and
  /// tabulated kernels.
  [[nodiscard]] double curvature() const;

  [[nodiscard]] const Eigen::MatrixXd& table() const;
  [[nodiscard]] int table_size() const;

  [[nodiscard]] nlohmann::json to_json() const;
  static Kernel from_json(const nlohmann::json& j);

 private:
  Kernel() = default;

  KernelFamily family_ = KernelFamily::kSquaredExponential;
  int dimension_ = 1;
  double lengthscale_ = 1.0;
  double variance_ = 1.0;
  double k_max_ = 1.0;
  std::shared_ptr<const Eigen::MatrixXd> table_;
};

/// k(a_i, b_j) for all pairs; either side may be empty (0 x 0 result).
Eigen::MatrixXd kernel_matrix(const Kernel& k, const Points& a, const Points& b);
/// Symmetric Gram matrix k(x_i, x_j).
Eigen::MatrixXd kernel_matrix(const Kernel& k, const Points& x);

/**
 * Partition of matrix rows into groups of bit-identical rows, in first
 * occurrence order.  Finite action sets produce designs with heavy row
 * repetition; kernel quantities over such designs collapse onto the distinct
 * rows, which is what keeps sequential loops from paying O(n) prices for
 * O(distinct) information.
 */
struct RowGroups {
  std::vector<Eigen::Index> representative;  // first row of each group
  std::vector<Eigen::Index> group_of;        // group id per row
  std::vector<Eigen::Index> counts;          // rows per group

  [[nodiscard]] Eigen::Index distinct() const noexcept {
    return static_cast<Eigen::Index>(representative.size());
  }
};

RowGroups group_identical_rows(const Points& x);

/**
 * Rank-m surrogate induced by a set Z of m inducing points:
 *
 *   q(x, x') = k_Z(x)^T k_ZZ^{-1} k_Z(x')
 *
 * realized through the lower Cholesky factor L of k_ZZ + eta I, where eta
 * follows the escalating-jitter ladder (see jittered_llt).  q matches k
 * exactly on Z up to jitter-scale error, and k - q is positive
 * semi-definite, which is what makes q a contraction of k rather than an
 * arbitrary approximation.
 */
class ReducedRankKernel {
 public:
  ReducedRankKernel(Kernel base, Points inducing);

  [[nodiscard]] double operator()(const Point& a, const Point& b) const;
  /// Feature map phi(x) = L^{-1} k_Z(x); q(x, x') = phi(x) . phi(x').
  [[nodiscard]] Eigen::VectorXd features(const Point& x) const;
  [[nodiscard]] Eigen::MatrixXd features(const Points& x) const;

  [[nodiscard]] const Kernel& base() const noexcept { return base_; }
  [[nodiscard]] const Points& inducing() const noexcept { return inducing_; }
  [[nodiscard]] Eigen::Index rank() const noexcept { return inducing_.rows(); }
  /// Final diagonal shift applied to k_ZZ before factoring.
  [[nodiscard]] double jitter() const noexcept { return jitter_; }
  [[nodiscard]] const Eigen::MatrixXd& factor() const noexcept { return factor_; }

  /// Coefficients k_ZZ^{-1} v for a vector of evaluations on Z.
  [[nodiscard]] Eigen::VectorXd solve_gram(const Eigen::VectorXd& v) const;

 private:
  Kernel base_;
  Points inducing_;
  Eigen::MatrixXd factor_;  // lower-triangular L with L L^T = k_ZZ + eta I
  double jitter_ = 0.0;
};

/**
 * Finite combination f = sum_i alpha_i k(., c_i) with its reproducing-space
 * norm |f|^2 = alpha^T K_CC alpha tracked explicitly.  Objectives for every
 * synthetic experiment are drawn from this class so that norm-dependent
 * confidence machinery can be validated against a known ground truth.
 */
class RkhsFunction {
 public:
  RkhsFunction(Kernel kernel, Points centers, Eigen::VectorXd coefficients);

  [[nodiscard]] double operator()(const Point& x) const;
  [[nodiscard]] Eigen::VectorXd at(const Points& x) const;

  [[nodiscard]] double norm() const noexcept { return norm_; }
  [[nodiscard]] const Kernel& kernel() const noexcept { return kernel_; }
  [[nodiscard]] const Points& centers() const noexcept { return centers_; }
  [[nodiscard]] const Eigen::VectorXd& coefficients() const noexcept {
    return coefficients_;
  }
  /// Recomputes alpha^T K_CC alpha from scratch; tests compare against norm().
  [[nodiscard]] double recompute_norm() const;

 private:
  Kernel kernel_;
  Points centers_;
  Eigen::VectorXd coefficients_;
  double norm_ = 0.0;
};

/**
 * Draws a random member of the reproducing space with norm exactly
 * `target_norm`: centers uniform in `bounds` (one [lo, hi] pair per axis),
 * Gaussian coefficients rescaled onto the norm sphere.  Resamples centers
 * whose Gram matrix is numerically singular; throws after five attempts.
 */
RkhsFunction sample_rkhs_function(const Kernel& kernel,
                                  const std::vector<std::pair<double, double>>& bounds,
                                  int num_centers, double target_norm, Rng& rng);

/// Evenly spaced grid over a box, `per_axis` points per axis, endpoints
/// included; rows ordered lexicographically by axis index.
Points uniform_grid(const std::vector<std::pair<double, double>>& bounds,
                    int per_axis);

}  // namespace skr
