/*
 * This file is part of skr, a library for sparse kernel-based regression
 * and black-box optimization.
 *
 * Licensed under the Apache License Version 2.0. See LICENSE file in the
 * project root for license information.
 */
#pragma once

#include <Eigen/Dense>

#include "skr/kernel.hpp"
#include "skr/posterior.hpp"

namespace skr {

/**
 * Reference implementations used to validate the fast paths.
 *
 * Everything in this header is computed from explicit eigendecomposition
 * based inverses and literal transcriptions of the defining formulas, with
 * no shared code or cached factors from the production classes.  These
 * routines are O(n^3) per query and exist solely as ground truth; keep them
 * that way.
 */
namespace oracle {

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
};

struct SparseMoments {
  double mean = 0.0;
  double variance = 0.0;
  // Additive variance split evaluated from its defining expressions.
  double projection = 0.0;          // k(x,x) - q(x,x)
  double surrogate_variance = 0.0;  // posterior variance of the rank-m kernel at x
  double noise = 0.0;               // tau^2 |V_n(x)|^2
};

/// Full-rank posterior moments via the n x n ridge inverse.
Moments exact_posterior(const Kernel& kernel, const Dataset& data, const Point& x);

/// Inducing-point posterior moments and variance split, each term from its
/// own dense formula.
SparseMoments sparse_posterior(const Kernel& kernel, const Dataset& data,
                               const Points& inducing, const Point& x);

/// Sparse posterior reached through the optimal variational parameters: the
/// optimizing mean/covariance over the inducing values are substituted into
/// the predictive family.  Must agree with sparse_posterior.
Moments variational_posterior(const Kernel& kernel, const Dataset& data,
                              const Points& inducing, const Point& x);

/// Prediction weights V_n(x) from the m x m system (the defining form).
Eigen::VectorXd prediction_weights(const Kernel& kernel, const Dataset& data,
                                   const Points& inducing, const Point& x);

/// Prediction weights from the n x n rank-m-kernel ridge system
/// (tau^2 I + Q_XX)^{-1} q_X(x); equals prediction_weights analytically.
Eigen::VectorXd prediction_weights_dual(const Kernel& kernel, const Dataset& data,
                                        const Points& inducing, const Point& x);

/// Ridge leverage scores diag(K (K + tau^2 I)^{-1}) via dense inverse.
Eigen::VectorXd leverage_scores(const Kernel& kernel, const Points& x, double tau);

/// Largest eigenvalue of K_XX - Q_XX by full symmetric eigendecomposition.
double lambda_max(const Kernel& kernel, const Points& x, const Points& inducing);

/// 0.5 * sum log(1 + eigenvalue / tau^2) over the Gram spectrum.
double information_gain(const Kernel& kernel, const Points& x, double tau);

/// Sum of eigenvalue / (eigenvalue + tau^2) over the Gram spectrum.
double effective_dimension(const Kernel& kernel, const Points& x, double tau);

}  // namespace oracle
}  // namespace skr
