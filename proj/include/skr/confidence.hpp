/*
 * This file is part of skr, a library for sparse kernel-based regression
 * and black-box optimization.
 *
 * Licensed under the Apache License Version 2.0. See LICENSE file in the
 * project root for license information.
 */
#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "skr/kernel.hpp"
#include "skr/noise.hpp"
#include "skr/posterior.hpp"

namespace skr {

/**
 * Inputs of the deviation-width multiplier for sparse-posterior confidence
 * intervals.  lambda_max is the audited largest eigenvalue of K_XX - Q_XX
 * for the design/inducing pair behind the posterior; the width guarantee is
 * only valid when both the design and the inducing set were chosen without
 * looking at the observation noise.
 */
struct ConfidenceParams {
  double norm_bound = 1.0;         // bound on the objective's RKHS norm
  double sub_gaussian_radius = 1.0;  // noise radius R
  double tau = 1.0;
  double lambda_max = 0.0;
};

/**
 * Width multiplier for a fixed query point: |f(x) - mean(x)| <=
 * beta(delta) * deviation(x) holds with probability at least 1 - delta when
 * the posterior's design is noise-independent.
 *
 *   beta(delta) = (2 + sqrt(lambda_max)/tau) * norm_bound
 *               + (R/tau) * sqrt(2 log(1/delta))
 */
double beta(const ConfidenceParams& params, double delta);

/// Same width with sub-Gaussianity relaxed to a light-tail MGF bound:
/// the noise term becomes
///   (1/tau) * sqrt(2 * max(xi0, 2 log(1/delta)/h0^2) * log(1/delta)).
double beta_light_tailed(const ConfidenceParams& params,
                         const LightTailBound& tail, double delta);

/**
 * Pieces of the interval that holds uniformly over a compact domain rather
 * than at one fixed point.  The posterior mean is itself a data-dependent
 * member of the reproducing space, so uniformity is bought by covering the
 * domain at resolution 1/n for functions up to the mean's norm:
 *
 *   mean_norm_bound  = C(1 + sqrt(n) k_max / tau)
 *                    + (sqrt(n) R / tau) sqrt(2 log(2n / (delta/2)))
 *   cover_count      = cover_constant * mean_norm_bound^d * n^d
 *   beta_tilde       = beta(delta / (2 * cover_count))
 *
 * and the interval at x is mean(x) +/- (2/n + beta_tilde * (dev(x) + 2/sqrt(n))).
 */
struct UniformConfidence {
  double mean_norm_bound = 0.0;
  double cover_count = 0.0;
  double beta_tilde = 0.0;
  double mean_slack = 0.0;       // 2 / n
  double deviation_slack = 0.0;  // 2 / sqrt(n)
};

UniformConfidence uniform_confidence(const ConfidenceParams& params, double k_max,
                                     double cover_constant, int dimension,
                                     Eigen::Index n, double delta);

/// High-probability bound on the posterior mean's own norm (the delta/2
/// budget already applied by uniform_confidence is NOT applied here).
double mean_norm_bound(const ConfidenceParams& params, double k_max,
                       Eigen::Index n, double delta);

/// Per-kernel constant making ceil(c * B * n) grid points per unit length
/// enough to track any norm-B function to accuracy 1/n.
double cover_constant(const Kernel& kernel);

/**
 * Grid fine enough that |g(x) - g([x])| <= 1/n for every g with norm at most
 * `norm_bound`; [x] is the nearest grid point.  Spacing comes from the
 * kernel's curvature at zero, so only twice-differentiable kernels qualify.
 */
Points covering_grid(const Kernel& kernel,
                     const std::vector<std::pair<double, double>>& bounds,
                     double norm_bound, Eigen::Index n);

/**
 * Four-term split of the prediction error f(x) - mean(x) for a known
 * objective, with the per-term deterministic handles used by the width
 * analysis.  Writing p = projection of f onto the inducing span and V the
 * prediction weights:
 *
 *   residual       = f(x) - p(x)            <= |f| sqrt(projection term)
 *   surrogate_bias = p(x) - V . p_X         <= |p| sqrt(reduced prediction term)
 *   leakage        = V . (p_X - f_X)        <= |f - p| sqrt(lambda_max)/tau * dev(x)
 *   noise_transfer = V . (f_X - Y)          with tau |V| <= dev(x)
 */
struct ErrorSplit {
  double residual = 0.0;
  double surrogate_bias = 0.0;
  double leakage = 0.0;
  double noise_transfer = 0.0;

  double residual_bound = 0.0;
  double surrogate_bias_bound = 0.0;
  double leakage_bound = 0.0;       // requires the audited lambda_max
  double weight_norm_scaled = 0.0;  // tau * |V(x)|

  [[nodiscard]] double total() const noexcept {
    return residual + surrogate_bias + leakage + noise_transfer;
  }
};

ErrorSplit split_prediction_error(const RkhsFunction& objective,
                                  const SparsePosterior& posterior,
                                  double lambda_max, const Point& x);

/**
 * Coverage experiment: a fixed design, inducing set, objective, and query
 * point; fresh noise per trial.  The query point and all structure are
 * frozen before any noise is drawn, matching the independence requirement of
 * the width guarantee.  Scenarios marked noise_dependent_design are refused.
 */
struct CoverageConfig {
  Kernel kernel = Kernel::squared_exponential(1, 0.2);
  std::vector<std::pair<double, double>> bounds = {{0.0, 1.0}};
  Eigen::Index design_size = 100;
  int objective_centers = 8;
  double objective_norm = 2.0;
  double tau = 0.1;
  double delta = 0.1;
  NoiseModel noise = NoiseModel::gaussian(0.1);
  long trials = 2000;
  std::uint64_t seed = 0;
  bool light_tailed = false;  // use the MGF-bound width instead of sub-Gaussian
  double tail_h0 = 0.0;       // required when light_tailed
  bool uniform = false;       // also check the domain-uniform interval
  int uniform_grid_points = 256;
  bool noise_dependent_design = false;  // adversarial fixture; run_coverage throws
};

struct CoverageResult {
  long trials = 0;
  double lower_rate = 0.0;     // fraction with f(x0) >= lower bound
  double upper_rate = 0.0;     // fraction with f(x0) <= upper bound
  double two_sided_rate = 0.0;
  double uniform_rate = 0.0;   // fraction with f inside the interval on every grid point
  double beta_used = 0.0;
  double beta_tilde_used = 0.0;
  double lambda_max = 0.0;
  Eigen::Index inducing_rank = 0;
  double mean_width = 0.0;
};

CoverageResult run_coverage(const CoverageConfig& config);

}  // namespace skr
