/*
 * This file is part of skr, a library for sparse kernel-based regression
 * and black-box optimization.
 *
 * Licensed under the Apache License Version 2.0. See LICENSE file in the
 * project root for license information.
 */
#include "skr/confidence.hpp"

#include <cmath>
#include <stdexcept>

#include "skr/inducing.hpp"

namespace skr {

namespace {

void validate(const ConfidenceParams& params, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("confidence: delta must lie in (0, 1)");
  }
  if (params.tau <= 0) throw std::invalid_argument("confidence: tau must be positive");
  if (params.norm_bound < 0) {
    throw std::invalid_argument("confidence: norm bound must be non-negative");
  }
  if (!(params.lambda_max >= 0)) {
    throw std::invalid_argument("confidence: lambda_max must be audited and non-negative");
  }
}

}  // namespace

double beta(const ConfidenceParams& params, double delta) {
  validate(params, delta);
  if (params.sub_gaussian_radius < 0) {
    throw std::invalid_argument("confidence: sub-Gaussian radius must be non-negative");
  }
  const double structural =
      (2.0 + std::sqrt(params.lambda_max) / params.tau) * params.norm_bound;
  const double noise = (params.sub_gaussian_radius / params.tau) *
                       std::sqrt(2.0 * std::log(1.0 / delta));
  return structural + noise;
}

double beta_light_tailed(const ConfidenceParams& params,
                         const LightTailBound& tail, double delta) {
  validate(params, delta);
  if (tail.h0 <= 0 || tail.xi0 <= 0) {
    throw std::invalid_argument("confidence: light-tail bound must be positive");
  }
  const double structural =
      (2.0 + std::sqrt(params.lambda_max) / params.tau) * params.norm_bound;
  const double log_term = std::log(1.0 / delta);
  const double factor =
      std::max(tail.xi0, 2.0 * log_term / (tail.h0 * tail.h0));
  return structural + std::sqrt(2.0 * factor * log_term) / params.tau;
}

double mean_norm_bound(const ConfidenceParams& params, double k_max,
                       Eigen::Index n, double delta) {
  validate(params, delta);
  if (n < 1) throw std::invalid_argument("confidence: n must be positive");
  const double root_n = std::sqrt(static_cast<double>(n));
  return params.norm_bound * (1.0 + root_n * k_max / params.tau) +
         (root_n * params.sub_gaussian_radius / params.tau) *
             std::sqrt(2.0 * std::log(2.0 * static_cast<double>(n) / delta));
}

UniformConfidence uniform_confidence(const ConfidenceParams& params, double k_max,
                                     double cover_constant, int dimension,
                                     Eigen::Index n, double delta) {
  if (cover_constant <= 0) {
    throw std::invalid_argument("confidence: cover constant must be positive");
  }
  UniformConfidence out;
  out.mean_norm_bound = mean_norm_bound(params, k_max, n, delta / 2.0);
  out.cover_count = cover_constant *
                    std::pow(out.mean_norm_bound, dimension) *
                    std::pow(static_cast<double>(n), dimension);
  out.cover_count = std::max(out.cover_count, 1.0);
  out.beta_tilde = beta(params, delta / (2.0 * out.cover_count));
  out.mean_slack = 2.0 / static_cast<double>(n);
  out.deviation_slack = 2.0 / std::sqrt(static_cast<double>(n));
  return out;
}

double cover_constant(const Kernel& kernel) {
  // |g(x) - g(y)| <= |g| * r * sqrt(curvature), so ceil(c B n) points per
  // unit length with c = sqrt(curvature)/2 track norm-B functions to 1/n.
  return 0.5 * std::sqrt(kernel.curvature());
}

Points covering_grid(const Kernel& kernel,
                     const std::vector<std::pair<double, double>>& bounds,
                     double norm_bound, Eigen::Index n) {
  if (norm_bound <= 0 || n < 1) {
    throw std::invalid_argument("covering grid: need positive norm bound and n");
  }
  const double root_d = std::sqrt(static_cast<double>(bounds.size()));
  const double lipschitz = norm_bound * std::sqrt(kernel.curvature());
  // Nearest grid point within (h/2) sqrt(d); keep that displacement's
  // function change below 1/n.
  const double spacing =
      2.0 / (static_cast<double>(n) * lipschitz * root_d);
  int per_axis = 2;
  for (const auto& [lo, hi] : bounds) {
    const double width = hi - lo;
    if (width <= 0) throw std::invalid_argument("covering grid: empty axis");
    per_axis = std::max(per_axis,
                        static_cast<int>(std::ceil(width / spacing)) + 1);
  }
  return uniform_grid(bounds, per_axis);
}

ErrorSplit split_prediction_error(const RkhsFunction& objective,
                                  const SparsePosterior& posterior,
                                  double lambda_max, const Point& x) {
  if (!(lambda_max >= 0)) {
    throw std::invalid_argument("error split: lambda_max must be audited");
  }
  const RkhsFunction projected =
      project_function(objective, posterior.reduced());
  const auto& data = posterior.data();
  const Eigen::VectorXd weights = posterior.prediction_weights(x);
  const Eigen::VectorXd f_design = objective.at(data.x);
  const Eigen::VectorXd p_design = projected.at(data.x);

  ErrorSplit out;
  out.residual = objective(x) - projected(x);
  out.surrogate_bias = projected(x) - weights.dot(p_design);
  out.leakage = weights.dot(p_design - f_design);
  out.noise_transfer = weights.dot(f_design - data.y);

  const auto split = posterior.decompose(x);
  const double deviation = std::sqrt(posterior.variance(x));
  const double orthogonal_norm = std::sqrt(std::max(
      0.0, objective.norm() * objective.norm() - projected.norm() * projected.norm()));
  out.residual_bound = objective.norm() * std::sqrt(split.projection);
  out.surrogate_bias_bound = projected.norm() * std::sqrt(split.reduced_prediction);
  out.leakage_bound =
      orthogonal_norm * std::sqrt(lambda_max) / data.tau * deviation;
  out.weight_norm_scaled = data.tau * weights.norm();
  return out;
}

CoverageResult run_coverage(const CoverageConfig& config) {
  if (config.noise_dependent_design) {
    throw std::invalid_argument(
        "coverage: design must be chosen independently of the noise");
  }
  if (config.trials < 1) throw std::invalid_argument("coverage: need trials");
  if (config.light_tailed && config.tail_h0 <= 0) {
    throw std::invalid_argument("coverage: light-tailed run needs a positive h0");
  }
  if (!config.light_tailed && !config.noise.sub_gaussian()) {
    throw std::invalid_argument(
        "coverage: heavy-tailed noise requires the light-tailed width");
  }

  // Everything structural is frozen before any noise stream is touched.
  Rng domain_rng(config.seed, streams::make(streams::kDomain, 0));
  Points design(config.design_size, static_cast<Eigen::Index>(config.bounds.size()));
  for (Eigen::Index i = 0; i < design.rows(); ++i) {
    for (Eigen::Index d = 0; d < design.cols(); ++d) {
      const auto& [lo, hi] = config.bounds[d];
      design(i, d) = domain_rng.uniform(lo, hi);
    }
  }
  Rng objective_rng(config.seed, streams::make(streams::kObjective, 0));
  const RkhsFunction objective =
      sample_rkhs_function(config.kernel, config.bounds, config.objective_centers,
                           config.objective_norm, objective_rng);
  const InducingSelection selection = select_recursive_leverage(
      config.kernel, design, config.tau, 0.02, config.seed);
  Rng probe_rng(config.seed, streams::make(streams::kProbe, 0));
  Point query(config.bounds.size());
  for (std::size_t d = 0; d < config.bounds.size(); ++d) {
    query[d] = probe_rng.uniform(config.bounds[d].first, config.bounds[d].second);
  }

  const Eigen::VectorXd f_design = objective.at(design);
  const SparsePosterior posterior(
      config.kernel, Dataset(design, f_design, config.tau), selection.z);

  ConfidenceParams params;
  params.norm_bound = config.objective_norm;
  params.sub_gaussian_radius =
      config.noise.sub_gaussian() ? config.noise.sub_gaussian_radius() : 0.0;
  params.tau = config.tau;
  params.lambda_max = selection.lambda_max;

  CoverageResult result;
  result.trials = config.trials;
  result.lambda_max = selection.lambda_max;
  result.inducing_rank = selection.rank();
  result.beta_used =
      config.light_tailed
          ? beta_light_tailed(params, config.noise.light_tail(config.tail_h0),
                              config.delta)
          : beta(params, config.delta);

  // The mean is linear in y, so per-trial means are dot products against
  // fixed weight vectors.
  const Eigen::VectorXd query_weights = posterior.prediction_weights(query);
  const double query_deviation = std::sqrt(posterior.variance(query));
  const double query_truth = objective(query);
  result.mean_width = 2.0 * result.beta_used * query_deviation;

  Points grid;
  Eigen::MatrixXd grid_weights;   // trials x grid means come from this
  Eigen::VectorXd grid_truth, grid_deviation;
  UniformConfidence uniform{};
  if (config.uniform) {
    grid = uniform_grid(config.bounds, config.uniform_grid_points);
    uniform = uniform_confidence(params, config.kernel.k_max(),
                                 cover_constant(config.kernel),
                                 config.kernel.dimension(), config.design_size,
                                 config.delta);
    result.beta_tilde_used = uniform.beta_tilde;
    grid_weights.resize(grid.rows(), design.rows());
    grid_truth.resize(grid.rows());
    grid_deviation.resize(grid.rows());
    for (Eigen::Index g = 0; g < grid.rows(); ++g) {
      const Point p = grid.row(g);
      grid_weights.row(g) = posterior.prediction_weights(p).transpose();
      grid_truth[g] = objective(p);
      grid_deviation[g] = std::sqrt(posterior.variance(p));
    }
  }

  long lower = 0;
  long upper = 0;
  long both = 0;
  long uniform_ok = 0;
  Eigen::VectorXd y(design.rows());
  for (long trial = 0; trial < config.trials; ++trial) {
    Rng noise_rng(config.seed, streams::make(streams::kNoise, trial));
    for (Eigen::Index i = 0; i < design.rows(); ++i) {
      y[i] = f_design[i] + config.noise.sample(noise_rng);
    }
    const double mean = query_weights.dot(y);
    const double half = result.beta_used * query_deviation;
    const bool low_ok = query_truth >= mean - half;
    const bool up_ok = query_truth <= mean + half;
    lower += low_ok;
    upper += up_ok;
    both += low_ok && up_ok;
    if (config.uniform) {
      const Eigen::VectorXd means = grid_weights * y;
      bool all_in = true;
      for (Eigen::Index g = 0; g < grid.rows(); ++g) {
        const double slack = uniform.mean_slack +
                             uniform.beta_tilde *
                                 (grid_deviation[g] + uniform.deviation_slack);
        if (std::abs(grid_truth[g] - means[g]) > slack) {
          all_in = false;
          break;
        }
      }
      uniform_ok += all_in;
    }
  }
  const double denom = static_cast<double>(config.trials);
  result.lower_rate = static_cast<double>(lower) / denom;
  result.upper_rate = static_cast<double>(upper) / denom;
  result.two_sided_rate = static_cast<double>(both) / denom;
  result.uniform_rate = static_cast<double>(uniform_ok) / denom;
  return result;
}

}  // namespace skr
