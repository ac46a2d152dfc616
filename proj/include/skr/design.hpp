/*
 * This file is part of skr, a library for sparse kernel-based regression
 * and black-box optimization.
 *
 * Licensed under the Apache License Version 2.0. See LICENSE file in the
 * project root for license information.
 */
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "skr/inducing.hpp"
#include "skr/kernel.hpp"
#include "skr/noise.hpp"
#include "skr/posterior.hpp"

namespace skr {

/**
 * Pure uncertainty-reduction design over a finite candidate set: at step j
 * the inducing set is refreshed by leverage sampling with failure budget
 * delta_j = 3 delta / (pi^2 j^2) (so the budgets sum below delta/2), and the
 * point maximizing the sparse posterior deviation is queried; ties break to
 * the lowest row index.  Design randomness and observation noise come from
 * separate seeds, so the visited sequence is a pure function of design_seed.
 */
struct DesignConfig {
  Kernel kernel = Kernel::squared_exponential(1, 0.2);
  Points domain;        // candidate rows; grids stand in for continuous boxes
  double tau = 0.5;
  double delta = 0.1;
  Eigen::Index steps = 100;
  double oversample = 16.0;
  int refresh_every = 1;     // inducing refresh cadence; keep 1 for guarantee runs
  bool audit_exact = false;  // track the full posterior alongside (<= 1000 steps)
  std::uint64_t design_seed = 0;
  std::uint64_t noise_seed = 0;
};

struct DesignStep {
  Eigen::Index chosen = 0;            // domain row queried this step
  double selected_deviation = 0.0;    // sparse posterior deviation at the query
  Eigen::Index rank = 0;              // inducing points after the refresh
  double delta_j = 0.0;
  double lambda = 0.0;                // per-step spectral gap bound/estimate
  bool lambda_certified = false;      // true when the trace certificate held
  double gram_jitter = 0.0;
  double exact_deviation = 0.0;       // audit only; NaN otherwise
};

struct DesignRun {
  std::vector<DesignStep> steps;
  Points design;                   // visited points in order
  Eigen::VectorXd observations;
  std::vector<Eigen::Index> chosen;  // domain row per step
  std::vector<Eigen::Index> final_inducing;  // rows of `design`
  double final_gram_jitter = 0.0;
  double realized_information_gain = 0.0;  // of the visited design
  double lambda_hat = 0.0;       // max per-step gap bound, final refresh included
  double final_lambda = 0.0;     // audited gap of the final design/inducing pair
  bool final_lambda_exact = false;
  bool lambda_events_held = false;  // every per-step gap <= tau^2
  double max_deviation = 0.0;       // max sparse posterior deviation over the domain
  double delta_spent = 0.0;         // sum of the per-step failure budgets
};

DesignRun run_design(const DesignConfig& config, const RkhsFunction& objective,
                     const NoiseModel& noise);

/// Rebuilds the posterior a finished run ends with (final inducing set,
/// all observations).
SparsePosterior final_posterior(const DesignConfig& config, const DesignRun& run);

/**
 * Sup-norm error of the final posterior mean against the objective over the
 * candidate set, with the rate certificate
 *
 *   bound = (3 C + (R/tau) sqrt(2 log(4 |domain| / delta)))
 *           * sqrt(8 I / (log(1 + 1/tau^2) n))
 *
 * where C bounds the objective norm, R the noise radius, and I is the
 * realized information gain of the visited design.  The certificate is only
 * claimed when every per-step spectral gap stayed below tau^2.
 */
struct UniformErrorReport {
  double sup_error = 0.0;
  double bound = 0.0;
  bool bound_violated = false;
  bool events_held = false;
  double information_gain = 0.0;
};

UniformErrorReport uniform_error(const DesignConfig& config, const DesignRun& run,
                                 const RkhsFunction& objective, double norm_bound,
                                 double sub_gaussian_radius, double delta);

}  // namespace skr
