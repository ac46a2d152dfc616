/*
 * This file is part of skr, a library for sparse kernel-based regression
 * and black-box optimization.
 *
 * Licensed under the Apache License Version 2.0. See LICENSE file in the
 * project root for license information.
 */
#pragma once

#include <cstdint>
#include <vector>

#include "skr/confidence.hpp"
#include "skr/kernel.hpp"
#include "skr/noise.hpp"

namespace skr {

/**
 * Batch lengths for sparse batched pure exploration: N_0 = 1 and
 * N_i = ceil(sqrt(budget * N_{i-1})), truncated so the lengths sum to the
 * budget exactly.  The doubling-exponent growth caps the realized batch
 * count at ceil(log2 log2 budget) + 1, which is also the B entering every
 * failure-budget split (it is known before the run starts).
 */
struct BatchSchedule {
  std::vector<long> lengths;
  long cap = 0;
};

BatchSchedule sbpe_schedule(long budget);

struct BanditConfig {
  Kernel kernel = Kernel::squared_exponential(1, 0.2);
  Points arms;  // finite action set (grids stand in for continuous domains)
  double tau = 0.5;
  double delta = 0.1;
  long budget = 256;
  double norm_bound = 2.0;  // bound on the objective's RKHS norm
  NoiseModel noise = NoiseModel::gaussian(0.1);
  /// Use domain-uniform intervals (norm-growth slacks) instead of per-arm
  /// ones; requires a twice-differentiable kernel.
  bool continuous_intervals = false;
  double oversample = 16.0;
  std::uint64_t design_seed = 0;
  std::uint64_t noise_seed = 0;
};

struct BanditBatch {
  int index = 0;          // 1-based
  long pulls = 0;         // realized length (last batch may be truncated)
  std::vector<Eigen::Index> active_before;
  std::vector<Eigen::Index> active_after;
  double beta = 0.0;          // width multiplier used at elimination
  double lambda_hat = 0.0;    // max per-step gap bound within the batch
  double lambda_final = 0.0;  // audited gap of the batch design at elimination
  bool lambda_final_exact = false;
  bool events_held = false;   // every per-step gap <= tau^2
  double max_width = 0.0;     // widest interval among surviving arms
  bool best_survived = false;
};

struct BanditRun {
  std::vector<Eigen::Index> pulled;  // arm index per step, size = budget
  std::vector<double> step_regret;   // value gap per step
  std::vector<BanditBatch> batches;
  long batch_cap = 0;
  Eigen::Index recommended = 0;  // final active arm with the best lower bound
  bool best_survived = false;    // true best still active after every batch
  double cumulative_regret = 0.0;
  double realized_information_gain = 0.0;  // of the full pulled design
};

/**
 * Successive-elimination pure exploration with sparse posteriors.  Each
 * batch restarts inference from its own observations only: inducing points
 * are refreshed by leverage sampling every step (failure budget
 * 3 delta / (pi^2 * cap * j^2) at within-batch step j), the active arm with
 * the largest posterior deviation is pulled, and at the batch boundary arms
 * whose upper bound falls below the best lower bound are dropped.  Within a
 * batch the pull sequence depends only on (design_seed, active set), never
 * on that batch's observations.
 */
BanditRun run_sbpe(const BanditConfig& config, const Eigen::VectorXd& arm_values);

/// Convenience overload: evaluates the objective on the arms.
BanditRun run_sbpe(const BanditConfig& config, const RkhsFunction& objective);

/// 0.5 * log det(I + K / tau^2) for a design given by per-arm pull counts;
/// O(arms^3) regardless of the number of pulls.
double information_gain_by_counts(const Eigen::MatrixXd& arm_gram,
                                  const std::vector<long>& counts, double tau);

}  // namespace skr
