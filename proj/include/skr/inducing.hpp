/*
 * This file is part of skr, a library for sparse kernel-based regression
 * and black-box optimization.
 *
 * Licensed under the Apache License Version 2.0. See LICENSE file in the
 * project root for license information.
 */
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "skr/kernel.hpp"
#include "skr/rng.hpp"

namespace skr {

class SparsePosterior;

enum class SelectionMethod { kRecursiveLeverage, kUniform, kManual };

std::string to_string(SelectionMethod method);

/// How the spectral gap of a selection is audited.
enum class LambdaAudit {
  kDefault,   // dense eigensolver up to 2000 points, power iteration above
  kEstimate,  // power iteration regardless of size
  kNone,      // leave unset; callers track the gap through cheaper bounds
};

/**
 * A chosen set of inducing points together with the evidence produced while
 * choosing it: the per-point leverage estimates, the failure budget that was
 * actually in force, the theoretical selection-size cap, and the audited
 * spectral gap lambda_max(K_XX - Q_XX).
 */
struct InducingSelection {
  Points z;
  std::vector<Eigen::Index> source_indices;  // rows of the design behind z
  SelectionMethod method = SelectionMethod::kManual;
  double delta_used = 0.0;
  std::uint64_t seed = 0;
  Eigen::VectorXd leverage_estimates;  // final-round estimate per design row
  double estimated_dimension = 0.0;    // sum of the estimates
  double size_cap = 0.0;               // 384 * d * log(3 max(d,1) / delta)
  double lambda_max = 0.0;
  bool lambda_exact = false;  // true when audited by the dense eigensolver

  [[nodiscard]] Eigen::Index rank() const noexcept { return z.rows(); }

  [[nodiscard]] nlohmann::json to_json() const;
  /// Rebuilds the selection from stored indices against the original design.
  static InducingSelection from_json(const nlohmann::json& j, const Points& design);
};

/**
 * Recursive ridge leverage score sampling.
 *
 * The recursion halves the design, selects inducing points for the half,
 * and scores every point against that sample with the tau-regularized
 * posterior variance ratio
 *
 *   score(x_i) = variance_{sample}(x_i) / tau^2,
 *
 * which can only over-estimate the true leverage score because conditioning
 * on fewer points never lowers the posterior variance.  Designs no larger
 * than 16 * ceil(estimated dimension) (or 64 points outright) are kept
 * whole.  Otherwise each point enters independently with probability
 * min(1, oversample * score * log(max(d, 1) / delta)).
 *
 * `delta` is clamped to stay below 1/32, the regime in which the sampled
 * surrogate keeps lambda_max below tau^2 with probability 1 - delta; the
 * clamped value is recorded.  The draw is a pure function of
 * (seed, stream, design), so reruns are bitwise reproducible; sequential
 * callers pass their step index as `stream` to decorrelate refreshes.
 * Duplicate rows are selected at most once.
 */
InducingSelection select_recursive_leverage(const Kernel& kernel, const Points& x,
                                            double tau, double delta,
                                            std::uint64_t seed,
                                            double oversample = 16.0,
                                            LambdaAudit audit = LambdaAudit::kDefault,
                                            std::uint64_t stream = 0);

/// Uniform sample of `target` distinct rows; baseline for ablations.
InducingSelection select_uniform(const Kernel& kernel, const Points& x,
                                 Eigen::Index target, std::uint64_t seed,
                                 LambdaAudit audit = LambdaAudit::kDefault,
                                 std::uint64_t stream = 0);

/// Explicitly supplied rows of the design.
InducingSelection select_manual(const Kernel& kernel, const Points& x,
                                std::vector<Eigen::Index> indices,
                                LambdaAudit audit = LambdaAudit::kDefault);

/**
 * Largest eigenvalue of K_XX - Q_XX for inducing set Z, by full symmetric
 * eigendecomposition (O(n^3), audit-grade).  An empty Z degenerates to the
 * largest eigenvalue of K_XX.  Round-off negatives are clamped to zero.
 */
double compute_lambda_max(const Kernel& kernel, const Points& x, const Points& z);

/// Power-iteration estimate of the same quantity; `iters` refinements with
/// relative tolerance `rtol`.  Randomized start drawn from `rng`.
double estimate_lambda_max(const Kernel& kernel, const Points& x, const Points& z,
                           Rng& rng, int iters = 20, double rtol = 1e-3);

/**
 * Cheap upper bound trace(K_XX - Q_XX) >= lambda_max computed from the
 * factors a sparse posterior already carries; O(m^3 + n) per call.  Used to
 * certify lambda_max <= tau^2 inside sequential loops without assembling
 * n x n matrices.
 */
double lambda_trace_bound(const SparsePosterior& posterior);

/// Exact ridge leverage scores diag(K (K + tau^2 I)^{-1}) via Cholesky.
Eigen::VectorXd exact_leverage_scores(const Kernel& kernel, const Points& x,
                                      double tau);

}  // namespace skr
