/*
 * This file is part of skr, a library for sparse kernel-based regression
 * and black-box optimization.
 *
 * Licensed under the Apache License Version 2.0. See LICENSE file in the
 * project root for license information.
 */
#include "skr/bandit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

#include "skr/inducing.hpp"
#include "skr/posterior.hpp"

namespace skr {

namespace {

constexpr double kPi = 3.14159265358979323846;

Point index_point(Eigen::Index arm) {
  Point p(1);
  p[0] = static_cast<double>(arm);
  return p;
}

std::uint64_t batch_stream(int batch, std::uint64_t step) {
  return (static_cast<std::uint64_t>(batch) << 24) | step;
}

struct IntervalSet {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

}  // namespace

BatchSchedule sbpe_schedule(long budget) {
  if (budget < 1) throw std::invalid_argument("schedule: budget must be positive");
  BatchSchedule out;
  if (budget == 1) {
    out.lengths = {1};
    out.cap = 1;
    return out;
  }
  out.cap = static_cast<long>(
                std::ceil(std::log2(std::log2(static_cast<double>(budget))))) +
            1;
  out.cap = std::max(out.cap, 1L);
  long previous = 1;
  long total = 0;
  while (total < budget) {
    long next = static_cast<long>(
        std::ceil(std::sqrt(static_cast<double>(budget) * static_cast<double>(previous))));
    previous = next;
    next = std::min(next, budget - total);
    out.lengths.push_back(next);
    total += next;
  }
  return out;
}

double information_gain_by_counts(const Eigen::MatrixXd& arm_gram,
                                  const std::vector<long>& counts, double tau) {
  if (static_cast<Eigen::Index>(counts.size()) != arm_gram.rows()) {
    throw std::invalid_argument("information gain: counts/gram size mismatch");
  }
  std::vector<Eigen::Index> used;
  for (Eigen::Index a = 0; a < arm_gram.rows(); ++a) {
    if (counts[a] > 0) used.push_back(a);
  }
  if (used.empty()) return 0.0;
  const auto r = static_cast<Eigen::Index>(used.size());
  // det(I_n + K_XX / tau^2) over the repeated design collapses onto the
  // distinct arms: det(I_r + D^{1/2} K D^{1/2} / tau^2) with D the counts.
  Eigen::MatrixXd m(r, r);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < r; ++j) {
      m(i, j) = std::sqrt(static_cast<double>(counts[used[i]])) *
                std::sqrt(static_cast<double>(counts[used[j]])) *
                arm_gram(used[i], used[j]) / (tau * tau);
    }
  }
  m.diagonal().array() += 1.0;
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("information gain: count system failed to factor");
  }
  double sum = 0.0;
  const Eigen::MatrixXd l = llt.matrixL();
  for (Eigen::Index i = 0; i < r; ++i) sum += std::log(l(i, i));
  return sum;
}

BanditRun run_sbpe(const BanditConfig& config, const Eigen::VectorXd& arm_values) {
  const auto arms = config.arms.rows();
  if (arms == 0) throw std::invalid_argument("bandit: no arms");
  if (arm_values.size() != arms) {
    throw std::invalid_argument("bandit: arm values size mismatch");
  }
  if (config.budget < 1) throw std::invalid_argument("bandit: budget must be positive");
  if (!config.noise.sub_gaussian()) {
    throw std::invalid_argument("bandit: width multiplier needs sub-Gaussian noise");
  }

  // All inference runs over arm indices against the precomputed Gram table;
  // kernel evaluations inside the batch loops are array lookups.
  const Eigen::MatrixXd arm_gram = kernel_matrix(config.kernel, config.arms);
  const Kernel table_kernel = Kernel::tabulated(arm_gram);
  const double tau2 = config.tau * config.tau;

  const BatchSchedule schedule = sbpe_schedule(config.budget);
  const double cap = static_cast<double>(schedule.cap);

  double cover = 0.0;
  if (config.continuous_intervals) {
    cover = cover_constant(config.kernel);  // throws for non-smooth kernels
  }

  BanditRun run;
  run.batch_cap = schedule.cap;
  run.pulled.reserve(config.budget);
  run.step_regret.reserve(config.budget);

  Eigen::Index best_arm = 0;
  arm_values.maxCoeff(&best_arm);
  const double best_value = arm_values[best_arm];

  std::vector<Eigen::Index> active(arms);
  for (Eigen::Index a = 0; a < arms; ++a) active[a] = a;

  std::vector<long> pull_counts(arms, 0);
  std::uint64_t global_step = 0;
  bool survived_all = true;
  IntervalSet last_intervals;
  std::vector<Eigen::Index> last_active;

  for (std::size_t b = 0; b < schedule.lengths.size(); ++b) {
    const int batch_index = static_cast<int>(b) + 1;
    const long length = schedule.lengths[b];
    BanditBatch record;
    record.index = batch_index;
    record.pulls = length;
    record.active_before = active;

    Dataset data(1, config.tau);
    std::optional<SparsePosterior> posterior;
    Points inducing(0, 1);
    double lambda_hat = 0.0;
    bool events = true;

    for (long j = 1; j <= length; ++j) {
      const double delta_j = 3.0 * config.delta /
                             (kPi * kPi * cap * static_cast<double>(j) *
                              static_cast<double>(j));
      const InducingSelection selection = select_recursive_leverage(
          table_kernel, data.x, config.tau, delta_j, config.design_seed,
          config.oversample, LambdaAudit::kNone,
          batch_stream(batch_index, static_cast<std::uint64_t>(j)));
      inducing = selection.z;
      posterior.emplace(table_kernel, data, inducing);

      Eigen::Index pick = active.front();
      double best_var = -1.0;
      for (const auto arm : active) {
        const double v = posterior->variance(index_point(arm));
        if (v > best_var) {
          best_var = v;
          pick = arm;
        }
      }

      const double trace = lambda_trace_bound(*posterior);
      double lambda = trace;
      if (trace > tau2) {
        Rng rng(config.design_seed,
                streams::make(streams::kDesign,
                              batch_stream(batch_index,
                                           static_cast<std::uint64_t>(j))));
        lambda = estimate_lambda_max(table_kernel, data.x, inducing, rng, 100, 1e-9);
      }
      lambda_hat = std::max(lambda_hat, lambda);
      events = events && lambda <= tau2;

      ++global_step;
      Rng noise_rng(config.noise_seed,
                    streams::make(streams::kNoise, global_step));
      const double y = arm_values[pick] + config.noise.sample(noise_rng);
      data.append(index_point(pick), y);
      posterior->append(index_point(pick), y);
      run.pulled.push_back(pick);
      run.step_regret.push_back(best_value - arm_values[pick]);
      run.cumulative_regret += best_value - arm_values[pick];
      ++pull_counts[pick];
    }

    // Elimination uses a posterior whose inducing set saw the whole batch.
    const double final_delta =
        3.0 * config.delta /
        (kPi * kPi * cap * static_cast<double>(length + 1) *
         static_cast<double>(length + 1));
    const InducingSelection final_selection = select_recursive_leverage(
        table_kernel, data.x, config.tau, final_delta, config.design_seed,
        config.oversample, LambdaAudit::kNone,
        batch_stream(batch_index, static_cast<std::uint64_t>(length + 1)));
    posterior.emplace(table_kernel, data, final_selection.z);

    constexpr Eigen::Index kDenseAuditLimit = 2000;
    if (data.n() <= kDenseAuditLimit) {
      record.lambda_final =
          compute_lambda_max(table_kernel, data.x, final_selection.z);
      record.lambda_final_exact = true;
    } else {
      Rng rng(config.design_seed,
              streams::make(streams::kDesign, batch_stream(batch_index, 0)));
      record.lambda_final = estimate_lambda_max(table_kernel, data.x,
                                                final_selection.z, rng, 200, 1e-9);
      record.lambda_final_exact = false;
    }
    lambda_hat = std::max(lambda_hat, record.lambda_final);
    events = events && record.lambda_final <= tau2;
    record.lambda_hat = lambda_hat;
    record.events_held = events;

    ConfidenceParams params;
    params.norm_bound = config.norm_bound;
    params.sub_gaussian_radius = config.noise.sub_gaussian_radius();
    params.tau = config.tau;
    params.lambda_max = record.lambda_final;

    IntervalSet intervals;
    intervals.lower.resize(active.size());
    intervals.upper.resize(active.size());
    double mean_slack = 0.0;
    double deviation_slack = 0.0;
    double width_multiplier;
    if (config.continuous_intervals) {
      const UniformConfidence uc = uniform_confidence(
          params, config.kernel.k_max(), cover, config.kernel.dimension(),
          static_cast<Eigen::Index>(length), config.delta / (4.0 * cap));
      width_multiplier = uc.beta_tilde;
      mean_slack = uc.mean_slack;
      deviation_slack = uc.deviation_slack;
    } else {
      width_multiplier =
          beta(params, config.delta / (4.0 * cap * static_cast<double>(arms)));
    }
    record.beta = width_multiplier;

    for (std::size_t a = 0; a < active.size(); ++a) {
      const Point p = index_point(active[a]);
      const double mean = posterior->mean(p);
      const double dev = std::sqrt(posterior->variance(p));
      const double slack = mean_slack + width_multiplier * (dev + deviation_slack);
      intervals.lower[a] = mean - slack;
      intervals.upper[a] = mean + slack;
    }
    const double best_lower = intervals.lower.maxCoeff();

    std::vector<Eigen::Index> next;
    double max_width = 0.0;
    for (std::size_t a = 0; a < active.size(); ++a) {
      if (intervals.upper[a] >= best_lower) {
        next.push_back(active[a]);
        max_width = std::max(max_width, intervals.upper[a] - intervals.lower[a]);
      }
    }
    if (next.empty()) {
      // Valid intervals cannot empty the active set; fall back to the best
      // upper bound so a numerically degenerate batch stays well-defined.
      Eigen::Index best_upper = 0;
      intervals.upper.maxCoeff(&best_upper);
      next.push_back(active[best_upper]);
    }
    record.max_width = max_width;
    record.active_after = next;
    record.best_survived =
        std::find(next.begin(), next.end(), best_arm) != next.end();
    survived_all = survived_all && record.best_survived;

    last_intervals = intervals;
    last_active = active;
    active = std::move(next);
    run.batches.push_back(std::move(record));
  }

  // Recommend the surviving arm with the strongest lower bound.
  Eigen::Index best_final = active.front();
  double best_final_lower = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < last_active.size(); ++a) {
    if (std::find(active.begin(), active.end(), last_active[a]) == active.end()) {
      continue;
    }
    if (last_intervals.lower[a] > best_final_lower) {
      best_final_lower = last_intervals.lower[a];
      best_final = last_active[a];
    }
  }
  run.recommended = best_final;
  run.best_survived = survived_all;
  run.realized_information_gain =
      information_gain_by_counts(arm_gram, pull_counts, config.tau);
  return run;
}

BanditRun run_sbpe(const BanditConfig& config, const RkhsFunction& objective) {
  return run_sbpe(config, objective.at(config.arms));
}

}  // namespace skr
