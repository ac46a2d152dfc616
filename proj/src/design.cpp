/*
 * This file is part of skr, a library for sparse kernel-based regression
 * and black-box optimization.
 *
 * Licensed under the Apache License Version 2.0. See LICENSE file in the
 * project root for license information.
 */
#include "skr/design.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace skr {

namespace {

constexpr double kPi = 3.14159265358979323846;

double step_delta(double delta, Eigen::Index j) {
  return 3.0 * delta / (kPi * kPi * static_cast<double>(j) * static_cast<double>(j));
}

Eigen::Index argmax_deviation(const SparsePosterior& posterior, const Points& domain) {
  Eigen::Index best = 0;
  double best_value = -1.0;
  for (Eigen::Index g = 0; g < domain.rows(); ++g) {
    const double value = posterior.variance(domain.row(g));
    if (value > best_value) {
      best_value = value;
      best = g;
    }
  }
  return best;
}

/// Per-step spectral gap bookkeeping: the cheap trace certificate when it
/// already proves the gap is below tau^2, power iteration otherwise.
std::pair<double, bool> step_lambda(const SparsePosterior& posterior,
                                    const Points& inducing, double tau,
                                    std::uint64_t seed, std::uint64_t step) {
  const double trace = lambda_trace_bound(posterior);
  if (trace <= tau * tau) return {trace, true};
  Rng rng(seed, streams::make(streams::kDesign, step));
  const double estimate = estimate_lambda_max(
      posterior.kernel(), posterior.data().x, inducing, rng, 100, 1e-9);
  return {estimate, false};
}

}  // namespace

DesignRun run_design(const DesignConfig& config, const RkhsFunction& objective,
                     const NoiseModel& noise) {
  if (config.domain.rows() == 0) {
    throw std::invalid_argument("design: empty candidate set");
  }
  if (config.steps < 1) throw std::invalid_argument("design: need at least one step");
  if (config.refresh_every < 1) {
    throw std::invalid_argument("design: refresh cadence must be at least 1");
  }
  if (config.audit_exact && config.steps > 1000) {
    throw std::invalid_argument("design: exact audit supported up to 1000 steps");
  }
  if (config.domain.cols() != config.kernel.dimension()) {
    throw std::invalid_argument("design: domain dimension does not match kernel");
  }

  DesignRun run;
  run.steps.reserve(config.steps);
  Dataset data(config.kernel.dimension(), config.tau);
  std::optional<SparsePosterior> posterior;
  std::optional<ExactPosterior> exact;
  if (config.audit_exact) exact.emplace(config.kernel, data);
  Points inducing(0, config.kernel.dimension());

  double lambda_hat = 0.0;
  bool events_held = true;
  const double tau2 = config.tau * config.tau;

  for (Eigen::Index j = 1; j <= config.steps; ++j) {
    DesignStep step;
    const bool refresh = ((j - 1) % config.refresh_every) == 0;
    if (refresh || !posterior) {
      step.delta_j = step_delta(config.delta, j);
      run.delta_spent += step.delta_j;
      const InducingSelection selection = select_recursive_leverage(
          config.kernel, data.x, config.tau, step.delta_j, config.design_seed,
          config.oversample, LambdaAudit::kNone,
          static_cast<std::uint64_t>(j));
      inducing = selection.z;
      posterior.emplace(config.kernel, data, inducing);
    }
    step.rank = posterior->rank();
    step.gram_jitter = posterior->gram_jitter();

    const Eigen::Index pick = argmax_deviation(*posterior, config.domain);
    const Point x = config.domain.row(pick);
    step.chosen = pick;
    step.selected_deviation = std::sqrt(posterior->variance(x));

    const auto [lambda, certified] = step_lambda(
        *posterior, inducing, config.tau, config.design_seed,
        static_cast<std::uint64_t>(j));
    step.lambda = lambda;
    step.lambda_certified = certified;
    lambda_hat = std::max(lambda_hat, lambda);
    events_held = events_held && lambda <= tau2;

    step.exact_deviation = std::numeric_limits<double>::quiet_NaN();
    if (exact) step.exact_deviation = std::sqrt(exact->variance(x));

    Rng noise_rng(config.noise_seed,
                  streams::make(streams::kNoise, static_cast<std::uint64_t>(j)));
    const double y = objective(x) + noise.sample(noise_rng);
    data.append(x, y);
    posterior->append(x, y);
    if (exact) exact->append(x, y);
    run.steps.push_back(step);
  }

  // Reported posterior: one more leverage refresh over the complete design.
  const double final_delta = step_delta(config.delta, config.steps + 1);
  run.delta_spent += final_delta;
  const InducingSelection final_selection = select_recursive_leverage(
      config.kernel, data.x, config.tau, final_delta, config.design_seed,
      config.oversample, LambdaAudit::kNone,
      static_cast<std::uint64_t>(config.steps + 1));
  posterior.emplace(config.kernel, data, final_selection.z);
  run.final_inducing = final_selection.source_indices;
  run.final_gram_jitter = posterior->gram_jitter();

  constexpr Eigen::Index kDenseAuditLimit = 2000;
  if (data.n() <= kDenseAuditLimit) {
    run.final_lambda = compute_lambda_max(config.kernel, data.x, final_selection.z);
    run.final_lambda_exact = true;
  } else {
    Rng rng(config.design_seed, streams::make(streams::kDesign, 0));
    run.final_lambda =
        estimate_lambda_max(config.kernel, data.x, final_selection.z, rng, 100, 1e-9);
    run.final_lambda_exact = false;
  }
  lambda_hat = std::max(lambda_hat, run.final_lambda);
  events_held = events_held && run.final_lambda <= tau2;

  run.design = data.x;
  run.observations = data.y;
  run.chosen.reserve(run.steps.size());
  for (const auto& s : run.steps) run.chosen.push_back(s.chosen);
  run.lambda_hat = lambda_hat;
  run.lambda_events_held = events_held;
  run.realized_information_gain =
      information_gain(config.kernel, data.x, config.tau);
  double max_var = 0.0;
  for (Eigen::Index g = 0; g < config.domain.rows(); ++g) {
    max_var = std::max(max_var, posterior->variance(config.domain.row(g)));
  }
  run.max_deviation = std::sqrt(max_var);
  return run;
}

SparsePosterior final_posterior(const DesignConfig& config, const DesignRun& run) {
  Points z(static_cast<Eigen::Index>(run.final_inducing.size()),
           run.design.cols());
  for (std::size_t i = 0; i < run.final_inducing.size(); ++i) {
    z.row(static_cast<Eigen::Index>(i)) = run.design.row(run.final_inducing[i]);
  }
  return SparsePosterior(config.kernel,
                         Dataset(run.design, run.observations, config.tau),
                         std::move(z));
}

UniformErrorReport uniform_error(const DesignConfig& config, const DesignRun& run,
                                 const RkhsFunction& objective, double norm_bound,
                                 double sub_gaussian_radius, double delta) {
  if (!(delta > 0 && delta < 1)) {
    throw std::invalid_argument("uniform error: delta must lie in (0, 1)");
  }
  const SparsePosterior posterior = final_posterior(config, run);
  double sup = 0.0;
  for (Eigen::Index g = 0; g < config.domain.rows(); ++g) {
    const Point x = config.domain.row(g);
    sup = std::max(sup, std::abs(objective(x) - posterior.mean(x)));
  }
  UniformErrorReport report;
  report.sup_error = sup;
  report.information_gain = run.realized_information_gain;
  const double n = static_cast<double>(run.design.rows());
  const double width = (3.0 * norm_bound +
                        (sub_gaussian_radius / config.tau) *
                            std::sqrt(2.0 * std::log(4.0 * static_cast<double>(
                                                               config.domain.rows()) /
                                                     delta))) *
                       std::sqrt(8.0 * run.realized_information_gain /
                                 (std::log1p(1.0 / (config.tau * config.tau)) * n));
  report.bound = width;
  report.bound_violated = sup > width;
  report.events_held = run.lambda_events_held;
  return report;
}

}  // namespace skr
