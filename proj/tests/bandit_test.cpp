/*
 * This file is part of skr, a library for sparse kernel-based regression
 * and black-box optimization.
 *
 * Licensed under the Apache License Version 2.0. See LICENSE file in the
 * project root for license information.
 */
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <doctest.h>

#include "skr/bandit.hpp"
#include "skr/inducing.hpp"
#include "skr/oracle.hpp"
#include "skr/posterior.hpp"
#include "support.hpp"

using namespace skr;

namespace {

Points index_arms(Eigen::Index count) {
  Points arms(count, 1);
  for (Eigen::Index a = 0; a < count; ++a) arms(a, 0) = static_cast<double>(a);
  return arms;
}

bool subset_of(const std::vector<Eigen::Index>& inner,
               const std::vector<Eigen::Index>& outer) {
  return std::all_of(inner.begin(), inner.end(), [&](Eigen::Index a) {
    return std::find(outer.begin(), outer.end(), a) != outer.end();
  });
}

}  // namespace

TEST_SUITE("bandit") {

TEST_CASE("batch schedule squares its way to the budget") {
  const auto tiny = sbpe_schedule(1);
  CHECK(tiny.lengths == std::vector<long>{1});
  CHECK(tiny.cap == 1);

  const auto pair = sbpe_schedule(2);
  CHECK(pair.lengths == std::vector<long>{2});
  CHECK(pair.cap == 1);

  const auto sixteen = sbpe_schedule(16);
  CHECK(sixteen.lengths == std::vector<long>{4, 8, 4});
  CHECK(sixteen.cap == 3);

  const auto big = sbpe_schedule(4096);
  CHECK(big.lengths == std::vector<long>{64, 512, 1449, 2071});
  CHECK(big.cap == 5);

  for (long budget : {1L, 2L, 3L, 7L, 16L, 100L, 1000L, 4096L}) {
    const auto schedule = sbpe_schedule(budget);
    CHECK(std::accumulate(schedule.lengths.begin(), schedule.lengths.end(), 0L) ==
          budget);
    CHECK(static_cast<long>(schedule.lengths.size()) <= schedule.cap);
    for (std::size_t i = 1; i + 1 < schedule.lengths.size(); ++i) {
      CHECK(schedule.lengths[i] > schedule.lengths[i - 1]);
    }
  }
  CHECK_THROWS_AS(sbpe_schedule(0), std::invalid_argument);
}

TEST_CASE("count-collapsed information gain matches the expanded design") {
  Rng rng(41, 0);
  const auto kernel = Kernel::squared_exponential(1, 0.3);
  const Points arms = testing::random_points(rng, 6, 1);
  const Eigen::MatrixXd gram = kernel_matrix(kernel, arms);
  const std::vector<long> counts{3, 0, 2, 1, 0, 4};

  Points expanded(10, 1);
  Eigen::Index row = 0;
  for (std::size_t a = 0; a < counts.size(); ++a) {
    for (long c = 0; c < counts[a]; ++c) {
      expanded.row(row++) = arms.row(static_cast<Eigen::Index>(a));
    }
  }
  CHECK(information_gain_by_counts(gram, counts, 0.4) ==
        doctest::Approx(oracle::information_gain(kernel, expanded, 0.4))
            .epsilon(1e-9));
  CHECK(information_gain_by_counts(gram, std::vector<long>(6, 0), 0.4) == 0.0);
  CHECK_THROWS_AS(information_gain_by_counts(gram, std::vector<long>(5, 1), 0.4),
                  std::invalid_argument);
}

TEST_CASE("well-separated values collapse to the best arm after one batch") {
  // Identity kernel: arms are uncorrelated, so the variance sweep pulls each
  // once per round and the batch-1 widths are far below the value gaps.
  BanditConfig config;
  config.kernel = Kernel::tabulated(Eigen::MatrixXd::Identity(5, 5));
  config.arms = index_arms(5);
  config.tau = 0.1;
  config.delta = 0.1;
  config.budget = 25;
  config.norm_bound = 2.1;
  config.noise = NoiseModel::gaussian(1e-9);
  Eigen::VectorXd values(5);
  values << 2.0, 0.2, 0.1, 0.05, 0.0;

  const auto run = run_sbpe(config, values);
  REQUIRE(run.batches.size() == 3);  // schedule {5, 12, 8}
  CHECK(run.batch_cap == 4);

  // Round-robin first batch, best arm only afterwards.
  const std::vector<Eigen::Index> first(run.pulled.begin(), run.pulled.begin() + 5);
  CHECK(first == std::vector<Eigen::Index>{0, 1, 2, 3, 4});
  for (std::size_t j = 5; j < run.pulled.size(); ++j) CHECK(run.pulled[j] == 0);

  CHECK(run.batches[0].active_after == std::vector<Eigen::Index>{0});
  CHECK(run.batches[0].best_survived);
  CHECK(run.best_survived);
  CHECK(run.recommended == 0);

  // Zero-noise regret ledger: the gaps of the five round-robin pulls.
  double expected = 0.0;
  for (Eigen::Index a = 0; a < 5; ++a) expected += 2.0 - values[a];
  CHECK(run.cumulative_regret == doctest::Approx(expected).epsilon(1e-12));
  for (std::size_t j = 5; j < run.step_regret.size(); ++j) {
    CHECK(run.step_regret[j] == 0.0);
  }
}

TEST_CASE("elimination decisions replay from first principles") {
  BanditConfig config;
  config.kernel = Kernel::tabulated(Eigen::MatrixXd::Identity(5, 5));
  config.arms = index_arms(5);
  config.tau = 0.1;
  config.delta = 0.1;
  config.budget = 25;
  config.norm_bound = 2.1;
  config.noise = NoiseModel::gaussian(0.05);
  config.design_seed = 2;
  config.noise_seed = 77;
  Eigen::VectorXd values(5);
  values << 1.0, 0.8, 0.5, 0.3, 0.0;

  const auto run = run_sbpe(config, values);
  const auto& batch = run.batches[0];
  const long length = batch.pulls;

  // Rebuild the batch-1 dataset: pulled arms are recorded and the noise
  // stream is addressed by the global step only.
  Dataset data(1, config.tau);
  for (long j = 1; j <= length; ++j) {
    const Eigen::Index arm = run.pulled[static_cast<std::size_t>(j - 1)];
    Rng noise_rng(config.noise_seed,
                  streams::make(streams::kNoise, static_cast<std::uint64_t>(j)));
    Point p(1);
    p << static_cast<double>(arm);
    data.append(p, values[arm] + config.noise.sample(noise_rng));
  }

  // Replicate the elimination-time refresh and audit.
  const auto schedule = sbpe_schedule(config.budget);
  const double cap = static_cast<double>(schedule.cap);
  const double pi2 = 3.14159265358979323846 * 3.14159265358979323846;
  const double final_delta =
      3.0 * config.delta / (pi2 * cap * (length + 1.0) * (length + 1.0));
  const Kernel table = Kernel::tabulated(kernel_matrix(config.kernel, config.arms));
  const auto selection = select_recursive_leverage(
      table, data.x, config.tau, final_delta, config.design_seed,
      config.oversample, LambdaAudit::kNone,
      (std::uint64_t{1} << 24) | static_cast<std::uint64_t>(length + 1));
  const SparsePosterior posterior(table, data, selection.z);
  CHECK(batch.lambda_final ==
        doctest::Approx(compute_lambda_max(table, data.x, selection.z))
            .epsilon(1e-10));
  CHECK(batch.lambda_final_exact);

  ConfidenceParams params;
  params.norm_bound = config.norm_bound;
  params.sub_gaussian_radius = config.noise.sub_gaussian_radius();
  params.tau = config.tau;
  params.lambda_max = batch.lambda_final;
  const double width = beta(params, config.delta / (4.0 * cap * 5.0));
  CHECK(batch.beta == doctest::Approx(width).epsilon(1e-12));

  Eigen::VectorXd lower(5), upper(5);
  for (Eigen::Index a = 0; a < 5; ++a) {
    Point p(1);
    p << static_cast<double>(a);
    const double mean = posterior.mean(p);
    const double dev = std::sqrt(posterior.variance(p));
    lower[a] = mean - width * dev;
    upper[a] = mean + width * dev;
  }
  const double best_lower = lower.maxCoeff();
  std::vector<Eigen::Index> expected_survivors;
  for (Eigen::Index a = 0; a < 5; ++a) {
    if (upper[a] >= best_lower) expected_survivors.push_back(a);
  }
  CHECK(batch.active_after == expected_survivors);
}

TEST_CASE("indistinguishable arms are never eliminated") {
  BanditConfig config;
  config.kernel = Kernel::tabulated(Eigen::MatrixXd::Identity(4, 4));
  config.arms = index_arms(4);
  config.tau = 0.2;
  config.budget = 16;
  config.noise = NoiseModel::gaussian(0.05);
  const auto run = run_sbpe(config, Eigen::VectorXd::Constant(4, 0.7));

  for (const auto& batch : run.batches) {
    CHECK(batch.active_after.size() == 4);
    CHECK(batch.best_survived);
  }
  CHECK(run.cumulative_regret == 0.0);
  CHECK(run.best_survived);
}

TEST_CASE("runs are deterministic and noise only enters through outcomes") {
  Rng rng(43, 0);
  const auto kernel = Kernel::squared_exponential(1, 0.6);
  BanditConfig config;
  config.kernel = kernel;
  config.arms = testing::random_points(rng, 12, 1, 0.0, 4.0);
  config.tau = 0.3;
  config.budget = 30;
  config.norm_bound = 2.0;
  config.noise = NoiseModel::gaussian(0.2);
  config.design_seed = 5;
  config.noise_seed = 9;
  const std::vector<std::pair<double, double>> bounds{{0.0, 4.0}};
  const auto objective = sample_rkhs_function(kernel, bounds, 5, 2.0, rng);

  const auto run = run_sbpe(config, objective);
  const auto replay = run_sbpe(config, objective);
  CHECK(replay.pulled == run.pulled);
  CHECK(replay.cumulative_regret == run.cumulative_regret);
  CHECK(replay.recommended == run.recommended);
  REQUIRE(replay.batches.size() == run.batches.size());
  for (std::size_t b = 0; b < run.batches.size(); ++b) {
    CHECK(replay.batches[b].beta == run.batches[b].beta);
    CHECK(replay.batches[b].active_after == run.batches[b].active_after);
  }

  // A different noise seed leaves the first batch's pull order alone; pulls
  // inside a batch react only to the geometry of the visited arms.
  config.noise_seed = 10;
  const auto other = run_sbpe(config, objective);
  const long first_batch = run.batches[0].pulls;
  for (long j = 0; j < first_batch; ++j) {
    CHECK(other.pulled[static_cast<std::size_t>(j)] ==
          run.pulled[static_cast<std::size_t>(j)]);
  }
}

TEST_CASE("ledger invariants hold on a generic run") {
  Rng rng(44, 0);
  const auto kernel = Kernel::squared_exponential(1, 0.5);
  BanditConfig config;
  config.kernel = kernel;
  config.arms = testing::random_points(rng, 10, 1, 0.0, 3.0);
  config.tau = 0.25;
  config.budget = 40;
  config.noise = NoiseModel::gaussian(0.15);
  const std::vector<std::pair<double, double>> bounds{{0.0, 3.0}};
  const auto objective = sample_rkhs_function(kernel, bounds, 4, 2.0, rng);

  const auto run = run_sbpe(config, objective);
  CHECK(run.pulled.size() == 40);
  CHECK(run.step_regret.size() == 40);
  CHECK(static_cast<long>(run.batches.size()) <= run.batch_cap);

  long total_pulls = 0;
  for (std::size_t b = 0; b < run.batches.size(); ++b) {
    const auto& batch = run.batches[b];
    total_pulls += batch.pulls;
    CHECK(subset_of(batch.active_after, batch.active_before));
    CHECK(!batch.active_after.empty());
    if (b > 0) {
      CHECK(batch.active_before == run.batches[b - 1].active_after);
    }
    CHECK(batch.beta > 0.0);
    CHECK(batch.lambda_final >= 0.0);
  }
  CHECK(total_pulls == 40);
  CHECK(subset_of({run.recommended}, run.batches.back().active_after));

  std::vector<long> counts(10, 0);
  double regret_sum = 0.0;
  for (const auto arm : run.pulled) ++counts[static_cast<std::size_t>(arm)];
  for (const auto r : run.step_regret) regret_sum += r;
  CHECK(run.cumulative_regret == doctest::Approx(regret_sum).epsilon(1e-12));
  CHECK(run.realized_information_gain ==
        doctest::Approx(information_gain_by_counts(
                            kernel_matrix(kernel, config.arms), counts, config.tau))
            .epsilon(1e-10));
}

TEST_CASE("domain-uniform intervals engage the covering machinery") {
  BanditConfig config;
  config.kernel = Kernel::squared_exponential(1, 0.4);
  config.arms = Points(8, 1);
  for (Eigen::Index a = 0; a < 8; ++a) config.arms(a, 0) = a / 7.0;
  config.tau = 0.3;
  config.budget = 20;
  config.norm_bound = 1.5;
  config.noise = NoiseModel::gaussian(0.1);
  config.continuous_intervals = true;

  Points centers(2, 1);
  centers << 0.3, 0.8;
  Eigen::VectorXd coefficients(2);
  coefficients << 1.0, -0.6;
  const RkhsFunction objective(config.kernel, centers, coefficients);
  const auto run = run_sbpe(config, objective);
  REQUIRE(run.batches.size() >= 1);

  const auto schedule = sbpe_schedule(config.budget);
  for (const auto& batch : run.batches) {
    ConfidenceParams params;
    params.norm_bound = config.norm_bound;
    params.sub_gaussian_radius = config.noise.sub_gaussian_radius();
    params.tau = config.tau;
    params.lambda_max = batch.lambda_final;
    const auto uniform = uniform_confidence(
        params, config.kernel.k_max(), cover_constant(config.kernel),
        config.kernel.dimension(), batch.pulls,
        config.delta / (4.0 * static_cast<double>(schedule.cap)));
    CHECK(batch.beta == doctest::Approx(uniform.beta_tilde).epsilon(1e-12));
  }
}

TEST_CASE("unsupported configurations are refused") {
  BanditConfig config;
  config.kernel = Kernel::squared_exponential(1, 0.3);
  config.arms = index_arms(4);
  Eigen::VectorXd values = Eigen::VectorXd::Zero(4);

  BanditConfig heavy = config;
  heavy.noise = NoiseModel::laplace(0.1);
  CHECK_THROWS_AS(run_sbpe(heavy, values), std::invalid_argument);

  BanditConfig broke = config;
  broke.budget = 0;
  CHECK_THROWS_AS(run_sbpe(broke, values), std::invalid_argument);

  BanditConfig armless = config;
  armless.arms = Points(0, 1);
  CHECK_THROWS_AS(run_sbpe(armless, Eigen::VectorXd(0)), std::invalid_argument);

  CHECK_THROWS_AS(run_sbpe(config, Eigen::VectorXd::Zero(3)),
                  std::invalid_argument);

  BanditConfig rough = config;
  rough.kernel = Kernel::matern(1, 0.5, 0.3);
  rough.continuous_intervals = true;
  CHECK_THROWS_AS(run_sbpe(rough, values), std::logic_error);
}

}  // TEST_SUITE
