/*
 * This file is part of skr, a library for sparse kernel-based regression
 * and black-box optimization.
 *
 * Licensed under the Apache License Version 2.0. See LICENSE file in the
 * project root for license information.
 */
#include <cmath>
#include <stdexcept>
#include <vector>

#include <doctest.h>

#include "skr/confidence.hpp"
#include "skr/inducing.hpp"
#include "skr/oracle.hpp"
#include "support.hpp"

using namespace skr;

TEST_SUITE("confidence") {

TEST_CASE("width multiplier evaluates its closed form") {
  // lambda = 0, C = 1, R = 1, tau = 1, delta = exp(-9/2): 2 + sqrt(9) = 5.
  ConfidenceParams params;
  CHECK(beta(params, std::exp(-4.5)) == doctest::Approx(5.0).epsilon(1e-12));

  // Noiseless-limit shape: R = 0 leaves only the norm term.
  params.sub_gaussian_radius = 0.0;
  params.norm_bound = 0.5;
  CHECK(beta(params, 0.5) == doctest::Approx(1.0).epsilon(1e-12));

  ConfidenceParams generic;
  generic.norm_bound = 2.0;
  generic.sub_gaussian_radius = 0.3;
  generic.tau = 0.25;
  generic.lambda_max = 0.04;
  const double expected = (2.0 + 0.2 / 0.25) * 2.0 +
                          (0.3 / 0.25) * std::sqrt(2.0 * std::log(1.0 / 0.05));
  CHECK(beta(generic, 0.05) == doctest::Approx(expected).epsilon(1e-12));

  double previous = std::numeric_limits<double>::infinity();
  for (double delta = 0.01; delta < 0.5; delta += 0.05) {
    const double current = beta(generic, delta);
    CHECK(current < previous);
    previous = current;
  }

  CHECK_THROWS_AS(beta(generic, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(beta(generic, 1.0), std::invalid_argument);
  ConfidenceParams bad = generic;
  bad.tau = 0.0;
  CHECK_THROWS_AS(beta(bad, 0.05), std::invalid_argument);
  bad = generic;
  bad.lambda_max = -1.0;
  CHECK_THROWS_AS(beta(bad, 0.05), std::invalid_argument);
}

TEST_CASE("light-tailed width covers both regimes of the max") {
  ConfidenceParams params;  // C = 1, R ignored, tau = 1, lambda = 0

  // Huge h0 makes the mgf curvature term dominate with xi0 = 1, which is the
  // sub-Gaussian width with R = 1.
  LightTailBound wide{1e6, 1.0};
  for (double delta = 0.02; delta < 0.5; delta += 0.07) {
    CHECK(beta_light_tailed(params, wide, delta) ==
          doctest::Approx(beta(params, delta)).epsilon(1e-12));
  }

  // Tiny xi0 with h0 = 1 and delta = 1/e pushes the max to 2 log(1/delta)/h0^2
  // = 2, so the noise term is sqrt(2 * 2 * 1) = 2 on top of the norm term 2.
  LightTailBound narrow{1.0, 1e-12};
  CHECK(beta_light_tailed(params, narrow, std::exp(-1.0)) ==
        doctest::Approx(4.0).epsilon(1e-12));

  // Direct formula across a delta grid.
  ConfidenceParams generic;
  generic.norm_bound = 1.5;
  generic.tau = 0.2;
  generic.lambda_max = 0.01;
  const LightTailBound tail{3.0, 0.8};
  for (double delta = 0.01; delta < 0.9; delta += 0.083) {
    const double log_term = std::log(1.0 / delta);
    const double envelope =
        std::max(tail.xi0, 2.0 * log_term / (tail.h0 * tail.h0));
    const double expected = (2.0 + std::sqrt(0.01) / 0.2) * 1.5 +
                            std::sqrt(2.0 * envelope * log_term) / 0.2;
    CHECK(beta_light_tailed(generic, tail, delta) ==
          doctest::Approx(expected).epsilon(1e-12));
  }

  CHECK_THROWS_AS(beta_light_tailed(params, LightTailBound{0.0, 1.0}, 0.1),
                  std::invalid_argument);
  CHECK_THROWS_AS(beta_light_tailed(params, LightTailBound{1.0, 0.0}, 0.1),
                  std::invalid_argument);
}

TEST_CASE("mean norm bound substitutes its pieces") {
  ConfidenceParams params;
  params.norm_bound = 2.0;
  params.sub_gaussian_radius = 0.4;
  params.tau = 0.3;
  const Eigen::Index n = 50;
  const double k_max = 1.5;
  const double delta = 0.05;
  const double expected =
      2.0 * (1.0 + std::sqrt(50.0) * 1.5 / 0.3) +
      (std::sqrt(50.0) * 0.4 / 0.3) * std::sqrt(2.0 * std::log(2.0 * 50.0 / delta));
  CHECK(mean_norm_bound(params, k_max, n, delta) ==
        doctest::Approx(expected).epsilon(1e-12));
  CHECK_THROWS_AS(mean_norm_bound(params, k_max, 0, delta),
                  std::invalid_argument);
}

TEST_CASE("uniform interval pieces are consistent") {
  ConfidenceParams params;
  params.norm_bound = 2.0;
  params.sub_gaussian_radius = 0.3;
  params.tau = 0.2;
  params.lambda_max = 0.005;
  const double k_max = 1.0;
  const double cover = 0.7;
  const int d = 2;
  const Eigen::Index n = 100;
  const double delta = 0.1;

  const auto uniform = uniform_confidence(params, k_max, cover, d, n, delta);
  const double expected_norm = mean_norm_bound(params, k_max, n, delta / 2.0);
  CHECK(uniform.mean_norm_bound == doctest::Approx(expected_norm).epsilon(1e-12));
  const double expected_count = std::max(
      1.0, cover * std::pow(expected_norm, d) * std::pow(static_cast<double>(n), d));
  CHECK(uniform.cover_count == doctest::Approx(expected_count).epsilon(1e-12));
  CHECK(uniform.beta_tilde ==
        doctest::Approx(beta(params, delta / (2.0 * uniform.cover_count)))
            .epsilon(1e-12));
  CHECK(uniform.mean_slack == doctest::Approx(2.0 / 100.0).epsilon(1e-15));
  CHECK(uniform.deviation_slack == doctest::Approx(0.2).epsilon(1e-15));

  // Doubling the grid multiplies the covering number by at least 2^d.
  const auto doubled = uniform_confidence(params, k_max, cover, d, 2 * n, delta);
  CHECK(doubled.cover_count >= uniform.cover_count * std::pow(2.0, d));
  CHECK(doubled.beta_tilde > uniform.beta_tilde);
}

TEST_CASE("cover constant follows the curvature at zero") {
  const auto se = Kernel::squared_exponential(1, 0.5, 2.0);
  CHECK(cover_constant(se) ==
        doctest::Approx(0.5 * std::sqrt(se.curvature())).epsilon(1e-12));
  const auto m52 = Kernel::matern(2, 2.5, 0.3);
  CHECK(cover_constant(m52) ==
        doctest::Approx(0.5 * std::sqrt(m52.curvature())).epsilon(1e-12));
  CHECK_THROWS_AS(cover_constant(Kernel::matern(1, 0.5, 0.3)), std::logic_error);
}

TEST_CASE("covering grid tracks bounded-norm functions") {
  const auto kernel = Kernel::squared_exponential(1, 0.25);
  const std::vector<std::pair<double, double>> bounds{{0.0, 1.0}};
  const double norm_bound = 2.0;
  const Eigen::Index n = 40;
  const Points grid = covering_grid(kernel, bounds, norm_bound, n);
  REQUIRE(grid.rows() >= 2);

  const double spacing = grid(1, 0) - grid(0, 0);
  const double expected = 2.0 / (static_cast<double>(n) * norm_bound *
                                 std::sqrt(kernel.curvature()) * 1.0);
  CHECK(spacing <= expected + 1e-12);

  // Sampled functions at the advertised norm never drift more than 1/n
  // between a point and its nearest grid neighbor.
  Rng rng(71, 0);
  for (int trial = 0; trial < 5; ++trial) {
    const auto f = sample_rkhs_function(kernel, bounds, 6, norm_bound, rng);
    for (int i = 0; i < 200; ++i) {
      const double x = rng.uniform();
      double best = std::numeric_limits<double>::infinity();
      Eigen::Index nearest = 0;
      for (Eigen::Index g = 0; g < grid.rows(); ++g) {
        const double dist = std::abs(grid(g, 0) - x);
        if (dist < best) {
          best = dist;
          nearest = g;
        }
      }
      Point px(1);
      px << x;
      CHECK(std::abs(f(px) - f(grid.row(nearest))) <=
            1.0 / static_cast<double>(n) + 1e-12);
    }
  }
}

TEST_CASE("error split adds up and respects its handles") {
  Rng rng(72, 0);
  const auto kernel = Kernel::squared_exponential(2, 0.4);
  const std::vector<std::pair<double, double>> bounds{{0.0, 1.0}, {0.0, 1.0}};
  const auto objective = sample_rkhs_function(kernel, bounds, 5, 2.0, rng);

  const Points x = testing::random_points(rng, 40, 2);
  Eigen::VectorXd y(40);
  for (Eigen::Index i = 0; i < 40; ++i) {
    y[i] = objective(x.row(i)) + 0.05 * rng.normal();
  }
  const Points z = testing::conditioned_inducing(kernel, x, 12, rng);
  const SparsePosterior posterior(kernel, Dataset(x, y, 0.3), z);
  const double lambda = compute_lambda_max(kernel, x, z);

  for (int q = 0; q < 25; ++q) {
    const Point query = testing::random_points(rng, 1, 2).row(0);
    const auto split = split_prediction_error(objective, posterior, lambda, query);
    CHECK(std::abs(split.total() - (objective(query) - posterior.mean(query))) <
          1e-10);
    CHECK(std::abs(split.residual) <= split.residual_bound + 1e-10);
    CHECK(std::abs(split.surrogate_bias) <= split.surrogate_bias_bound + 1e-10);
    CHECK(std::abs(split.leakage) <= split.leakage_bound + 1e-10);
    CHECK(split.weight_norm_scaled <=
          std::sqrt(posterior.variance(query)) + 1e-10);
  }
}

TEST_CASE("interval always contains the objective when noise vanishes") {
  // With noise orders of magnitude below tau the error is essentially the
  // deterministic part, which the structural slice of the width covers
  // outright; coverage must then be total, not merely 1 - delta.
  CoverageConfig config;
  config.kernel = Kernel::squared_exponential(1, 0.3);
  config.design_size = 24;
  config.objective_centers = 4;
  config.objective_norm = 1.5;
  config.tau = 0.1;
  config.delta = 0.1;
  config.noise = NoiseModel::gaussian(1e-9);
  config.trials = 50;
  config.seed = 5;
  const auto result = run_coverage(config);
  CHECK(result.trials == 50);
  CHECK(result.lower_rate == 1.0);
  CHECK(result.upper_rate == 1.0);
  CHECK(result.two_sided_rate == 1.0);
  CHECK(result.mean_width > 0.0);
  CHECK(result.inducing_rank > 0);
}

TEST_CASE("coverage run matches its advertised rates") {
  CoverageConfig config;
  config.kernel = Kernel::squared_exponential(1, 0.25);
  config.design_size = 60;
  config.objective_centers = 6;
  config.objective_norm = 2.0;
  config.tau = 0.15;
  config.delta = 0.1;
  config.noise = NoiseModel::gaussian(0.15);
  config.trials = 200;
  config.seed = 9;
  config.uniform = true;
  config.uniform_grid_points = 64;
  const auto result = run_coverage(config);
  CHECK(result.lower_rate >= 0.9);
  CHECK(result.upper_rate >= 0.9);
  CHECK(result.two_sided_rate >= 0.9);
  CHECK(result.uniform_rate >= 0.9);
  CHECK(result.uniform_rate <= 1.0);
  CHECK(result.beta_used > 0.0);
  CHECK(result.beta_tilde_used > result.beta_used);

  // Identical seeds replay identically.
  const auto again = run_coverage(config);
  CHECK(again.two_sided_rate == result.two_sided_rate);
  CHECK(again.uniform_rate == result.uniform_rate);
  CHECK(again.beta_tilde_used == result.beta_tilde_used);
}

TEST_CASE("coverage refuses unsupported setups") {
  CoverageConfig config;
  config.trials = 10;

  CoverageConfig adversarial = config;
  adversarial.noise_dependent_design = true;
  CHECK_THROWS_AS(run_coverage(adversarial), std::invalid_argument);

  CoverageConfig heavy = config;
  heavy.noise = NoiseModel::laplace(0.1);
  CHECK_THROWS_AS(run_coverage(heavy), std::invalid_argument);

  CoverageConfig no_h0 = config;
  no_h0.noise = NoiseModel::laplace(0.1);
  no_h0.light_tailed = true;
  no_h0.tail_h0 = 0.0;
  CHECK_THROWS_AS(run_coverage(no_h0), std::invalid_argument);

  CoverageConfig empty = config;
  empty.trials = 0;
  CHECK_THROWS_AS(run_coverage(empty), std::invalid_argument);
}

TEST_CASE("light-tailed coverage holds for laplace noise") {
  CoverageConfig config;
  config.kernel = Kernel::squared_exponential(1, 0.25);
  config.design_size = 40;
  config.objective_centers = 5;
  config.objective_norm = 1.5;
  config.tau = 0.15;
  config.delta = 0.1;
  config.noise = NoiseModel::laplace(0.1);
  config.light_tailed = true;
  config.tail_h0 = 5.0;
  config.trials = 150;
  config.seed = 11;
  const auto result = run_coverage(config);
  CHECK(result.lower_rate >= 0.9);
  CHECK(result.upper_rate >= 0.9);

  const auto tail = config.noise.light_tail(config.tail_h0);
  ConfidenceParams params;
  params.norm_bound = config.objective_norm;
  params.sub_gaussian_radius = 0.0;
  params.tau = config.tau;
  params.lambda_max = result.lambda_max;
  CHECK(result.beta_used ==
        doctest::Approx(beta_light_tailed(params, tail, config.delta))
            .epsilon(1e-12));
}

}  // TEST_SUITE
