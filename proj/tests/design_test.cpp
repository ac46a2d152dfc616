/*
 * This file is part of skr, a library for sparse kernel-based regression
 * and black-box optimization.
 *
 * Licensed under the Apache License Version 2.0. See LICENSE file in the
 * project root for license information.
 */
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>

#include <doctest.h>

#include "skr/design.hpp"
#include "skr/oracle.hpp"
#include "support.hpp"

using namespace skr;

namespace {

Points line_grid(Eigen::Index count) {
  Points grid(count, 1);
  for (Eigen::Index i = 0; i < count; ++i) {
    grid(i, 0) = static_cast<double>(i) / static_cast<double>(count - 1);
  }
  return grid;
}

RkhsFunction grid_objective(const Kernel& kernel, const Points& domain) {
  Points centers(3, 1);
  centers.row(0) = domain.row(1);
  centers.row(1) = domain.row(domain.rows() / 2);
  centers.row(2) = domain.row(domain.rows() - 2);
  Eigen::VectorXd coefficients(3);
  coefficients << 0.8, -0.5, 0.6;
  return {kernel, centers, coefficients};
}

}  // namespace

TEST_SUITE("design") {

TEST_CASE("failure budgets follow the summable schedule") {
  DesignConfig config;
  config.kernel = Kernel::squared_exponential(1, 0.25);
  config.domain = line_grid(20);
  config.tau = 0.4;
  config.delta = 0.2;
  config.steps = 12;
  const auto objective = grid_objective(config.kernel, config.domain);
  const auto run = run_design(config, objective, NoiseModel::gaussian(0.1));

  REQUIRE(run.steps.size() == 12);
  const double pi2 = std::numbers::pi * std::numbers::pi;
  double spent = 0.0;
  for (Eigen::Index j = 1; j <= 12; ++j) {
    const double expected = 3.0 * config.delta / (pi2 * j * j);
    CHECK(run.steps[j - 1].delta_j == doctest::Approx(expected).epsilon(1e-12));
    spent += expected;
  }
  spent += 3.0 * config.delta / (pi2 * 13.0 * 13.0);
  CHECK(run.delta_spent == doctest::Approx(spent).epsilon(1e-12));
  CHECK(run.delta_spent < config.delta / 2.0);
}

TEST_CASE("first pick breaks the stationary tie to the lowest row") {
  DesignConfig config;
  config.kernel = Kernel::squared_exponential(1, 0.3);
  config.domain = line_grid(15);
  config.steps = 3;
  const auto objective = grid_objective(config.kernel, config.domain);
  const auto run = run_design(config, objective, NoiseModel::gaussian(0.1));
  CHECK(run.chosen[0] == 0);
}

TEST_CASE("second pick maximizes the hand-computed variance") {
  // Hand-set three-point kernel: rows 0 and 1 strongly coupled, row 2
  // nearly independent.  After observing row 0 the variance at row 1 drops
  // to 1 - 0.81 + small while row 2 keeps essentially its prior, so the
  // second query must be row 2.
  Eigen::MatrixXd table(3, 3);
  table << 1.0, 0.9, 0.1,
           0.9, 1.0, 0.12,
           0.1, 0.12, 1.0;
  DesignConfig config;
  config.kernel = Kernel::tabulated(table);
  config.domain = Points(3, 1);
  config.domain << 0, 1, 2;
  config.tau = 0.5;
  config.steps = 2;
  Points centers(1, 1);
  centers << 1.0;
  Eigen::VectorXd coefficients(1);
  coefficients << 1.0;
  const RkhsFunction objective(config.kernel, centers, coefficients);
  const auto run = run_design(config, objective, NoiseModel::gaussian(0.05));

  CHECK(run.chosen[0] == 0);
  CHECK(run.chosen[1] == 2);
  const double tau2 = 0.25;
  const double expected_var = 1.0 - 0.01 + tau2 * 0.01 / (tau2 + 1.0);
  CHECK(run.steps[1].selected_deviation ==
        doctest::Approx(std::sqrt(expected_var)).epsilon(1e-10));
}

TEST_CASE("queries depend on the design seed but not the noise seed") {
  DesignConfig config;
  config.kernel = Kernel::squared_exponential(1, 0.2);
  config.domain = line_grid(30);
  config.tau = 0.3;
  config.steps = 15;
  config.design_seed = 3;
  config.noise_seed = 100;
  const auto objective = grid_objective(config.kernel, config.domain);
  const auto noise = NoiseModel::gaussian(0.2);

  const auto base = run_design(config, objective, noise);
  config.noise_seed = 200;
  const auto other_noise = run_design(config, objective, noise);
  CHECK(other_noise.chosen == base.chosen);
  CHECK((other_noise.observations - base.observations).cwiseAbs().minCoeff() >
        0.0);
  for (std::size_t j = 0; j < base.steps.size(); ++j) {
    CHECK(other_noise.steps[j].rank == base.steps[j].rank);
    CHECK(other_noise.steps[j].lambda == base.steps[j].lambda);
  }

  config.noise_seed = 100;
  const auto replay = run_design(config, objective, noise);
  CHECK(replay.chosen == base.chosen);
  CHECK(replay.observations == base.observations);
  CHECK(replay.lambda_hat == base.lambda_hat);
  CHECK(replay.max_deviation == base.max_deviation);
}

TEST_CASE("refresh cadence controls when budget is spent") {
  DesignConfig config;
  config.kernel = Kernel::squared_exponential(1, 0.25);
  config.domain = line_grid(20);
  config.tau = 0.4;
  config.steps = 7;
  config.refresh_every = 3;
  const auto objective = grid_objective(config.kernel, config.domain);
  const auto run = run_design(config, objective, NoiseModel::gaussian(0.1));

  for (Eigen::Index j = 1; j <= 7; ++j) {
    const bool refresh = (j - 1) % 3 == 0;
    CHECK((run.steps[j - 1].delta_j > 0.0) == refresh);
  }
  // Between refreshes the inducing set is frozen while data accumulates.
  CHECK(run.steps[1].rank == run.steps[0].rank);
  CHECK(run.steps[2].rank == run.steps[0].rank);
}

TEST_CASE("exact audit tracks the dense posterior") {
  DesignConfig config;
  config.kernel = Kernel::squared_exponential(1, 0.25);
  config.domain = line_grid(18);
  config.tau = 0.3;
  config.steps = 10;
  config.audit_exact = true;
  const auto objective = grid_objective(config.kernel, config.domain);
  const auto noise = NoiseModel::gaussian(0.1);
  const auto run = run_design(config, objective, noise);

  for (Eigen::Index j = 0; j < 10; ++j) {
    const auto& step = run.steps[j];
    REQUIRE(std::isfinite(step.exact_deviation));
    // Recompute from the visited prefix with the dense reference.
    Dataset prefix(1, config.tau);
    for (Eigen::Index i = 0; i < j; ++i) {
      prefix.append(run.design.row(i), run.observations[i]);
    }
    const auto moments = oracle::exact_posterior(
        config.kernel, prefix, config.domain.row(step.chosen));
    CHECK(step.exact_deviation ==
          doctest::Approx(std::sqrt(moments.variance)).epsilon(1e-9));
  }

  config.audit_exact = false;
  const auto bare = run_design(config, objective, noise);
  CHECK(std::isnan(bare.steps[0].exact_deviation));

  config.audit_exact = true;
  config.steps = 1001;
  CHECK_THROWS_AS(run_design(config, objective, noise), std::invalid_argument);
}

TEST_CASE("final audit is consistent with the per-step ledger") {
  DesignConfig config;
  config.kernel = Kernel::squared_exponential(1, 0.2);
  config.domain = line_grid(25);
  config.tau = 0.3;
  config.steps = 20;
  const auto objective = grid_objective(config.kernel, config.domain);
  const auto run = run_design(config, objective, NoiseModel::gaussian(0.15));

  CHECK(run.final_lambda_exact);
  CHECK(run.final_lambda <= run.lambda_hat);
  CHECK(run.lambda_events_held ==
        (run.lambda_hat <= config.tau * config.tau));

  const auto posterior = final_posterior(config, run);
  CHECK(posterior.n() == 20);
  double max_var = 0.0;
  for (Eigen::Index g = 0; g < config.domain.rows(); ++g) {
    max_var = std::max(max_var, posterior.variance(config.domain.row(g)));
  }
  CHECK(std::sqrt(max_var) == doctest::Approx(run.max_deviation).epsilon(1e-12));

  const double expected_gain =
      information_gain(config.kernel, run.design, config.tau);
  CHECK(run.realized_information_gain ==
        doctest::Approx(expected_gain).epsilon(1e-10));
}

TEST_CASE("sup error report evaluates the certificate formula") {
  DesignConfig config;
  config.kernel = Kernel::squared_exponential(1, 0.25);
  config.domain = line_grid(30);
  config.tau = 0.3;
  config.steps = 25;
  const auto objective = grid_objective(config.kernel, config.domain);
  const auto run = run_design(config, objective, NoiseModel::gaussian(0.1));

  const double norm_bound = objective.norm() * 1.1;
  const double radius = 0.1;
  const double delta = 0.05;
  const auto report = uniform_error(config, run, objective, norm_bound, radius, delta);

  const auto posterior = final_posterior(config, run);
  double sup = 0.0;
  for (Eigen::Index g = 0; g < config.domain.rows(); ++g) {
    sup = std::max(sup, std::abs(objective(config.domain.row(g)) -
                                 posterior.mean(config.domain.row(g))));
  }
  CHECK(report.sup_error == doctest::Approx(sup).epsilon(1e-12));

  const double expected =
      (3.0 * norm_bound +
       (radius / config.tau) * std::sqrt(2.0 * std::log(4.0 * 30.0 / delta))) *
      std::sqrt(8.0 * run.realized_information_gain /
                (std::log1p(1.0 / (config.tau * config.tau)) * 25.0));
  CHECK(report.bound == doctest::Approx(expected).epsilon(1e-12));
  CHECK(report.bound_violated == (report.sup_error > report.bound));
  CHECK(report.events_held == run.lambda_events_held);
  CHECK(report.information_gain == run.realized_information_gain);

  CHECK_THROWS_AS(uniform_error(config, run, objective, norm_bound, radius, 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(uniform_error(config, run, objective, norm_bound, radius, 1.0),
                  std::invalid_argument);
}

TEST_CASE("noise-free runs interpolate the objective") {
  DesignConfig config;
  config.kernel = Kernel::squared_exponential(1, 0.2);
  config.domain = line_grid(8);
  config.tau = 1e-4;
  config.steps = 24;
  const auto objective = grid_objective(config.kernel, config.domain);
  const auto run = run_design(config, objective, NoiseModel::gaussian(1e-12));

  std::set<Eigen::Index> visited(run.chosen.begin(), run.chosen.end());
  CHECK(visited.size() == 8);  // max-deviation sweep reaches every candidate

  const auto posterior = final_posterior(config, run);
  double sup = 0.0;
  for (Eigen::Index g = 0; g < 8; ++g) {
    sup = std::max(sup, std::abs(objective(config.domain.row(g)) -
                                 posterior.mean(config.domain.row(g))));
  }
  CHECK(sup <= 1e-6);
}

TEST_CASE("deviation shrinks at the certified rate") {
  // The reported max deviation obeys
  //   max_dev <= (1 + lambda_hat / tau^2) sqrt(8 I / (log(1 + 1/tau^2) n)).
  DesignConfig config;
  config.kernel = Kernel::squared_exponential(1, 0.25);
  config.domain = line_grid(40);
  config.tau = 0.3;
  config.steps = 50;
  const auto objective = grid_objective(config.kernel, config.domain);
  const auto run = run_design(config, objective, NoiseModel::gaussian(0.1));

  const double tau2 = config.tau * config.tau;
  const double rate =
      std::sqrt(8.0 * run.realized_information_gain /
                (std::log1p(1.0 / tau2) * static_cast<double>(config.steps)));
  CHECK(run.max_deviation <= (1.0 + run.lambda_hat / tau2) * rate);
}

TEST_CASE("invalid configurations are refused") {
  DesignConfig config;
  config.kernel = Kernel::squared_exponential(1, 0.2);
  config.domain = line_grid(10);
  const auto objective = grid_objective(config.kernel, config.domain);
  const auto noise = NoiseModel::gaussian(0.1);

  DesignConfig empty = config;
  empty.domain = Points(0, 1);
  CHECK_THROWS_AS(run_design(empty, objective, noise), std::invalid_argument);

  DesignConfig no_steps = config;
  no_steps.steps = 0;
  CHECK_THROWS_AS(run_design(no_steps, objective, noise), std::invalid_argument);

  DesignConfig bad_cadence = config;
  bad_cadence.refresh_every = 0;
  CHECK_THROWS_AS(run_design(bad_cadence, objective, noise), std::invalid_argument);

  DesignConfig mismatched = config;
  mismatched.kernel = Kernel::squared_exponential(2, 0.2);
  CHECK_THROWS_AS(run_design(mismatched, objective, noise), std::invalid_argument);
}

}  // TEST_SUITE
