/*
 * This file is part of skr, a library for sparse kernel-based regression
 * and black-box optimization.
 *
 * Licensed under the Apache License Version 2.0. See LICENSE file in the
 * project root for license information.
 */
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "skr/bandit.hpp"
#include "skr/confidence.hpp"
#include "skr/design.hpp"
#include "skr/kernel.hpp"
#include "skr/noise.hpp"

namespace skr {

/// Hard cap on materialized grid sizes for continuous domains.
inline constexpr long kMaxGridPoints = 100000;

/// Box domain materialized as an evenly spaced grid.
struct DomainSpec {
  std::vector<std::pair<double, double>> bounds = {{0.0, 1.0}};
  int resolution = 512;  // per axis; total clamped to kMaxGridPoints

  [[nodiscard]] Points materialize() const;
  static DomainSpec from_json(const nlohmann::json& j);
};

/**
 * One identity checked across randomized instances: the largest absolute
 * deviation observed and the tolerance it is held to.
 */
struct OracleReport {
  std::string identity;
  int instances = 0;
  double max_deviation = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

/**
 * Runs every analytic identity the library is built on against dense
 * reference implementations over `instances` randomized problems (kernel
 * family, dimension, data, inducing sets all drawn fresh per instance).
 * Each identity appears exactly once in the returned table.
 */
std::vector<OracleReport> run_validation(int instances, std::uint64_t seed,
                                         int jobs);

void write_reports_csv(const std::string& path,
                       const std::vector<OracleReport>& reports);

/// Sweep of uncertainty-reduction runs over a step grid and seed list.
struct RegressExperiment {
  std::string label = "regress";
  Kernel kernel = Kernel::squared_exponential(1, 0.2);
  DomainSpec domain;
  double tau = 0.5;
  double delta = 0.1;
  int objective_centers = 8;
  double objective_norm = 2.0;
  NoiseModel noise = NoiseModel::gaussian(0.1);
  std::vector<Eigen::Index> step_grid = {50, 100, 200};
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  bool audit_exact = false;
  int refresh_every = 1;
  double oversample = 16.0;

  static RegressExperiment from_json(const nlohmann::json& j);
};

struct RegressCell {
  std::string label;
  Eigen::Index steps = 0;
  std::uint64_t seed = 0;
  UniformErrorReport report;
  double lambda_hat = 0.0;
  bool events_held = false;
  double max_deviation = 0.0;
  Eigen::Index final_rank = 0;
  double delta_spent = 0.0;
};

std::vector<RegressCell> run_regress(const RegressExperiment& experiment, int jobs);
void write_regress_csv(const std::string& dir, const std::vector<RegressCell>& cells,
                       bool plotdata);

/// Sweep of pure-exploration runs over a budget grid and seed list.
struct OptimizeExperiment {
  std::string label = "optimize";
  Kernel kernel = Kernel::squared_exponential(1, 0.15);
  DomainSpec domain;
  int arm_count = 64;
  double tau = 0.5;
  double delta = 0.1;
  int objective_centers = 8;
  double objective_norm = 2.0;
  NoiseModel noise = NoiseModel::gaussian(0.1);
  std::vector<long> budgets = {64, 256, 1024};
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  bool continuous_intervals = false;
  double oversample = 16.0;

  static OptimizeExperiment from_json(const nlohmann::json& j);
};

struct OptimizeCell {
  std::string label;
  long budget = 0;
  std::uint64_t seed = 0;
  BanditRun run;
  double recommended_gap = 0.0;  // value gap of the recommended arm
};

std::vector<OptimizeCell> run_optimize(const OptimizeExperiment& experiment,
                                       int jobs);
void write_optimize_csv(const std::string& dir,
                        const std::vector<OptimizeCell>& cells, bool plotdata);

/// Batch of coverage experiments (sub-Gaussian and light-tailed widths).
struct CoverageExperiment {
  std::vector<std::string> labels;
  std::vector<CoverageConfig> configs;

  static CoverageExperiment from_json(const nlohmann::json& j);
};

std::vector<CoverageResult> run_coverage_suite(const CoverageExperiment& experiment,
                                               int jobs);
void write_coverage_csv(const std::string& dir, const CoverageExperiment& experiment,
                        const std::vector<CoverageResult>& results, bool plotdata);

/// Wall-clock scaling comparison between the full and sparse pipelines.
struct BenchExperiment {
  std::string label = "bench";
  Kernel kernel = Kernel::squared_exponential(1, 0.2);
  double tau = 0.1;
  std::vector<Eigen::Index> sizes = {500, 1000, 2000, 4000};
  int reps = 5;
  int queries = 50;
  double rank_per_information = 1.0;  // m = ceil(this * realized info gain)
  Eigen::Index fixed_rank = 0;        // when positive, overrides the ratio
  std::uint64_t seed = 7;

  static BenchExperiment from_json(const nlohmann::json& j);
};

struct BenchRow {
  Eigen::Index n = 0;
  Eigen::Index rank = 0;
  double exact_ms = 0.0;   // median fit+query time, full posterior
  double sparse_ms = 0.0;  // median fit+query time, inducing-point posterior
  double speedup = 0.0;
};

struct BenchSummary {
  std::vector<BenchRow> rows;
  double exact_slope = 0.0;   // log-log least squares vs n
  double sparse_slope = 0.0;
};

BenchSummary run_bench(const BenchExperiment& experiment);
void write_bench_csv(const std::string& dir, const BenchSummary& summary,
                     bool plotdata);

}  // namespace skr
