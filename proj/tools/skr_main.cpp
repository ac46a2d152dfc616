/*
 * This file is part of skr, a library for sparse kernel-based regression
 * and black-box optimization.
 *
 * Licensed under the Apache License Version 2.0. See LICENSE file in the
 * project root for license information.
 */
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "skr/csv.hpp"
#include "skr/scenario.hpp"

namespace {

bool verbose() {
  const char* level = std::getenv("SKR_LOG");
  return level == nullptr || std::string(level) != "quiet";
}

void log_line(const std::string& message) {
  if (verbose()) std::cerr << message << "\n";
}

nlohmann::json load_config(const std::string& path, const char* expected_type) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  const auto type = j.value("type", std::string{});
  if (type != expected_type) {
    throw std::runtime_error("config type '" + type + "' does not match the '" +
                             expected_type + "' subcommand");
  }
  return j;
}

int count_failures(const std::vector<skr::OracleReport>& reports) {
  int failures = 0;
  for (const auto& r : reports) failures += r.pass ? 0 : 1;
  return failures;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "skr: sparse kernel regression, confidence intervals, and batched "
      "pure exploration"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  int jobs = 0;  // 0 = hardware concurrency
  bool plotdata = false;
  bool audit = false;
  int instances = 100;
  std::uint64_t seed = 1;

  auto* validate = app.add_subcommand(
      "validate", "check every analytic identity against dense references");
  validate->add_option("--instances", instances,
                       "randomized instances per identity");
  validate->add_option("--seed", seed, "base seed for instance generation");
  validate->add_option("--out", out_dir, "output directory");
  validate->add_option("--jobs", jobs, "worker threads (0 = all cores)");

  auto* regress = app.add_subcommand(
      "regress", "uncertainty-reduction sweeps with rate certificates");
  regress->add_option("--config", config_path, "experiment JSON")->required();
  regress->add_option("--out", out_dir, "output directory");
  regress->add_option("--jobs", jobs, "worker threads (0 = all cores)");
  regress->add_flag("--plotdata", plotdata, "also write tidy plot CSVs");
  regress->add_flag("--audit", audit,
                    "track the full posterior alongside the sparse one");

  auto* optimize = app.add_subcommand(
      "optimize", "batched pure-exploration sweeps over budgets and seeds");
  optimize->add_option("--config", config_path, "experiment JSON")->required();
  optimize->add_option("--out", out_dir, "output directory");
  optimize->add_option("--jobs", jobs, "worker threads (0 = all cores)");
  optimize->add_flag("--plotdata", plotdata, "also write tidy plot CSVs");

  auto* coverage = app.add_subcommand(
      "coverage", "empirical interval coverage against nominal targets");
  coverage->add_option("--config", config_path, "experiment JSON")->required();
  coverage->add_option("--out", out_dir, "output directory");
  coverage->add_option("--jobs", jobs, "worker threads (0 = all cores)");
  coverage->add_flag("--plotdata", plotdata, "also write tidy plot CSVs");

  auto* bench = app.add_subcommand(
      "bench", "wall-clock scaling of the full and sparse pipelines");
  bench->add_option("--config", config_path, "experiment JSON")->required();
  bench->add_option("--out", out_dir, "output directory");
  bench->add_flag("--plotdata", plotdata, "also write tidy plot CSVs");

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed()) {
      log_line("validating " + std::to_string(instances) +
               " instances per identity");
      const auto reports = skr::run_validation(instances, seed, jobs);
      std::filesystem::create_directories(out_dir);
      const auto path =
          (std::filesystem::path(out_dir) / "oracle_reports.csv").string();
      skr::write_reports_csv(path, reports);
      const int failures = count_failures(reports);
      for (const auto& r : reports) {
        log_line((r.pass ? "  pass  " : "  FAIL  ") + r.identity +
                 "  max_deviation=" + skr::csv_cell(r.max_deviation));
      }
      log_line("wrote " + path);
      if (failures > 0) {
        std::cerr << failures << " identities failed\n";
        return 1;
      }
      return 0;
    }

    if (regress->parsed()) {
      auto j = load_config(config_path, "regress");
      auto experiment = skr::RegressExperiment::from_json(j);
      if (audit) experiment.audit_exact = true;
      log_line("running " + std::to_string(experiment.step_grid.size() *
                                           experiment.seeds.size()) +
               " design runs");
      const auto cells = skr::run_regress(experiment, jobs);
      skr::write_regress_csv(out_dir, cells, plotdata);
      log_line("wrote " + out_dir + "/regress_runs.csv");
      return 0;
    }

    if (optimize->parsed()) {
      auto j = load_config(config_path, "optimize");
      const auto experiment = skr::OptimizeExperiment::from_json(j);
      log_line("running " + std::to_string(experiment.budgets.size() *
                                           experiment.seeds.size()) +
               " exploration runs");
      const auto cells = skr::run_optimize(experiment, jobs);
      skr::write_optimize_csv(out_dir, cells, plotdata);
      log_line("wrote " + out_dir + "/optimize_runs.csv");
      return 0;
    }

    if (coverage->parsed()) {
      auto j = load_config(config_path, "coverage");
      const auto experiment = skr::CoverageExperiment::from_json(j);
      log_line("running " + std::to_string(experiment.configs.size()) +
               " coverage scenarios");
      const auto results = skr::run_coverage_suite(experiment, jobs);
      skr::write_coverage_csv(out_dir, experiment, results, plotdata);
      log_line("wrote " + out_dir + "/coverage.csv");
      return 0;
    }

    if (bench->parsed()) {
      auto j = load_config(config_path, "bench");
      const auto experiment = skr::BenchExperiment::from_json(j);
      log_line("timing " + std::to_string(experiment.sizes.size()) +
               " design sizes");
      const auto summary = skr::run_bench(experiment);
      skr::write_bench_csv(out_dir, summary, plotdata);
      log_line("wrote " + out_dir + "/bench.csv");
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
