/*
 * This file is part of skr, a library for sparse kernel-based regression
 * and black-box optimization.
 *
 * Licensed under the Apache License Version 2.0. See LICENSE file in the
 * project root for license information.
 */
#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "skr/csv.hpp"
#include "skr/inducing.hpp"
#include "skr/posterior.hpp"
#include "skr/rng.hpp"
#include "skr/scenario.hpp"

namespace skr {
namespace {

using Clock = std::chrono::steady_clock;

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto k = v.size() / 2;
  return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double denom = n * sxx - sx * sx;
  if (denom <= 0) throw std::invalid_argument("need at least two sizes");
  return (n * sxy - sx * sy) / denom;
}

template <typename Fn>
double time_ms(Fn&& fn) {
  const auto start = Clock::now();
  fn();
  const auto stop = Clock::now();
  return std::chrono::duration<double, std::milli>(stop - start).count();
}

}  // namespace

BenchSummary run_bench(const BenchExperiment& experiment) {
  const int d = experiment.kernel.dimension();
  BenchSummary summary;
  std::vector<double> sizes, exact_times, sparse_times;

  for (const auto n : experiment.sizes) {
    if (n < 2) throw std::invalid_argument("bench sizes must be at least 2");
    Rng rng(experiment.seed, streams::make(streams::kDesign,
                                           static_cast<std::uint64_t>(n)));
    Points x(n, d);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (int a = 0; a < d; ++a) x(i, a) = rng.uniform();
      y[i] = rng.normal();
    }
    Points queries(experiment.queries, d);
    for (int q = 0; q < experiment.queries; ++q) {
      for (int a = 0; a < d; ++a) queries(q, a) = rng.uniform();
    }
    const Dataset data(x, y, experiment.tau);

    // The inducing budget follows the information content of the design,
    // m = ceil(coefficient * information gain), unless a fixed budget was
    // requested.  Either way the budget and the uniform row draw are settled
    // outside the timed region.
    Eigen::Index rank = 0;
    if (experiment.fixed_rank > 0) {
      rank = std::min<Eigen::Index>(n, experiment.fixed_rank);
    } else {
      const double info =
          information_gain(experiment.kernel, x, experiment.tau);
      rank = std::max<Eigen::Index>(
          1, std::min<Eigen::Index>(
                 n, static_cast<Eigen::Index>(
                        std::ceil(experiment.rank_per_information * info))));
    }
    const auto selection = select_uniform(experiment.kernel, x, rank,
                                          experiment.seed, LambdaAudit::kNone,
                                          static_cast<std::uint64_t>(n));

    std::vector<double> exact_rep, sparse_rep;
    volatile double sink = 0.0;  // keep the query loops from being elided
    for (int rep = 0; rep < experiment.reps; ++rep) {
      exact_rep.push_back(time_ms([&] {
        const ExactPosterior posterior(experiment.kernel, data);
        double acc = 0.0;
        for (int q = 0; q < experiment.queries; ++q) {
          const Point p = queries.row(q);
          acc += posterior.mean(p) + posterior.variance(p);
        }
        sink = sink + acc;
      }));
      sparse_rep.push_back(time_ms([&] {
        const SparsePosterior posterior(experiment.kernel, data, selection.z);
        double acc = 0.0;
        for (int q = 0; q < experiment.queries; ++q) {
          const Point p = queries.row(q);
          acc += posterior.mean(p) + posterior.variance(p);
        }
        sink = sink + acc;
      }));
    }

    BenchRow row;
    row.n = n;
    row.rank = rank;
    row.exact_ms = median(exact_rep);
    row.sparse_ms = median(sparse_rep);
    row.speedup = row.exact_ms / std::max(row.sparse_ms, 1e-9);
    summary.rows.push_back(row);
    sizes.push_back(static_cast<double>(n));
    exact_times.push_back(std::max(row.exact_ms, 1e-9));
    sparse_times.push_back(std::max(row.sparse_ms, 1e-9));
  }

  if (sizes.size() >= 2) {
    summary.exact_slope = loglog_slope(sizes, exact_times);
    summary.sparse_slope = loglog_slope(sizes, sparse_times);
  }
  return summary;
}

void write_bench_csv(const std::string& dir, const BenchSummary& summary,
                     bool plotdata) {
  std::filesystem::create_directories(dir);
  const auto path = [&dir](const char* name) {
    return (std::filesystem::path(dir) / name).string();
  };
  CsvWriter csv(path("bench.csv"),
                {"n", "rank", "exact_ms", "sparse_ms", "speedup"});
  for (const auto& row : summary.rows) {
    csv.row({std::to_string(row.n), std::to_string(row.rank),
             csv_cell(row.exact_ms), csv_cell(row.sparse_ms),
             csv_cell(row.speedup)});
  }
  csv.close();
  CsvWriter slopes(path("bench_summary.csv"), {"pipeline", "loglog_slope"});
  slopes.row({"exact", csv_cell(summary.exact_slope)});
  slopes.row({"sparse", csv_cell(summary.sparse_slope)});
  slopes.close();
  if (!plotdata) return;
  CsvWriter plot(path("plot_bench.csv"), {"series", "n", "ms"});
  for (const auto& row : summary.rows) {
    plot.row({"exact", std::to_string(row.n), csv_cell(row.exact_ms)});
    plot.row({"sparse", std::to_string(row.n), csv_cell(row.sparse_ms)});
  }
  plot.close();
}

}  // namespace skr
