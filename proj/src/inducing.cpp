/*
 * This file is part of skr, a library for sparse kernel-based regression
 * and black-box optimization.
 *
 * Licensed under the Apache License Version 2.0. See LICENSE file in the
 * project root for license information.
 */
#include "skr/inducing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "skr/linalg.hpp"
#include "skr/posterior.hpp"

namespace skr {

namespace {

constexpr Eigen::Index kKeepAllFloor = 64;
constexpr double kDeltaCeiling = 1.0 / 32.0;

using IndexVec = std::vector<Eigen::Index>;

Points gather_rows(const Points& x, const IndexVec& rows) {
  Points out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(i) = x.row(rows[i]);
  return out;
}

/// Leverage estimates of `targets` against the conditioning set `sample`:
/// posterior variance given the sample, divided by tau^2.  Repeated rows in
/// the sample collapse exactly (c noisy copies of a point condition like one
/// copy with noise tau^2 / c), and repeated targets are scored once, so the
/// cost scales with the distinct rows rather than the raw counts.
Eigen::VectorXd scores_against(const Kernel& kernel, const Points& x,
                               const IndexVec& targets, const IndexVec& sample,
                               double tau) {
  const double tau2 = tau * tau;
  const Points sample_rows = gather_rows(x, sample);
  const RowGroups sample_groups = group_identical_rows(sample_rows);
  Points s;
  Eigen::MatrixXd ridge;
  Eigen::LLT<Eigen::MatrixXd> llt;
  bool collapsed = sample_groups.distinct() < sample_rows.rows();
  if (collapsed) {
    s.resize(sample_groups.distinct(), x.cols());
    for (Eigen::Index g = 0; g < sample_groups.distinct(); ++g) {
      s.row(g) = sample_rows.row(sample_groups.representative[g]);
    }
    ridge = kernel_matrix(kernel, s);
    for (Eigen::Index g = 0; g < sample_groups.distinct(); ++g) {
      ridge(g, g) += tau2 / static_cast<double>(sample_groups.counts[g]);
    }
    llt.compute(ridge);
    // The collapse shrinks the diagonal floor to tau^2 / count; a breakdown
    // there is not a hard failure, the uncollapsed system still has its
    // full tau^2 ridge.
    if (llt.info() != Eigen::Success) collapsed = false;
  }
  if (!collapsed) {
    s = sample_rows;
    ridge = kernel_matrix(kernel, s);
    ridge.diagonal().array() += tau2;
    llt.compute(ridge);
  }
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("leverage scoring: ridge matrix failed to factor");
  }
  const Eigen::MatrixXd l = llt.matrixL();

  const Points target_rows = gather_rows(x, targets);
  const RowGroups target_groups = group_identical_rows(target_rows);
  Eigen::VectorXd per_group(target_groups.distinct());
  for (Eigen::Index g = 0; g < target_groups.distinct(); ++g) {
    const Point p = target_rows.row(target_groups.representative[g]);
    Eigen::VectorXd v = kernel.against(s, p);
    l.triangularView<Eigen::Lower>().solveInPlace(v);
    per_group[g] = std::max(0.0, kernel(p, p) - v.squaredNorm()) / tau2;
  }
  Eigen::VectorXd out(targets.size());
  for (std::size_t t = 0; t < targets.size(); ++t) {
    out[t] = per_group[target_groups.group_of[static_cast<Eigen::Index>(t)]];
  }
  return out;
}

struct RecursionResult {
  IndexVec selected;
  Eigen::VectorXd scores;  // aligned with the level's candidate list
  double dimension = 0.0;
};

RecursionResult recurse(const Kernel& kernel, const Points& x, const IndexVec& level,
                        double tau, double delta, double oversample, Rng& rng) {
  RecursionResult out;
  const auto n = static_cast<Eigen::Index>(level.size());
  if (n <= kKeepAllFloor) {
    out.selected = level;
    out.scores = scores_against(kernel, x, level, level, tau);
    out.dimension = out.scores.sum();
    return out;
  }
  IndexVec half;
  half.reserve(level.size() / 2 + 1);
  for (const auto idx : level) {
    if (rng.bernoulli(0.5)) half.push_back(idx);
  }
  if (half.empty()) half.push_back(level.front());
  const RecursionResult inner =
      recurse(kernel, x, half, tau, delta, oversample, rng);

  out.scores = scores_against(kernel, x, level, inner.selected, tau);
  out.dimension = out.scores.sum();
  if (n <= 16 * static_cast<Eigen::Index>(std::ceil(out.dimension))) {
    out.selected = level;
    return out;
  }
  const double log_term = std::log(std::max(out.dimension, 1.0) / delta);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double p = std::min(1.0, oversample * out.scores[i] * log_term);
    if (rng.bernoulli(p)) out.selected.push_back(level[i]);
  }
  if (out.selected.empty()) {
    Eigen::Index best = 0;
    out.scores.maxCoeff(&best);
    out.selected.push_back(level[best]);
  }
  return out;
}

/// Keeps the first occurrence of each distinct row, preserving sorted order.
IndexVec dedupe_rows(const Points& x, IndexVec indices) {
  std::sort(indices.begin(), indices.end());
  IndexVec out;
  out.reserve(indices.size());
  for (const auto idx : indices) {
    bool seen = false;
    for (const auto kept : out) {
      if (x.row(idx) == x.row(kept)) {
        seen = true;
        break;
      }
    }
    if (!seen) out.push_back(idx);
  }
  return out;
}

void audit_lambda(InducingSelection& sel, const Kernel& kernel, const Points& x,
                  LambdaAudit audit, std::uint64_t seed, std::uint64_t stream) {
  constexpr Eigen::Index kDenseAuditLimit = 2000;
  switch (audit) {
    case LambdaAudit::kNone:
      sel.lambda_max = std::numeric_limits<double>::quiet_NaN();
      sel.lambda_exact = false;
      return;
    case LambdaAudit::kDefault:
      if (x.rows() <= kDenseAuditLimit) {
        sel.lambda_max = compute_lambda_max(kernel, x, sel.z);
        sel.lambda_exact = true;
        return;
      }
      [[fallthrough]];
    case LambdaAudit::kEstimate: {
      Rng rng(seed, streams::make(streams::kInducing, 2 * stream + 1));
      sel.lambda_max = estimate_lambda_max(kernel, x, sel.z, rng);
      sel.lambda_exact = false;
      return;
    }
  }
}

}  // namespace

std::string to_string(SelectionMethod method) {
  switch (method) {
    case SelectionMethod::kRecursiveLeverage: return "recursive_leverage";
    case SelectionMethod::kUniform: return "uniform";
    case SelectionMethod::kManual: return "manual";
  }
  throw std::logic_error("unknown selection method");
}

InducingSelection select_recursive_leverage(const Kernel& kernel, const Points& x,
                                            double tau, double delta,
                                            std::uint64_t seed, double oversample,
                                            LambdaAudit audit, std::uint64_t stream) {
  if (tau <= 0) throw std::invalid_argument("leverage selection: tau must be positive");
  if (delta <= 0 || delta >= 1) {
    throw std::invalid_argument("leverage selection: delta must lie in (0, 1)");
  }
  if (oversample <= 0) {
    throw std::invalid_argument("leverage selection: oversample must be positive");
  }
  InducingSelection sel;
  sel.method = SelectionMethod::kRecursiveLeverage;
  sel.seed = seed;
  sel.delta_used = std::min(delta, kDeltaCeiling * (1.0 - 1e-9));
  if (x.rows() == 0) {
    sel.z.resize(0, x.cols());
    sel.lambda_exact = true;
    return sel;
  }
  IndexVec all(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) all[i] = i;
  Rng rng(seed, streams::make(streams::kInducing, 2 * stream));
  RecursionResult top =
      recurse(kernel, x, all, tau, sel.delta_used, oversample, rng);
  sel.leverage_estimates = std::move(top.scores);
  sel.estimated_dimension = top.dimension;
  sel.size_cap = 384.0 * top.dimension *
                 std::log(3.0 * std::max(top.dimension, 1.0) / sel.delta_used);
  sel.source_indices = dedupe_rows(x, std::move(top.selected));
  sel.z = gather_rows(x, sel.source_indices);
  audit_lambda(sel, kernel, x, audit, seed, stream);
  return sel;
}

InducingSelection select_uniform(const Kernel& kernel, const Points& x,
                                 Eigen::Index target, std::uint64_t seed,
                                 LambdaAudit audit, std::uint64_t stream) {
  if (target < 0) throw std::invalid_argument("uniform selection: negative target");
  InducingSelection sel;
  sel.method = SelectionMethod::kUniform;
  sel.seed = seed;
  const auto n = x.rows();
  IndexVec pool(n);
  for (Eigen::Index i = 0; i < n; ++i) pool[i] = i;
  Rng rng(seed, streams::make(streams::kInducing, 2 * stream));
  const auto take = std::min(target, n);
  for (Eigen::Index i = 0; i < take; ++i) {
    const auto j = i + static_cast<Eigen::Index>(rng.uniform_index(n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(take);
  sel.source_indices = dedupe_rows(x, std::move(pool));
  sel.z = gather_rows(x, sel.source_indices);
  audit_lambda(sel, kernel, x, audit, seed, stream);
  return sel;
}

InducingSelection select_manual(const Kernel& kernel, const Points& x,
                                std::vector<Eigen::Index> indices,
                                LambdaAudit audit) {
  for (const auto idx : indices) {
    if (idx < 0 || idx >= x.rows()) {
      throw std::out_of_range("manual selection: index outside design");
    }
  }
  InducingSelection sel;
  sel.method = SelectionMethod::kManual;
  sel.source_indices = dedupe_rows(x, std::move(indices));
  sel.z = gather_rows(x, sel.source_indices);
  audit_lambda(sel, kernel, x, audit, 0, 0);
  return sel;
}

nlohmann::json InducingSelection::to_json() const {
  nlohmann::json j;
  j["indices"] = source_indices;
  j["method"] = skr::to_string(method);
  j["delta_used"] = delta_used;
  j["seed"] = seed;
  j["lambda_max"] = lambda_max;
  j["lambda_exact"] = lambda_exact;
  j["estimated_dimension"] = estimated_dimension;
  j["size_cap"] = size_cap;
  return j;
}

InducingSelection InducingSelection::from_json(const nlohmann::json& j,
                                               const Points& design) {
  InducingSelection sel;
  const auto indices = j.at("indices").get<std::vector<Eigen::Index>>();
  for (const auto idx : indices) {
    if (idx < 0 || idx >= design.rows()) {
      throw std::out_of_range("selection deserialization: index outside design");
    }
  }
  sel.source_indices = indices;
  sel.z = gather_rows(design, sel.source_indices);
  const auto method = j.at("method").get<std::string>();
  if (method == "recursive_leverage") {
    sel.method = SelectionMethod::kRecursiveLeverage;
  } else if (method == "uniform") {
    sel.method = SelectionMethod::kUniform;
  } else if (method == "manual") {
    sel.method = SelectionMethod::kManual;
  } else {
    throw std::invalid_argument("selection deserialization: unknown method " + method);
  }
  sel.delta_used = j.value("delta_used", 0.0);
  sel.seed = j.value("seed", std::uint64_t{0});
  sel.lambda_max = j.value("lambda_max", 0.0);
  sel.lambda_exact = j.value("lambda_exact", false);
  sel.estimated_dimension = j.value("estimated_dimension", 0.0);
  sel.size_cap = j.value("size_cap", 0.0);
  return sel;
}

double compute_lambda_max(const Kernel& kernel, const Points& x, const Points& z) {
  if (x.rows() == 0) return 0.0;
  Eigen::MatrixXd gap = kernel_matrix(kernel, x);
  if (z.rows() > 0) {
    const ReducedRankKernel reduced(kernel, z);
    const Eigen::MatrixXd w = reduced.features(x);
    gap.noalias() -= w.transpose() * w;
  }
  const double top = top_eigenvalue_dense(gap);
  if (top < -kPsdTolerance * kernel.k_max()) {
    throw std::runtime_error("lambda audit: spectral gap is negative beyond round-off");
  }
  return std::max(0.0, top);
}

double estimate_lambda_max(const Kernel& kernel, const Points& x, const Points& z,
                           Rng& rng, int iters, double rtol) {
  if (x.rows() == 0) return 0.0;
  Eigen::MatrixXd gap = kernel_matrix(kernel, x);
  if (z.rows() > 0) {
    const ReducedRankKernel reduced(kernel, z);
    const Eigen::MatrixXd w = reduced.features(x);
    gap.noalias() -= w.transpose() * w;
  }
  return std::max(0.0, top_eigenvalue_power(gap, iters, rtol, rng));
}

double lambda_trace_bound(const SparsePosterior& posterior) {
  const auto& data = posterior.data();
  double prior_trace = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const Point p = data.x.row(i);
    prior_trace += posterior.kernel()(p, p);
  }
  if (posterior.rank() == 0) return prior_trace;
  // trace(Q_XX) = trace(k_ZZ^{-1} G) through the cached factor of k_ZZ.
  const Eigen::MatrixXd& l = posterior.reduced().factor();
  Eigen::MatrixXd t = posterior.data_gram();
  l.triangularView<Eigen::Lower>().solveInPlace(t);
  l.transpose().triangularView<Eigen::Upper>().solveInPlace(t);
  return std::max(0.0, prior_trace - t.trace());
}

Eigen::VectorXd exact_leverage_scores(const Kernel& kernel, const Points& x,
                                      double tau) {
  if (tau <= 0) throw std::invalid_argument("leverage scores: tau must be positive");
  const auto n = x.rows();
  if (n == 0) return Eigen::VectorXd(0);
  Eigen::MatrixXd ridge = kernel_matrix(kernel, x);
  ridge.diagonal().array() += tau * tau;
  Eigen::LLT<Eigen::MatrixXd> llt(ridge);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("leverage scores: ridge matrix failed to factor");
  }
  const Eigen::MatrixXd inv_factor =
      llt.matrixL().solve(Eigen::MatrixXd::Identity(n, n));
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out[i] = 1.0 - tau * tau * inv_factor.col(i).squaredNorm();
  }
  return out;
}

}  // namespace skr
