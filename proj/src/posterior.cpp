/*
 * This file is part of skr, a library for sparse kernel-based regression
 * and black-box optimization.
 *
 * Licensed under the Apache License Version 2.0. See LICENSE file in the
 * project root for license information.
 */
#include "skr/posterior.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "skr/csv.hpp"
#include "skr/linalg.hpp"

namespace skr {

namespace {

/// Relative threshold separating round-off from genuinely broken algebra.
constexpr double kVarianceClampFloor = 1e-8;

Eigen::MatrixXd ridge_matrix(const Kernel& kernel, const Points& x, double tau) {
  Eigen::MatrixXd m = kernel_matrix(kernel, x);
  m.diagonal().array() += tau * tau;
  return m;
}

}  // namespace

ExactPosterior::ExactPosterior(Kernel kernel, Dataset data)
    : kernel_(std::move(kernel)), data_(std::move(data)) {
  const auto n = data_.n();
  if (n == 0) {
    factor_.resize(0, 0);
    weights_.resize(0);
    weights_fresh_ = true;
    return;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(ridge_matrix(kernel_, data_.x, data_.tau));
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("exact posterior: ridge matrix failed to factor");
  }
  factor_ = llt.matrixL();
}

void ExactPosterior::refresh_weights() const {
  if (weights_fresh_) return;
  weights_ = data_.y;
  factor_.triangularView<Eigen::Lower>().solveInPlace(weights_);
  factor_.transpose().triangularView<Eigen::Upper>().solveInPlace(weights_);
  weights_fresh_ = true;
}

double ExactPosterior::mean(const Point& x) const {
  if (data_.n() == 0) return 0.0;
  refresh_weights();
  return kernel_.against(data_.x, x).dot(weights_);
}

double ExactPosterior::variance(const Point& x) const {
  const double prior = kernel_(x, x);
  if (data_.n() == 0) return prior;
  Eigen::VectorXd v = kernel_.against(data_.x, x);
  factor_.triangularView<Eigen::Lower>().solveInPlace(v);
  const double raw = prior - v.squaredNorm();
  if (raw >= 0.0) return raw;
  if (raw >= -kVarianceClampFloor * kernel_.k_max()) return 0.0;
  throw std::runtime_error("exact posterior: variance below round-off floor");
}

void ExactPosterior::append(const Point& x, double y) {
  const auto n = data_.n();
  Eigen::VectorXd column = kernel_.against(data_.x, x);
  factor_.conservativeResize(n + 1, n + 1);
  if (n > 0) {
    factor_.topRows(n).col(n).setZero();
    Eigen::VectorXd row = column;
    factor_.topLeftCorner(n, n).triangularView<Eigen::Lower>().solveInPlace(row);
    factor_.row(n).head(n) = row.transpose();
    const double pivot =
        kernel_(x, x) + data_.tau * data_.tau - row.squaredNorm();
    if (pivot <= 0.0) {
      throw std::runtime_error("exact posterior: appended point breaks factorization");
    }
    factor_(n, n) = std::sqrt(pivot);
  } else {
    factor_(0, 0) = std::sqrt(kernel_(x, x) + data_.tau * data_.tau);
  }
  data_.append(x, y);
  weights_fresh_ = false;
}

double ExactPosterior::information_gain() const {
  const auto n = data_.n();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) sum += std::log(factor_(i, i));
  return sum - static_cast<double>(n) * std::log(data_.tau);
}

SparsePosterior::SparsePosterior(Kernel kernel, Dataset data, Points inducing)
    : kernel_(std::move(kernel)),
      data_(std::move(data)),
      reduced_(kernel_, std::move(inducing)) {
  const auto m = reduced_.rank();
  const double tau2 = data_.tau * data_.tau;
  gram_zz_ = kernel_matrix(kernel_, reduced_.inducing());
  const RowGroups groups = group_identical_rows(data_.x);
  if (groups.distinct() < data_.n()) {
    // Repeated design rows (finite action sets) share their cross-kernel
    // row; G accumulates multiplicity-weighted outer products over the
    // distinct rows, dropping the O(n m^2) product to O(distinct m^2).
    Points distinct(groups.distinct(), data_.x.cols());
    Eigen::VectorXd multiplicity(groups.distinct());
    for (Eigen::Index g = 0; g < groups.distinct(); ++g) {
      distinct.row(g) = data_.x.row(groups.representative[g]);
      multiplicity[g] = static_cast<double>(groups.counts[g]);
    }
    const Eigen::MatrixXd cross_distinct =
        kernel_matrix(kernel_, distinct, reduced_.inducing());
    cross_.resize(data_.n(), m);
    for (Eigen::Index i = 0; i < data_.n(); ++i) {
      cross_.row(i) = cross_distinct.row(groups.group_of[i]);
    }
    data_gram_.noalias() = cross_distinct.transpose() *
                           multiplicity.asDiagonal() * cross_distinct;
  } else {
    cross_ = kernel_matrix(kernel_, data_.x, reduced_.inducing());
    data_gram_.noalias() = cross_.transpose() * cross_;
  }
  cross_y_ = cross_.transpose() * data_.y;
  Eigen::MatrixXd a = tau2 * gram_zz_ + data_gram_;
  ridge_.compute(a);
  if (m > 0 && ridge_.info() != Eigen::Success) {
    auto factored = jittered_llt(a, tau2 * kernel_.k_max(), "sparse ridge system");
    ridge_ = std::move(factored.llt);
    ridge_jitter_ = factored.jitter;
  }
}

Eigen::VectorXd SparsePosterior::solve_ridge(const Eigen::VectorXd& v) const {
  return ridge_.solve(v);
}

double SparsePosterior::clamp_variance(double raw, const char* what) const {
  if (raw >= 0.0) return raw;
  if (raw >= -kVarianceClampFloor * kernel_.k_max()) return 0.0;
  throw std::runtime_error(std::string("sparse posterior: ") + what +
                           " below round-off floor");
}

double SparsePosterior::mean(const Point& x) const {
  if (reduced_.rank() == 0 || data_.n() == 0) return 0.0;
  if (!weights_fresh_) {
    weights_ = solve_ridge(cross_y_);
    weights_fresh_ = true;
  }
  return kernel_.against(reduced_.inducing(), x).dot(weights_);
}

double SparsePosterior::variance(const Point& x) const {
  const double prior = kernel_(x, x);
  if (reduced_.rank() == 0) return prior;
  const double tau2 = data_.tau * data_.tau;
  const Eigen::VectorXd kz = kernel_.against(reduced_.inducing(), x);
  const Eigen::VectorXd phi = reduced_.features(x);
  const Eigen::VectorXd b = solve_ridge(kz);
  const double raw = prior - phi.squaredNorm() + tau2 * kz.dot(b);
  return clamp_variance(raw, "variance");
}

VarianceDecomposition SparsePosterior::decompose(const Point& x) const {
  VarianceDecomposition out;
  const double prior = kernel_(x, x);
  if (reduced_.rank() == 0) {
    out.projection = prior;
    return out;
  }
  const double tau2 = data_.tau * data_.tau;
  const Eigen::VectorXd kz = kernel_.against(reduced_.inducing(), x);
  const Eigen::VectorXd phi = reduced_.features(x);
  const Eigen::VectorXd b = solve_ridge(kz);
  const double projection_raw = prior - phi.squaredNorm();
  const double noise_raw = tau2 * b.dot(data_gram_ * b);
  // Surrogate variance net of noise collapses to tau^4 b^T k_ZZ b, a
  // quadratic form in a PSD matrix, so it can only go negative by round-off.
  const double reduced_raw = tau2 * tau2 * b.dot(gram_zz_ * b);
  double clamp = 0.0;
  for (double raw : {projection_raw, noise_raw, reduced_raw}) {
    if (raw < 0.0) clamp = std::max(clamp, -raw);
  }
  out.projection = clamp_variance(projection_raw, "projection term");
  out.noise = clamp_variance(noise_raw, "noise term");
  out.reduced_prediction = clamp_variance(reduced_raw, "reduced prediction term");
  out.clamp_magnitude = clamp;
  return out;
}

Eigen::VectorXd SparsePosterior::prediction_weights(const Point& x) const {
  if (reduced_.rank() == 0 || data_.n() == 0) {
    return Eigen::VectorXd::Zero(data_.n());
  }
  const Eigen::VectorXd b = solve_ridge(kernel_.against(reduced_.inducing(), x));
  return cross_ * b;
}

void SparsePosterior::append(const Point& x, double y) {
  const Eigen::VectorXd kz = kernel_.against(reduced_.inducing(), x);
  const auto n = data_.n();
  cross_.conservativeResize(n + 1, Eigen::NoChange);
  cross_.row(n) = kz.transpose();
  if (reduced_.rank() > 0) {
    Eigen::VectorXd update = kz;
    ridge_.rankUpdate(update, 1.0);
    data_gram_.selfadjointView<Eigen::Lower>().rankUpdate(kz, 1.0);
    data_gram_.triangularView<Eigen::StrictlyUpper>() =
        data_gram_.transpose().triangularView<Eigen::StrictlyUpper>();
    cross_y_ += kz * y;
  }
  data_.append(x, y);
  weights_fresh_ = false;
}

Eigen::VectorXd SparsePosterior::mean_coefficients() const {
  if (reduced_.rank() == 0 || data_.n() == 0) {
    return Eigen::VectorXd::Zero(reduced_.rank());
  }
  return solve_ridge(cross_y_);
}

double SparsePosterior::mean_rkhs_norm() const {
  const Eigen::VectorXd c = mean_coefficients();
  if (c.size() == 0) return 0.0;
  return std::sqrt(std::max(0.0, c.dot(gram_zz_ * c)));
}

RkhsFunction project_function(const RkhsFunction& f, const ReducedRankKernel& reduced) {
  const Eigen::VectorXd fz = f.at(reduced.inducing());
  return RkhsFunction(reduced.base(), reduced.inducing(), reduced.solve_gram(fz));
}

double information_gain(const Kernel& kernel, const Points& x, double tau) {
  if (tau <= 0) throw std::invalid_argument("information gain: tau must be positive");
  const auto n = x.rows();
  if (n == 0) return 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt(ridge_matrix(kernel, x, tau));
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("information gain: ridge matrix failed to factor");
  }
  const Eigen::MatrixXd l = llt.matrixL();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) sum += std::log(l(i, i));
  return sum - static_cast<double>(n) * std::log(tau);
}

double effective_dimension(const Kernel& kernel, const Points& x, double tau) {
  if (tau <= 0) throw std::invalid_argument("effective dimension: tau must be positive");
  const auto n = x.rows();
  if (n == 0) return 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt(ridge_matrix(kernel, x, tau));
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("effective dimension: ridge matrix failed to factor");
  }
  const Eigen::MatrixXd inv_factor =
      llt.matrixL().solve(Eigen::MatrixXd::Identity(n, n));
  return static_cast<double>(n) - tau * tau * inv_factor.squaredNorm();
}

void export_snapshot(const std::string& path, const Points& queries,
                     const ExactPosterior* exact, const SparsePosterior* sparse) {
  std::vector<std::string> columns;
  for (Eigen::Index d = 0; d < queries.cols(); ++d) {
    columns.push_back("x" + std::to_string(d));
  }
  for (const char* name :
       {"exact_mean", "exact_sd", "sparse_mean", "sparse_sd", "var_projection",
        "var_reduced_prediction", "var_noise"}) {
    columns.emplace_back(name);
  }
  CsvWriter out(path, columns);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (Eigen::Index i = 0; i < queries.rows(); ++i) {
    const Point q = queries.row(i);
    std::vector<std::string> cells;
    for (Eigen::Index d = 0; d < queries.cols(); ++d) cells.push_back(csv_cell(q[d]));
    if (exact) {
      cells.push_back(csv_cell(exact->mean(q)));
      cells.push_back(csv_cell(std::sqrt(exact->variance(q))));
    } else {
      cells.push_back(csv_cell(nan));
      cells.push_back(csv_cell(nan));
    }
    if (sparse) {
      const auto split = sparse->decompose(q);
      cells.push_back(csv_cell(sparse->mean(q)));
      cells.push_back(csv_cell(std::sqrt(sparse->variance(q))));
      cells.push_back(csv_cell(split.projection));
      cells.push_back(csv_cell(split.reduced_prediction));
      cells.push_back(csv_cell(split.noise));
    } else {
      for (int c = 0; c < 5; ++c) cells.push_back(csv_cell(nan));
    }
    out.row(std::move(cells));
  }
  out.close();
}

}  // namespace skr
