/*
 * This file is part of skr, a library for sparse kernel-based regression
 * and black-box optimization.
 *
 * Licensed under the Apache License Version 2.0. See LICENSE file in the
 * project root for license information.
 */
#include "skr/kernel.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "skr/linalg.hpp"

namespace skr {

namespace {

constexpr int kCompensatedDimensionThreshold = 8;

double squared_distance(const Point& a, const Point& b) {
  const auto d = a.size();
  if (d <= kCompensatedDimensionThreshold) {
    return (a - b).squaredNorm();
  }
  CompensatedSum sum;
  for (Eigen::Index i = 0; i < d; ++i) {
    const double diff = a[i] - b[i];
    sum.add(diff * diff);
  }
  return sum.value();
}

int table_index(const Point& x) {
  const double raw = x[0];
  const double rounded = std::round(raw);
  if (std::abs(raw - rounded) > 1e-9) {
    throw std::invalid_argument("tabulated kernel: point is not an integer index");
  }
  return static_cast<int>(rounded);
}

}  // namespace

std::string to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::kSquaredExponential: return "squared_exponential";
    case KernelFamily::kMatern12: return "matern12";
    case KernelFamily::kMatern32: return "matern32";
    case KernelFamily::kMatern52: return "matern52";
    case KernelFamily::kTabulated: return "tabulated";
  }
  throw std::logic_error("unknown kernel family");
}

KernelFamily kernel_family_from_string(const std::string& name) {
  if (name == "squared_exponential") return KernelFamily::kSquaredExponential;
  if (name == "matern12") return KernelFamily::kMatern12;
  if (name == "matern32") return KernelFamily::kMatern32;
  if (name == "matern52") return KernelFamily::kMatern52;
  if (name == "tabulated") return KernelFamily::kTabulated;
  throw std::invalid_argument("unknown kernel family: " + name);
}

Kernel Kernel::squared_exponential(int dimension, double lengthscale,
                                   double variance) {
  if (dimension < 1) throw std::invalid_argument("kernel dimension must be >= 1");
  if (lengthscale <= 0) throw std::invalid_argument("lengthscale must be positive");
  if (variance <= 0) throw std::invalid_argument("variance must be positive");
  Kernel k;
  k.family_ = KernelFamily::kSquaredExponential;
  k.dimension_ = dimension;
  k.lengthscale_ = lengthscale;
  k.variance_ = variance;
  k.k_max_ = variance;
  return k;
}

Kernel Kernel::matern(int dimension, double smoothness, double lengthscale,
                      double variance) {
  if (dimension < 1) throw std::invalid_argument("kernel dimension must be >= 1");
  if (lengthscale <= 0) throw std::invalid_argument("lengthscale must be positive");
  if (variance <= 0) throw std::invalid_argument("variance must be positive");
  Kernel k;
  if (smoothness == 0.5) {
    k.family_ = KernelFamily::kMatern12;
  } else if (smoothness == 1.5) {
    k.family_ = KernelFamily::kMatern32;
  } else if (smoothness == 2.5) {
    k.family_ = KernelFamily::kMatern52;
  } else {
    throw std::invalid_argument("Matern smoothness must be 0.5, 1.5 or 2.5");
  }
  k.dimension_ = dimension;
  k.lengthscale_ = lengthscale;
  k.variance_ = variance;
  k.k_max_ = variance;
  return k;
}

Kernel Kernel::tabulated(Eigen::MatrixXd table) {
  if (table.rows() != table.cols()) {
    throw std::invalid_argument("tabulated kernel: table must be square");
  }
  if (table.rows() == 0) {
    throw std::invalid_argument("tabulated kernel: table must be non-empty");
  }
  const double scale = table.diagonal().maxCoeff();
  if (scale <= 0) {
    throw std::invalid_argument("tabulated kernel: diagonal must have a positive entry");
  }
  if (!table.isApprox(table.transpose(), 1e-12)) {
    throw std::invalid_argument("tabulated kernel: table must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(table, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -kPsdTolerance * scale) {
    throw std::invalid_argument("tabulated kernel: table is not positive semi-definite");
  }
  Kernel k;
  k.family_ = KernelFamily::kTabulated;
  k.dimension_ = 1;
  k.lengthscale_ = 1.0;
  k.variance_ = scale;
  k.k_max_ = scale;
  k.table_ = std::make_shared<const Eigen::MatrixXd>(std::move(table));
  return k;
}

double Kernel::operator()(const Point& a, const Point& b) const {
  if (a.size() != dimension_ || b.size() != dimension_) {
    throw std::invalid_argument("kernel: point dimension mismatch");
  }
  switch (family_) {
    case KernelFamily::kSquaredExponential: {
      const double r2 = squared_distance(a, b);
      return variance_ * std::exp(-r2 / (2.0 * lengthscale_ * lengthscale_));
    }
    case KernelFamily::kMatern12: {
      const double r = std::sqrt(squared_distance(a, b));
      return variance_ * std::exp(-r / lengthscale_);
    }
    case KernelFamily::kMatern32: {
      const double s = std::sqrt(3.0 * squared_distance(a, b)) / lengthscale_;
      return variance_ * (1.0 + s) * std::exp(-s);
    }
    case KernelFamily::kMatern52: {
      const double s = std::sqrt(5.0 * squared_distance(a, b)) / lengthscale_;
      return variance_ * (1.0 + s + s * s / 3.0) * std::exp(-s);
    }
    case KernelFamily::kTabulated: {
      const int i = table_index(a);
      const int j = table_index(b);
      const auto n = table_->rows();
      if (i < 0 || j < 0 || i >= n || j >= n) {
        throw std::out_of_range("tabulated kernel: index outside table");
      }
      return (*table_)(i, j);
    }
  }
  throw std::logic_error("unknown kernel family");
}

Eigen::VectorXd Kernel::against(const Points& x, const Point& q) const {
  Eigen::VectorXd out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    out[i] = (*this)(x.row(i), q);
  }
  return out;
}

double Kernel::curvature() const {
  const double l2 = lengthscale_ * lengthscale_;
  switch (family_) {
    case KernelFamily::kSquaredExponential: return variance_ / l2;
    case KernelFamily::kMatern32: return 3.0 * variance_ / l2;
    case KernelFamily::kMatern52: return 5.0 * variance_ / (3.0 * l2);
    case KernelFamily::kMatern12:
    case KernelFamily::kTabulated:
      throw std::logic_error("curvature undefined: kernel is not twice differentiable");
  }
  throw std::logic_error("unknown kernel family");
}

const Eigen::MatrixXd& Kernel::table() const {
  if (!table_) throw std::logic_error("kernel has no table");
  return *table_;
}

int Kernel::table_size() const { return static_cast<int>(table().rows()); }

nlohmann::json Kernel::to_json() const {
  nlohmann::json j;
  j["family"] = to_string(family_);
  j["dimension"] = dimension_;
  if (family_ == KernelFamily::kTabulated) {
    const auto& t = table();
    std::vector<std::vector<double>> rows(t.rows());
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
      rows[i].assign(t.row(i).begin(), t.row(i).end());
    }
    j["table"] = rows;
  } else {
    j["lengthscale"] = lengthscale_;
    j["variance"] = variance_;
  }
  return j;
}

Kernel Kernel::from_json(const nlohmann::json& j) {
  const auto family = kernel_family_from_string(j.at("family").get<std::string>());
  if (family == KernelFamily::kTabulated) {
    if (j.contains("table_csv")) {
      return tabulated_from_csv(j.at("table_csv").get<std::string>());
    }
    const auto rows = j.at("table").get<std::vector<std::vector<double>>>();
    Eigen::MatrixXd t(rows.size(), rows.empty() ? 0 : rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != static_cast<std::size_t>(t.cols())) {
        throw std::invalid_argument("tabulated kernel: ragged table rows");
      }
      for (std::size_t c = 0; c < rows[i].size(); ++c) t(i, c) = rows[i][c];
    }
    return tabulated(std::move(t));
  }
  const int dim = j.value("dimension", 1);
  const double lengthscale = j.at("lengthscale").get<double>();
  const double variance = j.value("variance", 1.0);
  if (family == KernelFamily::kSquaredExponential) {
    return squared_exponential(dim, lengthscale, variance);
  }
  const double nu = family == KernelFamily::kMatern12   ? 0.5
                    : family == KernelFamily::kMatern32 ? 1.5
                                                        : 2.5;
  return matern(dim, nu, lengthscale, variance);
}

Kernel Kernel::tabulated_from_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open kernel table: " + path);
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("kernel table is empty: " + path);
  }
  std::vector<std::string> ids;
  {
    std::stringstream header(line);
    std::string cell;
    while (std::getline(header, cell, ',')) ids.push_back(cell);
  }
  const std::size_t n = ids.size();
  if (n == 0) throw std::runtime_error("kernel table header has no ids: " + path);
  Eigen::MatrixXd t(n, n);
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (row >= n) throw std::runtime_error("kernel table has too many rows: " + path);
    std::stringstream ss(line);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(ss, cell, ',')) {
      if (col >= n) throw std::runtime_error("kernel table row too long: " + path);
      t(row, col) = std::stod(cell);
      ++col;
    }
    if (col != n) throw std::runtime_error("kernel table row too short: " + path);
    ++row;
  }
  if (row != n) throw std::runtime_error("kernel table has too few rows: " + path);
  return tabulated(std::move(t));
}

void Kernel::tabulated_to_csv(const std::string& path) const {
  const auto& t = table();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write kernel table: " + path);
  out.precision(17);
  for (Eigen::Index j = 0; j < t.cols(); ++j) {
    out << (j ? "," : "") << j;
  }
  out << "\n";
  for (Eigen::Index i = 0; i < t.rows(); ++i) {
    for (Eigen::Index j = 0; j < t.cols(); ++j) {
      out << (j ? "," : "") << t(i, j);
    }
    out << "\n";
  }
}

Eigen::MatrixXd kernel_matrix(const Kernel& k, const Points& a, const Points& b) {
  Eigen::MatrixXd out(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      out(i, j) = k(a.row(i), b.row(j));
    }
  }
  return out;
}

Eigen::MatrixXd kernel_matrix(const Kernel& k, const Points& x) {
  Eigen::MatrixXd out(x.rows(), x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    out(i, i) = k(x.row(i), x.row(i));
    for (Eigen::Index j = i + 1; j < x.rows(); ++j) {
      out(i, j) = out(j, i) = k(x.row(i), x.row(j));
    }
  }
  return out;
}

RowGroups group_identical_rows(const Points& x) {
  RowGroups out;
  out.group_of.resize(x.rows());
  // Keyed on raw bit patterns: total order without NaN surprises, and only
  // genuinely identical rows (as produced by repeated queries of the same
  // candidate) collapse.
  std::map<std::vector<std::uint64_t>, Eigen::Index> seen;
  std::vector<std::uint64_t> key(x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index d = 0; d < x.cols(); ++d) {
      key[d] = std::bit_cast<std::uint64_t>(x(i, d));
    }
    const auto [it, inserted] = seen.try_emplace(key, out.distinct());
    if (inserted) {
      out.representative.push_back(i);
      out.counts.push_back(0);
    }
    out.group_of[i] = it->second;
    ++out.counts[it->second];
  }
  return out;
}

ReducedRankKernel::ReducedRankKernel(Kernel base, Points inducing)
    : base_(std::move(base)), inducing_(std::move(inducing)) {
  if (inducing_.rows() > 0 && inducing_.cols() != base_.dimension()) {
    throw std::invalid_argument("reduced-rank kernel: inducing point dimension mismatch");
  }
  const Eigen::MatrixXd gram = kernel_matrix(base_, inducing_);
  auto factored = jittered_llt(gram, base_.k_max(), "reduced-rank gram");
  factor_ = factored.llt.matrixL();
  jitter_ = factored.jitter;
}

Eigen::VectorXd ReducedRankKernel::features(const Point& x) const {
  Eigen::VectorXd kz = base_.against(inducing_, x);
  factor_.triangularView<Eigen::Lower>().solveInPlace(kz);
  return kz;
}

Eigen::MatrixXd ReducedRankKernel::features(const Points& x) const {
  Eigen::MatrixXd out(inducing_.rows(), x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    out.col(i) = features(static_cast<Point>(x.row(i)));
  }
  return out;
}

double ReducedRankKernel::operator()(const Point& a, const Point& b) const {
  if (rank() == 0) return 0.0;
  return features(a).dot(features(b));
}

Eigen::VectorXd ReducedRankKernel::solve_gram(const Eigen::VectorXd& v) const {
  Eigen::VectorXd out = v;
  factor_.triangularView<Eigen::Lower>().solveInPlace(out);
  factor_.transpose().triangularView<Eigen::Upper>().solveInPlace(out);
  return out;
}

RkhsFunction::RkhsFunction(Kernel kernel, Points centers,
                           Eigen::VectorXd coefficients)
    : kernel_(std::move(kernel)),
      centers_(std::move(centers)),
      coefficients_(std::move(coefficients)) {
  if (centers_.rows() != coefficients_.size()) {
    throw std::invalid_argument("rkhs function: centers/coefficients size mismatch");
  }
  norm_ = recompute_norm();
}

double RkhsFunction::operator()(const Point& x) const {
  if (centers_.rows() == 0) return 0.0;
  return kernel_.against(centers_, x).dot(coefficients_);
}

Eigen::VectorXd RkhsFunction::at(const Points& x) const {
  Eigen::VectorXd out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] = (*this)(x.row(i));
  return out;
}

double RkhsFunction::recompute_norm() const {
  if (centers_.rows() == 0) return 0.0;
  const Eigen::MatrixXd gram = kernel_matrix(kernel_, centers_);
  const double sq = coefficients_.dot(gram * coefficients_);
  // Round-off can push an exactly PSD quadratic form a hair below zero.
  return std::sqrt(std::max(sq, 0.0));
}

RkhsFunction sample_rkhs_function(
    const Kernel& kernel, const std::vector<std::pair<double, double>>& bounds,
    int num_centers, double target_norm, Rng& rng) {
  if (num_centers < 1) throw std::invalid_argument("need at least one center");
  if (target_norm <= 0) throw std::invalid_argument("target norm must be positive");
  if (static_cast<int>(bounds.size()) != kernel.dimension()) {
    throw std::invalid_argument("bounds dimension does not match kernel");
  }
  constexpr int kMaxAttempts = 5;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Points centers(num_centers, kernel.dimension());
    for (int i = 0; i < num_centers; ++i) {
      for (int d = 0; d < kernel.dimension(); ++d) {
        centers(i, d) = rng.uniform(bounds[d].first, bounds[d].second);
      }
    }
    Eigen::VectorXd alpha(num_centers);
    for (int i = 0; i < num_centers; ++i) alpha[i] = rng.normal();
    const Eigen::MatrixXd gram = kernel_matrix(kernel, centers);
    const double sq = alpha.dot(gram * alpha);
    // Nearly coincident centers can make the Gram form numerically singular;
    // resample rather than rescaling by a meaningless norm.
    if (sq <= kPsdTolerance * kernel.k_max() * alpha.squaredNorm()) continue;
    alpha *= target_norm / std::sqrt(sq);
    return RkhsFunction(kernel, std::move(centers), std::move(alpha));
  }
  throw std::runtime_error("sample_rkhs_function: Gram matrix singular after retries");
}

Points uniform_grid(const std::vector<std::pair<double, double>>& bounds,
                    int per_axis) {
  if (per_axis < 2) throw std::invalid_argument("grid needs at least two points per axis");
  const int d = static_cast<int>(bounds.size());
  long total = 1;
  for (int i = 0; i < d; ++i) total *= per_axis;
  Points out(total, d);
  for (long idx = 0; idx < total; ++idx) {
    long rem = idx;
    for (int axis = d - 1; axis >= 0; --axis) {
      const long coord = rem % per_axis;
      rem /= per_axis;
      const auto [lo, hi] = bounds[axis];
      out(idx, axis) = lo + (hi - lo) * static_cast<double>(coord) /
                                static_cast<double>(per_axis - 1);
    }
  }
  return out;
}

}  // namespace skr
