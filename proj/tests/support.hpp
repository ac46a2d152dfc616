/*
 * This file is part of skr, a library for sparse kernel-based regression
 * and black-box optimization.
 *
 * Licensed under the Apache License Version 2.0. See LICENSE file in the
 * project root for license information.
 */
#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <random>
#include <string>

#include "skr/kernel.hpp"
#include "skr/linalg.hpp"
#include "skr/rng.hpp"

namespace skr::testing {

/// Unique scratch directory removed when the fixture leaves scope.
class TempDir {
 public:
  TempDir() {
    const auto base = std::filesystem::temp_directory_path();
    std::random_device rd;
    for (int attempt = 0; attempt < 64; ++attempt) {
      auto candidate = base / ("skr_test_" + std::to_string(rd()));
      std::error_code ec;
      if (std::filesystem::create_directory(candidate, ec)) {
        path_ = candidate;
        return;
      }
    }
    throw std::runtime_error("cannot create scratch directory");
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  [[nodiscard]] std::string file(const std::string& name) const {
    return (path_ / name).string();
  }
  [[nodiscard]] const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

inline Points random_points(Rng& rng, Eigen::Index n, int d, double lo = 0.0,
                            double hi = 1.0) {
  Points x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int a = 0; a < d; ++a) x(i, a) = rng.uniform(lo, hi);
  }
  return x;
}

/**
 * Draws m distinct rows of x whose kernel submatrix is well-conditioned
 * (smallest eigenvalue at least min_eig_ratio * k_max).  Comparisons between
 * different factorization routes are meaningless on nearly singular
 * inducing sets, so oracle fixtures resample and, failing that, shrink.
 */
inline Points conditioned_inducing(const Kernel& kernel, const Points& x,
                                   Eigen::Index m, Rng& rng,
                                   double min_eig_ratio = 1e-5) {
  m = std::min<Eigen::Index>(m, x.rows());
  for (; m >= 1; --m) {
    for (int attempt = 0; attempt < 40; ++attempt) {
      std::vector<Eigen::Index> picks;
      while (static_cast<Eigen::Index>(picks.size()) < m) {
        const auto idx =
            static_cast<Eigen::Index>(rng.uniform_index(x.rows()));
        bool seen = false;
        for (const auto p : picks) seen = seen || p == idx;
        if (!seen) picks.push_back(idx);
      }
      Points z(m, x.cols());
      for (Eigen::Index i = 0; i < m; ++i) z.row(i) = x.row(picks[i]);
      const Eigen::MatrixXd gram = kernel_matrix(kernel, z);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram,
                                                         Eigen::EigenvaluesOnly);
      if (eig.info() == Eigen::Success &&
          eig.eigenvalues().minCoeff() >= min_eig_ratio * kernel.k_max()) {
        return z;
      }
    }
  }
  throw std::runtime_error("no conditioned inducing subset found");
}

}  // namespace skr::testing
