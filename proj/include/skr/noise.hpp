/*
 * This file is part of skr, a library for sparse kernel-based regression
 * and black-box optimization.
 *
 * Licensed under the Apache License Version 2.0. See LICENSE file in the
 * project root for license information.
 */
#pragma once

#include <string>

#include <nlohmann/json_fwd.hpp>

#include "skr/rng.hpp"

namespace skr {

/// Moment-generating-function handle for noise with light (but not
/// necessarily sub-Gaussian) tails: the MGF exists on [-h0, h0] and xi0
/// bounds its second derivative there.
struct LightTailBound {
  double h0 = 0.0;
  double xi0 = 0.0;
};

/**
 * Zero-mean observation noise.  Three families:
 *
 *   gaussian(sigma)            sub-Gaussian with radius sigma
 *   bounded_uniform(a)         uniform on [-a, a]; sub-Gaussian with radius a
 *   laplace(b)                 density exp(-|e|/b) / (2b); NOT sub-Gaussian,
 *                              but light-tailed with an explicit MGF bound
 *
 * Sampling consumes exactly one uniform draw per Laplace/uniform deviate and
 * the usual Box-Muller pair per two Gaussian deviates.
 */
class NoiseModel {
 public:
  enum class Family { kGaussian, kBoundedUniform, kLaplace };

  static NoiseModel gaussian(double sigma);
  static NoiseModel bounded_uniform(double half_width);
  static NoiseModel laplace(double scale);

  [[nodiscard]] double sample(Rng& rng) const;

  [[nodiscard]] Family family() const noexcept { return family_; }
  [[nodiscard]] double parameter() const noexcept { return parameter_; }
  [[nodiscard]] bool sub_gaussian() const noexcept {
    return family_ != Family::kLaplace;
  }
  /// Sub-Gaussian radius R; throws for the Laplace family.
  [[nodiscard]] double sub_gaussian_radius() const;

  /// Analytic MGF E[exp(h * noise)]; Laplace requires |h| < 1/scale.
  [[nodiscard]] double mgf(double h) const;
  /// Light-tail bound on [-h0, h0] with the analytic sup of the second MGF
  /// derivative.  Supported for Gaussian and Laplace noise.
  [[nodiscard]] LightTailBound light_tail(double h0) const;

  [[nodiscard]] double standard_deviation() const;

  [[nodiscard]] nlohmann::json to_json() const;
  static NoiseModel from_json(const nlohmann::json& j);

 private:
  NoiseModel(Family family, double parameter)
      : family_(family), parameter_(parameter) {}

  Family family_;
  double parameter_;
};

std::string to_string(NoiseModel::Family family);

}  // namespace skr
