/*
 * This file is part of skr, a library for sparse kernel-based regression
 * and black-box optimization.
 *
 * Licensed under the Apache License Version 2.0. See LICENSE file in the
 * project root for license information.
 */
#include "skr/noise.hpp"

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace skr {

NoiseModel NoiseModel::gaussian(double sigma) {
  if (sigma <= 0) throw std::invalid_argument("gaussian noise: sigma must be positive");
  return {Family::kGaussian, sigma};
}

NoiseModel NoiseModel::bounded_uniform(double half_width) {
  if (half_width <= 0) {
    throw std::invalid_argument("uniform noise: half width must be positive");
  }
  return {Family::kBoundedUniform, half_width};
}

NoiseModel NoiseModel::laplace(double scale) {
  if (scale <= 0) throw std::invalid_argument("laplace noise: scale must be positive");
  return {Family::kLaplace, scale};
}

double NoiseModel::sample(Rng& rng) const {
  switch (family_) {
    case Family::kGaussian:
      return parameter_ * rng.normal();
    case Family::kBoundedUniform:
      return parameter_ * (2.0 * rng.uniform() - 1.0);
    case Family::kLaplace: {
      // Inverse CDF on a single uniform: sign from the half, log from the
      // folded tail.
      const double u = rng.uniform_open();
      if (u < 0.5) return parameter_ * std::log(2.0 * u);
      return -parameter_ * std::log(2.0 * (1.0 - u));
    }
  }
  throw std::logic_error("unknown noise family");
}

double NoiseModel::sub_gaussian_radius() const {
  switch (family_) {
    case Family::kGaussian:
      return parameter_;
    case Family::kBoundedUniform:
      // Bounded zero-mean noise on [-a, a] satisfies the Hoeffding MGF bound
      // with radius a.
      return parameter_;
    case Family::kLaplace:
      throw std::logic_error("laplace noise is not sub-Gaussian");
  }
  throw std::logic_error("unknown noise family");
}

double NoiseModel::mgf(double h) const {
  switch (family_) {
    case Family::kGaussian:
      return std::exp(0.5 * parameter_ * parameter_ * h * h);
    case Family::kBoundedUniform: {
      const double t = parameter_ * h;
      if (std::abs(t) < 1e-8) return 1.0 + t * t / 6.0;
      return std::sinh(t) / t;
    }
    case Family::kLaplace: {
      const double t = parameter_ * h;
      if (std::abs(t) >= 1.0) {
        throw std::domain_error("laplace mgf undefined for |h| >= 1/scale");
      }
      return 1.0 / (1.0 - t * t);
    }
  }
  throw std::logic_error("unknown noise family");
}

LightTailBound NoiseModel::light_tail(double h0) const {
  if (h0 <= 0) throw std::invalid_argument("light tail: h0 must be positive");
  LightTailBound out;
  out.h0 = h0;
  const double p2 = parameter_ * parameter_;
  switch (family_) {
    case Family::kGaussian: {
      // M''(h) = (sigma^2 + sigma^4 h^2) exp(sigma^2 h^2 / 2), increasing in |h|.
      out.xi0 = (p2 + p2 * p2 * h0 * h0) * std::exp(0.5 * p2 * h0 * h0);
      return out;
    }
    case Family::kLaplace: {
      const double t2 = p2 * h0 * h0;
      if (t2 >= 1.0) {
        throw std::domain_error("light tail: h0 must stay below 1/scale");
      }
      // M''(h) = 2 b^2 (1 + 3 b^2 h^2) / (1 - b^2 h^2)^3, increasing in |h|.
      const double denom = 1.0 - t2;
      out.xi0 = 2.0 * p2 * (1.0 + 3.0 * t2) / (denom * denom * denom);
      return out;
    }
    case Family::kBoundedUniform:
      throw std::logic_error("light-tail handle unused for bounded noise");
  }
  throw std::logic_error("unknown noise family");
}

double NoiseModel::standard_deviation() const {
  switch (family_) {
    case Family::kGaussian:
      return parameter_;
    case Family::kBoundedUniform:
      return parameter_ / std::sqrt(3.0);
    case Family::kLaplace:
      return parameter_ * std::sqrt(2.0);
  }
  throw std::logic_error("unknown noise family");
}

std::string to_string(NoiseModel::Family family) {
  switch (family) {
    case NoiseModel::Family::kGaussian: return "gaussian";
    case NoiseModel::Family::kBoundedUniform: return "bounded_uniform";
    case NoiseModel::Family::kLaplace: return "laplace";
  }
  throw std::logic_error("unknown noise family");
}

nlohmann::json NoiseModel::to_json() const {
  nlohmann::json j;
  j["family"] = to_string(family_);
  switch (family_) {
    case Family::kGaussian: j["sigma"] = parameter_; break;
    case Family::kBoundedUniform: j["half_width"] = parameter_; break;
    case Family::kLaplace: j["scale"] = parameter_; break;
  }
  return j;
}

NoiseModel NoiseModel::from_json(const nlohmann::json& j) {
  const auto family = j.at("family").get<std::string>();
  if (family == "gaussian") return gaussian(j.at("sigma").get<double>());
  if (family == "bounded_uniform") {
    return bounded_uniform(j.at("half_width").get<double>());
  }
  if (family == "laplace") return laplace(j.at("scale").get<double>());
  throw std::invalid_argument("unknown noise family: " + family);
}

}  // namespace skr
