/*
 * This file is part of skr, a library for sparse kernel-based regression
 * and black-box optimization.
 *
 * Licensed under the Apache License Version 2.0. See LICENSE file in the
 * project root for license information.
 */
#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace skr {

/**
 * Counter-based pseudo-random generator (Philox4x32-10).
 *
 * Every random draw in the library is addressed by a (seed, stream) pair so
 * that independent experiment components (design choices, observation noise,
 * objective synthesis, ...) consume provably non-overlapping randomness and
 * any single stream can be replayed in isolation.  The generator state is
 *
 *   key     = 64-bit seed (split across the two 32-bit key words),
 *   counter = [c0, c1] running 64-bit block index, [c2, c3] 64-bit stream id.
 *
 * Each block yields four 32-bit words.  Doubles take 53 bits from two words;
 * normal deviates use the Box-Muller transform on consecutive uniforms.  The
 * construction is stateless in the sense that block i of stream s under seed
 * g is a pure function of (g, s, i), which any other implementation of
 * Philox4x32-10 can reproduce.
 */
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream) noexcept
      : key_{static_cast<std::uint32_t>(seed & 0xffffffffu),
             static_cast<std::uint32_t>(seed >> 32)},
        stream_{static_cast<std::uint32_t>(stream & 0xffffffffu),
                static_cast<std::uint32_t>(stream >> 32)} {}

  /// Raw Philox4x32-10 block for an explicit counter/key; exposed for
  /// known-answer tests.
  static std::array<std::uint32_t, 4> block(
      const std::array<std::uint32_t, 4>& counter,
      const std::array<std::uint32_t, 2>& key) noexcept {
    constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
    constexpr std::uint32_t kMul0 = 0xD2511F53u;
    constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    std::array<std::uint32_t, 4> c = counter;
    std::uint32_t k0 = key[0];
    std::uint32_t k1 = key[1];
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
      const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
      const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
      c = {hi1 ^ c[1] ^ k0, lo1, hi0 ^ c[3] ^ k1, lo0};
      k0 += kWeyl0;
      k1 += kWeyl1;
    }
    return c;
  }

  std::uint32_t next_u32() noexcept {
    if (word_ == 4) {
      buffer_ = block({static_cast<std::uint32_t>(block_index_ & 0xffffffffu),
                       static_cast<std::uint32_t>(block_index_ >> 32),
                       stream_[0], stream_[1]},
                      key_);
      ++block_index_;
      word_ = 0;
    }
    return buffer_[word_++];
  }

  std::uint64_t next_u64() noexcept {
    const std::uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in (0, 1]; safe as a logarithm argument.
  double uniform_open() noexcept {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) noexcept {
    return lo + (hi - lo) * uniform();
  }

  /// Standard normal deviate via Box-Muller; pairs are cached, so draws
  /// consume one uniform pair per two deviates.
  double normal() noexcept {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * kPi * u2;
    cached_ = radius * std::sin(angle);
    have_cached_ = true;
    return radius * std::cos(angle);
  }

  /// Uniform integer in [0, n); n must be positive.  Uses rejection to stay
  /// exactly uniform.
  std::uint64_t uniform_index(std::uint64_t n) noexcept {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t draw = next_u64();
    while (draw >= limit) draw = next_u64();
    return draw % n;
  }

  bool bernoulli(double p) noexcept { return uniform() < p; }

 private:
  static constexpr double kPi = 3.14159265358979323846;

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 2> stream_;
  std::uint64_t block_index_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int word_ = 4;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

/**
 * Stream-id scheme used throughout the library.  The high 16 bits name the
 * purpose, the low 48 bits index repetitions (step, batch, trial, ...), so
 * distinct components never share a stream.
 */
namespace streams {
constexpr std::uint64_t make(std::uint64_t purpose, std::uint64_t index) noexcept {
  return (purpose << 48) | (index & 0xffffffffffffull);
}
constexpr std::uint64_t kObjective = 1;
constexpr std::uint64_t kNoise = 2;
constexpr std::uint64_t kDesign = 3;
constexpr std::uint64_t kInducing = 4;
constexpr std::uint64_t kDomain = 5;
constexpr std::uint64_t kProbe = 6;
}  // namespace streams

}  // namespace skr
