// Copyright 2026 The xcon Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace xcon {

using Rng = std::mt19937_64;

// Independent stream ids so that one stage consuming more or fewer draws
// never shifts another stage's sequence.
namespace stream {
inline constexpr std::uint64_t kKMeansInit = 1;
inline constexpr std::uint64_t kModelInit = 2;
inline constexpr std::uint64_t kCoarseSampler = 3;
inline constexpr std::uint64_t kFineSampler = 4;
inline constexpr std::uint64_t kGenerator = 5;
inline constexpr std::uint64_t kProbeSplit = 6;
}  // namespace stream

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream_id), static_cast<std::uint32_t>(stream_id >> 32)};
  return Rng(seq);
}

// Portable draws: the std distributions are implementation-defined.
inline double uniform_unit(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return static_cast<std::size_t>(uniform_unit(rng) * static_cast<double>(n)) % n;
}

inline double standard_normal(Rng& rng) {
  double u1 = uniform_unit(rng);
  while (u1 <= 0.0) u1 = uniform_unit(rng);
  const double u2 = uniform_unit(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace xcon
