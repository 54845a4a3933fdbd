/*
 * (C) Copyright 2026 The bda authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "bda/rng.hpp"

#include <cmath>
#include <numbers>

namespace bda::rng {

namespace {

constexpr std::uint64_t kM0 = 0xD2E7470EE14C6C93ULL;
constexpr std::uint64_t kM1 = 0xCA5A826395121157ULL;
constexpr std::uint64_t kW0 = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kW1 = 0xBB67AE8584CAA73BULL;

inline void mulhilo(std::uint64_t a, std::uint64_t b, std::uint64_t & hi, std::uint64_t & lo) {
  const unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
  hi = static_cast<std::uint64_t>(p >> 64);
  lo = static_cast<std::uint64_t>(p);
}

}  // namespace

Counter philox4x64(Counter c, Key k) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      k[0] += kW0;
      k[1] += kW1;
    }
    std::uint64_t hi0, lo0, hi1, lo1;
    mulhilo(kM0, c[0], hi0, lo0);
    mulhilo(kM1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
  return c;
}

double to_unit_open0(std::uint64_t x) {
  return static_cast<double>((x >> 11) + 1) * 0x1.0p-53;
}

std::array<double, 4> NormalStream::block(std::uint64_t block_index) const {
  const Counter raw = philox4x64({block_index, 0, 0, 0}, key_);
  std::array<double, 4> out{};
  for (int p = 0; p < 2; ++p) {
    const double r = std::sqrt(-2.0 * std::log(to_unit_open0(raw[2 * p])));
    const double theta = 2.0 * std::numbers::pi * to_unit_open0(raw[2 * p + 1]);
    out[2 * p] = r * std::cos(theta);
    out[2 * p + 1] = r * std::sin(theta);
  }
  return out;
}

double NormalStream::at(std::uint64_t index) const { return block(index / 4)[index % 4]; }

}  // namespace bda::rng
