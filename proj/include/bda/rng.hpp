/*
 * (C) Copyright 2026 The bda authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <array>
#include <cstdint>

namespace bda::rng {

using Counter = std::array<std::uint64_t, 4>;
using Key = std::array<std::uint64_t, 2>;

/// Philox4x64-10 block function (Salmon et al., SC'11). Output matches the
/// Random123 reference and numpy.random.Philox bit for bit.
Counter philox4x64(Counter ctr, Key key);

/// Uniform double in (0, 1] from the top 53 bits of a raw word.
double to_unit_open0(std::uint64_t x);

/// Counter-addressed standard normal stream. Normal number n of stream
/// (seed, stream) comes from block n/4 of Philox keyed by (seed, stream),
/// turned into four normals by two Box-Muller transforms. Any index can be
/// drawn independently, so trials and workers never share mutable state.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t stream) : key_{seed, stream} {}

  double at(std::uint64_t index) const;
  std::array<double, 4> block(std::uint64_t block_index) const;

 private:
  Key key_;
};

}  // namespace bda::rng
