/*
 * (C) Copyright 2026 The bda authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include <doctest.h>

#include <cmath>
#include <vector>

#include "bda/dynamics.hpp"
#include "bda/kernels.hpp"
#include "bda/rng.hpp"

using namespace bda;

namespace {

std::vector<double> normals(std::size_t n, std::uint64_t seed) {
  const rng::NormalStream s(seed, 11);
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = s.at(i);
  return v;
}

const kernels::StencilTerm kLorenz[] = {{1, -1, -0.5}, {-1, 1, -0.5}, {-1, -2, 0.5}, {-2, -1, 0.5}};
const kernels::StencilTerm kGradX[] = {{-1, -2, -0.5}, {1, 2, -0.5}, {1, -1, 0.5}, {2, 1, 0.5}};

}  // namespace

TEST_CASE("scalar stencil matches a direct modular evaluation") {
  for (std::size_t n : {4u, 5u, 12u, 37u}) {
    const auto x = normals(n, 1);
    const auto y = normals(n, 2);
    std::vector<double> out(n, 0.25);
    kernels::scalar_table().stencil(kLorenz, 4, 2.0, x.data(), y.data(), out.data(), n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto at = [n](std::ptrdiff_t j) { return static_cast<std::size_t>((j % static_cast<std::ptrdiff_t>(n) + static_cast<std::ptrdiff_t>(n)) % static_cast<std::ptrdiff_t>(n)); };
      const auto ii = static_cast<std::ptrdiff_t>(i);
      double acc = 0.0;
      for (const auto & t : kLorenz) acc += t.coeff * x[at(ii + t.x_offset)] * y[at(ii + t.y_offset)];
      CHECK(out[i] == doctest::Approx(0.25 + 2.0 * acc).epsilon(1e-15));
    }
  }
}

TEST_CASE("AVX2 kernels agree with the scalar reference") {
  if (!kernels::isa_available(kernels::Isa::Avx2)) {
    MESSAGE("AVX2 not available on this machine; equivalence test skipped");
    return;
  }
  const auto & sc = kernels::scalar_table();
  const auto & av = kernels::table(kernels::Isa::Avx2);
  CHECK(av.isa == kernels::Isa::Avx2);
  for (std::size_t n = 0; n <= 67; ++n) {
    const auto x = normals(n, 10 + n);
    const auto y = normals(n, 100 + n);
    SUBCASE("element-wise kernels are bit identical") {
      auto a = y;
      auto b = y;
      sc.axpy(-0.7, x.data(), a.data(), n);
      av.axpy(-0.7, x.data(), b.data(), n);
      CHECK(a == b);
      sc.scale_add(1.3, a.data(), x.data(), n);
      av.scale_add(1.3, b.data(), x.data(), n);
      CHECK(a == b);
    }
    SUBCASE("reductions agree to rounding") {
      double scale = 0.0;
      for (std::size_t i = 0; i < n; ++i) scale += std::abs(x[i] * y[i]);
      CHECK(std::abs(sc.dot(x.data(), y.data(), n) - av.dot(x.data(), y.data(), n)) <= 1e-15 * (scale + 1.0));
      double dist = 0.0;
      for (std::size_t i = 0; i < n; ++i) dist += (x[i] - y[i]) * (x[i] - y[i]);
      CHECK(std::abs(sc.squared_distance(x.data(), y.data(), n) - av.squared_distance(x.data(), y.data(), n)) <=
            1e-15 * (dist + 1.0));
    }
    if (n >= 4) {
      SUBCASE("stencils are bit identical, including the wrapped edges") {
        for (const auto * terms : {kLorenz, kGradX}) {
          std::vector<double> a(n, 0.5);
          std::vector<double> b(n, 0.5);
          sc.stencil(terms, 4, -1.25, x.data(), y.data(), a.data(), n);
          av.stencil(terms, 4, -1.25, x.data(), y.data(), b.data(), n);
          CHECK(a == b);
        }
      }
    }
  }
}

TEST_CASE("switching the active ISA leaves Lorenz-96 trajectories unchanged") {
  const BilinearSystem sys = lorenz96(36, 8.0);
  Vector v(36);
  for (int i = 0; i < 36; ++i) v[i] = std::sin(0.3 * i) + 1.0;
  kernels::force_isa(kernels::Isa::Scalar);
  const Vector a = flow(sys, v, 0.05);
  if (kernels::isa_available(kernels::Isa::Avx2)) {
    kernels::force_isa(kernels::Isa::Avx2);
    const Vector b = flow(sys, v, 0.05);
    CHECK((a - b).norm() == 0.0);
  }
  CHECK(kernels::scalar_table().isa == kernels::Isa::Scalar);
}

TEST_CASE("requesting an unavailable ISA throws") {
  if (!kernels::isa_available(kernels::Isa::Avx2)) {
    CHECK_THROWS(kernels::table(kernels::Isa::Avx2));
  } else {
    CHECK_NOTHROW(kernels::table(kernels::Isa::Avx2));
  }
}
