/*
 * (C) Copyright 2026 The bda authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include <doctest.h>

#include <sstream>

#include "bda/observation.hpp"
#include "test_util.hpp"

using namespace bda;
using bda::test::normal_vector;
using bda::test::point_at_radius;

TEST_CASE("half-block selection") {
  const auto H = scenario_half_blocks(12);
  CHECK(H.indices() == std::vector<int>{0, 1, 2, 6, 7, 8});
  CHECK(H.obs_dim() == 6);
  CHECK(scenario_half_blocks(6).indices() == std::vector<int>{0, 1, 2});
  Vector u(12);
  for (int i = 0; i < 12; ++i) u[i] = i + 1;
  CHECK(H.apply(u) == (Vector(6) << 1, 2, 3, 7, 8, 9).finished());
  CHECK(H.matrix().rowwise().norm().isApprox(Vector::Ones(6)));
  try {
    (void)scenario_half_blocks(10);
    FAIL("expected an error");
  } catch (const Error & e) {
    CHECK(e.code() == ErrorCode::InvalidDimension);
  }
}

TEST_CASE("first-three selection") {
  CHECK(scenario_first3(60).indices() == std::vector<int>{0, 1, 2});
  CHECK(scenario_first3(4).indices() == std::vector<int>{0, 1, 2});
  Vector u(8);
  for (int i = 0; i < 8; ++i) u[i] = i + 5;
  CHECK(scenario_first3(8).apply(u) == (Vector(3) << 5, 6, 7).finished());
}

TEST_CASE("operator transpose and dense form agree with the selection") {
  const auto H = scenario_half_blocks(12);
  const auto D = ObservationOperator::dense(H.matrix());
  const Vector v = normal_vector(12, 1);
  const Vector z = normal_vector(6, 2);
  CHECK((H.apply(v) - D.apply(v)).norm() == 0.0);
  CHECK((H.apply_transpose(z) - D.apply_transpose(z)).norm() == 0.0);
  CHECK(H.apply(v).dot(z) == doctest::Approx(v.dot(H.apply_transpose(z))));
  CHECK(H.norm() == doctest::Approx(1.0));
}

TEST_CASE("synthetic data") {
  const BilinearSystem sys = lorenz96(12, 8.0);
  const Vector u0 = point_at_radius(12, sys.radius(), 0.5, 1);

  SUBCASE("noiseless data equal the observed flow") {
    const ObservationSetup setup{scenario_half_blocks(12), 0.0, 0.01, 10};
    const auto rec = generate(sys, setup, u0, 3);
    REQUIRE(rec.rows() == 11);
    REQUIRE(rec.truth.has_value());
    for (int j = 0; j <= 10; ++j) {
      CHECK((rec.y(j) - observed_flow(sys, setup, u0, setup.time(j))).norm() < 1e-11);
      CHECK((rec.truth->row(j).transpose() - flow_intervals(sys, u0, 0.01, j)).norm() == 0.0);
    }
  }
  SUBCASE("same seed gives the same record, another seed does not") {
    const ObservationSetup setup{scenario_half_blocks(12), 1e-2, 0.01, 5};
    const auto a = generate(sys, setup, u0, 7);
    const auto b = generate(sys, setup, u0, 7);
    const auto c = generate(sys, setup, u0, 8);
    CHECK(a.Y == b.Y);
    CHECK(a.Y != c.Y);
  }
  SUBCASE("noise variance matches sigma_z^2") {
    const ObservationSetup setup{scenario_half_blocks(12), 0.3, 0.01, 0};
    const Vector hu = setup.H.apply(u0);
    double sum = 0.0;
    double sq = 0.0;
    const int n = 100000;
    for (int s = 0; s < n; ++s) {
      const double z = generate(sys, setup, u0, static_cast<std::uint64_t>(s)).Y(0, 0) - hu[0];
      sum += z;
      sq += z * z;
    }
    const double var = sq / n - (sum / n) * (sum / n);
    CHECK(std::abs(var / 0.09 - 1.0) < 0.05);
    CHECK(std::abs(sum / n) < 5 * 0.3 / std::sqrt(n));
  }
  SUBCASE("points outside the ball are rejected") {
    const ObservationSetup setup{scenario_half_blocks(12), 0.0, 0.01, 3};
    CHECK_THROWS_AS(generate(sys, setup, point_at_radius(12, sys.radius(), 1.2, 1), 0), Error);
  }
}

TEST_CASE("observation times are j*h exactly") {
  const ObservationSetup setup{scenario_half_blocks(12), 0.0, 0.1, 1000};
  for (int j = 0; j <= 1000; ++j) CHECK(setup.time(j) == j * 0.1);
  CHECK(setup.T() == 1000 * 0.1);
}

TEST_CASE("observed flow and its linearizations") {
  const BilinearSystem sys = lorenz96(12, 8.0);
  const ObservationSetup setup{scenario_half_blocks(12), 0.0, 0.01, 5};
  const Vector v = point_at_radius(12, sys.radius(), 0.5, 2);
  const Vector w = normal_vector(12, 3);
  const Vector z = normal_vector(6, 4);
  CHECK(observed_flow(sys, setup, v, 0.0) == setup.H.apply(v));
  const ObservationSetup full{ObservationOperator::identity(12), 0.0, 0.01, 5};
  CHECK((observed_flow(sys, full, v, 0.04) - flow(sys, v, 0.04)).norm() < 1e-12);
  const double lhs = observed_tangent(sys, setup, v, w, 0.04).dot(z);
  const double rhs = w.dot(observed_adjoint(sys, setup, v, z, 0.04));
  CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));
}

TEST_CASE("CSV round trip keeps every bit") {
  Matrix Y(3, 2);
  Y << 1.0 / 3.0, -2e-300, 7.0, 0.1, 1e10, -0.0;
  std::stringstream ss;
  write_observations_csv(ss, Y, 0.01);
  const std::string text = ss.str();
  CHECK(text.rfind("t,y_1,y_2\n", 0) == 0);
  std::stringstream in(text);
  const Matrix back = read_observations_csv(in);
  CHECK(back == Y);

  std::stringstream bad("t,y_1\n0,abc\n");
  CHECK_THROWS_AS(read_observations_csv(bad), Error);
}
