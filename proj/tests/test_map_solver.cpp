/*
 * (C) Copyright 2026 The bda authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include <doctest.h>

#include <cmath>

#include "bda/map_solver.hpp"
#include "bda/oracle.hpp"
#include "test_util.hpp"

using namespace bda;
using bda::test::normal_vector;
using bda::test::point_at_radius;

namespace {

// du/dt = 0: Φ_t is the identity, so the posterior is conjugate Gaussian.
BilinearSystem static_system(int d, double R) {
  return BilinearSystem(LinearOperator::diagonal(Vector::Zero(d)), {}, Vector::Zero(d), R);
}

SmoothingProblem d12_problem(double sigma, int k, std::uint64_t seed, double h = 1e-2) {
  const BilinearSystem sys = lorenz96(12, 8.0);
  const ObservationSetup setup{scenario_half_blocks(12), sigma, h, k};
  const Vector u0 = point_at_radius(12, sys.radius(), 0.45, 1000 + seed);
  return {sys, setup, generate(sys, setup, u0, seed)};
}

Vector truth0(const SmoothingProblem & p) { return p.record.truth->row(0).transpose(); }

}  // namespace

TEST_CASE("log-posterior") {
  SUBCASE("hand-computed static model") {
    const BilinearSystem sys = static_system(4, 10.0);
    const ObservationSetup setup{ObservationOperator::identity(4), 0.5, 0.1, 1};
    ObservationRecord rec;
    rec.Y.resize(2, 4);
    rec.Y << 1, 2, 3, 4, 0, -1, 1, 0.5;
    const SmoothingProblem p{sys, setup, rec};
    const Vector v = (Vector(4) << 0.5, 0.5, 0.5, 0.5).finished();
    // (0.25 + 2.25 + 6.25 + 12.25) + (0.25 + 2.25 + 0.25 + 0) = 23.75
    CHECK(log_posterior(p, v) == doctest::Approx(-23.75 / (2 * 0.25)).epsilon(1e-12));
    CHECK(objective(p, v) == doctest::Approx(23.75 / 0.5).epsilon(1e-12));
    CHECK(log_posterior(p, Vector::Constant(4, 6.0)) == -std::numeric_limits<double>::infinity());
    CHECK(objective(p, Vector::Constant(4, 6.0)) == std::numeric_limits<double>::infinity());
  }
  SUBCASE("doubling sigma quarters the data term") {
    SmoothingProblem p = d12_problem(1e-2, 10, 1);
    const Vector v = truth0(p) + 1e-2 * normal_vector(12, 2);
    const double a = objective(p, v);
    p.setup.sigma_z *= 2.0;
    CHECK(objective(p, v) == doctest::Approx(a / 4.0).epsilon(1e-14));
  }
  SUBCASE("noiseless truth is a maximum") {
    const SmoothingProblem p = d12_problem(0.0, 10, 1);
    CHECK(objective(p, truth0(p)) < 1e-20);
    CHECK(gradient(p, truth0(p)).grad.norm() < 1e-9);
    CHECK(p.data_weight() == 1.0);
  }
}

TEST_CASE("gradient") {
  SUBCASE("adjoint and finite-difference modes agree") {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const SmoothingProblem p = d12_problem(1e-2, 8, seed);
      const Vector v = truth0(p) + 0.05 * normal_vector(12, seed + 7);
      const Vector a = gradient(p, v, GradientMode::Adjoint).grad;
      const Vector f = gradient(p, v, GradientMode::FiniteDifference).grad;
      worst = std::max(worst, (a - f).norm() / a.norm());
    }
    CHECK(worst <= 1e-6);
  }
  SUBCASE("directional differences converge at second order") {
    const SmoothingProblem p = d12_problem(1e-2, 10, 3);
    const Vector v = truth0(p) + 0.05 * normal_vector(12, 4);
    const Vector w = normal_vector(12, 5).normalized();
    const double exact = gradient(p, v).grad.dot(w);
    double prev = 0.0;
    for (double eps : {1e-2, 5e-3}) {
      const double fd = (objective(p, v + eps * w) - objective(p, v - eps * w)) / (2 * eps);
      const double err = std::abs(fd - exact);
      if (prev > 0.0) CHECK(err < prev / 3.0);
      prev = err;
    }
    CHECK(prev <= 1e-5 * std::abs(exact) + 1e-6);
  }
  SUBCASE("boundary flag") {
    const SmoothingProblem p = d12_problem(1e-2, 5, 1);
    const Vector v = point_at_radius(12, p.sys.radius(), 1.0, 3);
    CHECK(gradient(p, v).near_boundary);
    CHECK_FALSE(gradient(p, truth0(p)).near_boundary);
  }
}

TEST_CASE("Hessian") {
  SUBCASE("dense Hessian is symmetric") {
    const SmoothingProblem p = d12_problem(1e-2, 10, 2);
    const Vector v = truth0(p) + 0.02 * normal_vector(12, 3);
    const Matrix Hm = hessian_dense(p, v);
    CHECK((Hm - Hm.transpose()).norm() <= 1e-10 * Hm.norm());
    const Vector w = normal_vector(12, 4);
    const Vector z = normal_vector(12, 5);
    const double a = hessian_apply(p, v, w, HessianMode::DenseFD).dot(z);
    const double b = w.dot(hessian_apply(p, v, z, HessianMode::DenseFD));
    CHECK(std::abs(a - b) <= 1e-8 * std::abs(a));
  }
  SUBCASE("modes agree at the noiseless truth") {
    const SmoothingProblem p = d12_problem(0.0, 10, 2);
    for (std::uint64_t s = 0; s < 5; ++s) {
      const Vector w = normal_vector(12, 10 + s);
      const Vector a = hessian_apply(p, truth0(p), w, HessianMode::DenseFD);
      const Vector b = hessian_apply(p, truth0(p), w, HessianMode::MatrixFree);
      CHECK((a - b).norm() <= 1e-6 * a.norm());
    }
  }
  SUBCASE("matrix-free product tracks the dense one away from the truth") {
    const SmoothingProblem p = d12_problem(1e-2, 10, 4);
    const Vector v = truth0(p) + 0.01 * normal_vector(12, 6);
    const Vector w = normal_vector(12, 7);
    const Vector a = hessian_apply(p, v, w, HessianMode::DenseFD);
    const Vector b = HessianOperator(p, v).apply(w);
    CHECK((a - b).norm() <= 1e-4 * a.norm());
    CHECK((HessianOperator(p, v).preconditioner_diagonal().array() > 0.0).all());
  }
  SUBCASE("linear model Hessian does not depend on the point") {
    const BilinearSystem sys = linear_system(3, 10.0);
    const ObservationSetup setup{ObservationOperator::identity(3), 0.1, 0.05, 4};
    const SmoothingProblem p{sys, setup, generate(sys, setup, Vector::Constant(3, 1.0), 1)};
    const Matrix a = hessian_dense(p, Vector::Zero(3));
    const Matrix b = hessian_dense(p, Vector::Constant(3, 2.0));
    CHECK((a - b).norm() <= 1e-6 * a.norm());
  }
  SUBCASE("auto mode switches at d = 64") {
    CHECK(resolve_hessian_mode(HessianMode::Auto, 64) == HessianMode::DenseFD);
    CHECK(resolve_hessian_mode(HessianMode::Auto, 65) == HessianMode::MatrixFree);
    CHECK(resolve_hessian_mode(HessianMode::DenseFD, 1000) == HessianMode::DenseFD);
  }
}

TEST_CASE("Newton solver") {
  SUBCASE("one step solves a quadratic") {
    const BilinearSystem sys = linear_system(3, 10.0);
    const ObservationSetup setup{ObservationOperator::identity(3), 0.1, 0.05, 4};
    const SmoothingProblem p{sys, setup, generate(sys, setup, Vector::Constant(3, 1.0), 1)};
    const NewtonResult r = newton_solve(p, Vector::Zero(3));
    CHECK(r.trace.converged);
    REQUIRE(r.trace.iterates.size() >= 2);
    CHECK((r.trace.iterates[1] - r.x).norm() <= 1e-9);
    CHECK(r.trace.iterations() <= 2);
  }
  SUBCASE("d = 12 half-block setting converges quadratically") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const SmoothingProblem p = d12_problem(1e-3, 50, seed);
      const EstimateReport rep = smooth(p);
      const auto & tr = rep.trace;
      CHECK(tr.converged);
      // Typically 3-8 steps; the acceptance run checks the 10-step rate over 20 seeds.
      MESSAGE("seed " << seed << ": " << tr.iterations() << " Newton steps");
      CHECK(tr.iterations() <= 20);
      CHECK(tr.step_norms.back() < 1e-10 * p.sys.radius());
      CHECK(tr.step_norms.size() + 1 == tr.iterates.size());
      CHECK(objective(p, rep.u_map) <= objective(p, truth0(p)));
      const int n = static_cast<int>(tr.iterates.size());
      if (n >= 4) {
        const double e1 = (tr.iterates[n - 4] - rep.u_map).norm();
        const double e2 = (tr.iterates[n - 3] - rep.u_map).norm();
        if (e1 < 1e-2 && e2 > 1e-12) CHECK(std::log(e2) <= 2.0 * std::log(e1) + std::log(1e3));
      }
      for (std::size_t i = 0; i + 1 < tr.objective.size(); ++i) {
        if (tr.shifts[i] == 0.0) CHECK(tr.objective[i + 1] <= tr.objective[i] * (1 + 1e-12));
      }
    }
  }
  SUBCASE("dense and matrix-free maps agree") {
    const SmoothingProblem p = d12_problem(1e-3, 30, 5);
    SmoothConfig dense;
    dense.newton.hessian = HessianMode::DenseFD;
    SmoothConfig mf;
    mf.newton.hessian = HessianMode::MatrixFree;
    const EstimateReport a = smooth(p, dense);
    const EstimateReport b = smooth(p, mf);
    CHECK(a.trace.hessian_mode == HessianMode::DenseFD);
    CHECK(b.trace.hessian_mode == HessianMode::MatrixFree);
    CHECK((a.u_map - b.u_map).norm() <= 1e-6);
  }
  SUBCASE("iteration cap gives a flagged trace") {
    const SmoothingProblem p = d12_problem(1e-3, 30, 6);
    NewtonOptions opt;
    opt.max_iters = 1;
    const NewtonResult r = newton_solve(p, truth0(p) + 0.3 * normal_vector(12, 9));
    CHECK(r.trace.iterations() >= 1);
    const NewtonResult capped = newton_solve(p, truth0(p) + 0.3 * normal_vector(12, 9), opt);
    CHECK_FALSE(capped.trace.converged);
    CHECK(capped.trace.iterations() == 1);
  }
}

TEST_CASE("smoothing driver") {
  SUBCASE("noiseless data recover the truth") {
    const SmoothingProblem p = d12_problem(0.0, 20, 1);
    const EstimateReport rep = smooth(p);
    CHECK(rep.trace.converged);
    CHECK((rep.u_map - truth0(p)).norm() < 1e-8);
  }
  SUBCASE("filter estimate is the pushed-forward MAP") {
    const SmoothingProblem p = d12_problem(1e-3, 20, 2);
    const EstimateReport rep = smooth(p);
    CHECK((rep.u_filter - flow_intervals(p.sys, rep.u_map, p.setup.h, p.setup.k)).norm() == 0.0);
    REQUIRE(rep.rmse_map.has_value());
    CHECK(*rep.rmse_map == doctest::Approx(rmse(rep.u_map, truth0(p))));
    CHECK(*rep.rmse_map * 10.0 <= *rep.rmse_x0);
  }
}

TEST_CASE("filtering driver") {
  const BilinearSystem sys = lorenz96(12, 8.0);
  const Vector u0 = point_at_radius(12, sys.radius(), 0.45, 77);
  const int k = 10;
  const int extra = 8;

  SUBCASE("noiseless stream tracks the truth") {
    // At h = 1e-2 the degree-one initial estimate can start Newton in another
    // basin; a finer step keeps every window in the right one.
    const ObservationSetup full{scenario_half_blocks(12), 0.0, 1e-3, k + extra};
    const auto rec = generate(sys, full, u0, 0);
    const ObservationSetup window{scenario_half_blocks(12), 0.0, 1e-3, k};
    const FilterOutput out = filter_stream(sys, window, rec.Y, 1);
    REQUIRE(out.estimates.size() == static_cast<std::size_t>(k + extra + 1));
    for (int i = 0; i < k; ++i) {
      CHECK(out.estimates[i].norm() == 0.0);
      CHECK_FALSE(out.refreshed[i]);
    }
    for (int i = k; i <= k + extra; ++i) {
      CHECK(out.refreshed[i]);
      CHECK_FALSE(out.failed[i]);
      CHECK((out.estimates[i] - rec.truth->row(i).transpose()).norm() < 1e-7);
    }
  }
  SUBCASE("a longer stride matches stride one at refresh steps") {
    const ObservationSetup full{scenario_half_blocks(12), 1e-3, 1e-2, k + extra};
    const auto rec = generate(sys, full, u0, 3);
    const ObservationSetup window{scenario_half_blocks(12), 1e-3, 1e-2, k};
    const FilterOutput one = filter_stream(sys, window, rec.Y, 1);
    const FilterOutput five = filter_stream(sys, window, rec.Y, 5);
    int refreshes = 0;
    for (int i = k; i <= k + extra; ++i) {
      if (!five.refreshed[i]) continue;
      ++refreshes;
      CHECK((five.estimates[i] - one.estimates[i]).norm() == 0.0);
    }
    CHECK(refreshes == 2);
    CHECK_FALSE(five.refreshed[k + 1]);
    CHECK((five.estimates[k + 1] - flow(sys, five.estimates[k], 1e-2)).norm() < 1e-12);
  }
}
