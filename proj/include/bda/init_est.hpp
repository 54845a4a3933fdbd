/*
 * (C) Copyright 2026 The bda authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bda/deriv_est.hpp"
#include "bda/dynamics.hpp"
#include "bda/observation.hpp"

namespace bda {

struct SmoothingProblem;

enum class Scenario { HalfBlocks, First3, Generic };

std::string_view to_string(Scenario s);

struct ReconstructionPlan {
  Scenario scenario = Scenario::Generic;
  int j = 1;                  // highest derivative order used
  std::vector<int> anchors{0};
  std::vector<int> J_caps;    // degree cap per derivative order, size j + 1
  int backward_order = 20;
};

/// Lorenz-96 systems observed by one of the two selection patterns get their
/// closed-form reconstruction; everything else uses least squares.
Scenario detect_scenario(const BilinearSystem & sys, const ObservationOperator & H);

/// Scenario, depth j, degree caps and anchors {0, ⌊k/4⌋, ⌊k/2⌋} restricted to
/// t < 0.9 / C_der.
ReconstructionPlan default_plan(const BilinearSystem & sys, const ObservationSetup & setup);

/// Divisors smaller than this are treated as zero.
double divisor_floor(double R);

/// Full Lorenz-96 state from H u and H D u under the half-block pattern.
Vector reconstruct_halfblocks(const std::vector<Vector> & derivs, double f, double R);

/// Full Lorenz-96 state from H D^m u, m = 0..j, of the first three coordinates.
Vector reconstruct_first3(const std::vector<Vector> & derivs, int d, double f, double R);

/// Derivative depth needed by the first-3 reconstruction.
inline int first3_depth(int d) { return (d - 3 + 2) / 3; }

struct LeastSquaresOptions {
  int starts = 16;
  int max_iters = 200;
  std::uint64_t seed = 0x5eedULL;
};

/// Σ_i ‖H D^i v - x_i‖²
double least_squares_objective(const BilinearSystem & sys, const ObservationOperator & H,
                               const std::vector<Vector> & derivs, const Vector & v);

/// Multi-start Levenberg-Marquardt minimizer of the objective above over the
/// ball; `extra_starts` are tried in addition to points on the sphere of
/// radius R/2.
Vector generic_least_squares_F(const std::vector<Vector> & derivs, const BilinearSystem & sys,
                               const ObservationOperator & H,
                               const std::vector<Vector> & extra_starts = {},
                               const LeastSquaresOptions & opt = {});

/// Estimates of H D^l u(t_first), l = 0..plan.j, from rows first..k of Y.
std::vector<Vector> estimate_observed_derivatives(const SmoothingProblem & p,
                                                  const ReconstructionPlan & plan, int first);

/// Scenario reconstruction from estimated derivatives.
Vector reconstruct(const SmoothingProblem & p, const ReconstructionPlan & plan,
                   const std::vector<Vector> & derivs);

struct AnchorCandidate {
  int anchor = 0;
  bool ok = false;
  Vector point;
  double log_posterior = 0.0;
  std::string failure;
};

struct InitialEstimate {
  Vector x0;
  int anchor = 0;
  std::vector<AnchorCandidate> candidates;
};

/// Reconstruct at every anchor, pull each candidate back to t = 0 and keep the
/// one with the largest smoothing log-density.
InitialEstimate initial_estimate_multianchor(const SmoothingProblem & p,
                                             const ReconstructionPlan & plan);

}  // namespace bda
