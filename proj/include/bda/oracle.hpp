/*
 * (C) Copyright 2026 The bda authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "bda/gaussian_approx.hpp"

namespace bda {

/// Tensor grid centred on `center`, covering ±width_std posterior standard
/// deviations along each axis (taken from a precision matrix on the σ_Z² scale).
struct GridSpec {
  int points_per_axis = 161;
  double width_std = 8.0;
  /// Mass allowed in the outermost cells before the grid counts as too small.
  double boundary_tolerance = 1e-6;
};

/// Smoothing posterior tabulated on a grid (d ≤ 4), trapezoid quadrature.
struct GridPosterior {
  std::vector<Vector> axes;
  std::vector<double> weight;   // trapezoid weight × cell volume per node
  std::vector<double> density;  // normalized density per node
  double log_normalizer = 0.0;  // log ∫ exp(-g^sm)
  Vector mean;
  Matrix covariance;
  Vector argmax;
  double boundary_mass = 0.0;

  int dim() const { return static_cast<int>(axes.size()); }
  std::size_t size() const { return density.size(); }
  Vector node(std::size_t flat) const;
  /// Grid spacing along axis a.
  double spacing(int a) const;
};

GridPosterior grid_posterior(const SmoothingProblem & p, const Vector & center,
                             const Matrix & precision, const GridSpec & spec = {});

/// Axes spanning center ± width_std standard deviations of N(0, σ_Z² P⁻¹).
std::vector<Vector> grid_axes(const Vector & center, const Matrix & precision, double sigma_z,
                              const GridSpec & spec);

/// Tabulates and normalizes exp(log_density) on the tensor grid.
GridPosterior tabulate(const std::vector<Vector> & axes,
                       const std::function<double(const Vector &)> & log_density,
                       double boundary_tolerance);

/// Half the L1 distance between the grid density and q, plus half of q's mass
/// that falls outside the grid.
double tv_distance(const GridPosterior & p, const GaussianApprox & q);

/// Monte-Carlo value of the mixture coupling (1 - γ) E‖X̂ - Ŷ‖, an upper bound
/// on the first Wasserstein distance between the grid posterior and q.
double w1_distance_mc(const GridPosterior & p, const GaussianApprox & q, int n_samples,
                      std::uint64_t seed = 1);

/// Self-normalized importance-sampling estimate of the smoothing posterior
/// moments with a Gaussian proposal; a cross-check for the grid at d = 3, 4.
struct ImportanceEstimate {
  Vector mean;
  Matrix covariance;
  double effective_sample_size = 0.0;
  int samples = 0;
};

ImportanceEstimate importance_posterior(const SmoothingProblem & p, const GaussianApprox & proposal,
                                        int n_samples, std::uint64_t seed = 1);

struct MseRatio {
  double mse_mean = 0.0;
  double mse_map = 0.0;
  double ratio = 0.0;          // mse_map / mse_mean
  double ratio_stderr = 0.0;
  double diff_stderr = 0.0;    // stderr of mse_map - mse_mean
  int trials = 0;
};

/// Monte-Carlo comparison of the posterior mean and the MAP as estimators of
/// the fixed truth u0, one synthetic record per seed.
MseRatio mse_ratio(const BilinearSystem & sys, const ObservationSetup & setup, const Vector & u0,
                   const std::vector<std::uint64_t> & seeds, const GridSpec & spec = {},
                   const IntegratorOptions & opt = {});

/// Two-dimensional energy-conserving test system:
///   du0 = -u0 - u0 u1 + f0,  du1 = -u1 + u0² + f1,  R = ‖f‖.
BilinearSystem toy_system(double f0, double f1);

/// du/dt = -u in d dimensions (B = 0, f = 0): the conjugate Gaussian case.
BilinearSystem linear_system(int d, double R);

}  // namespace bda
