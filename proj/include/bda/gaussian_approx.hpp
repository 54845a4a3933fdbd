/*
 * (C) Copyright 2026 The bda authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <string_view>

#include "bda/map_solver.hpp"

namespace bda {

enum class GaussianKind { SmootherTheory, SmootherLaplace, FilterPushforward };

std::string_view to_string(GaussianKind k);

/// Density ∝ exp(-(v - center)' P (v - center) / (2 σ_Z²)).
struct GaussianApprox {
  Vector center;
  Matrix precision;
  double sigma_z = 0.0;
  GaussianKind kind = GaussianKind::SmootherTheory;
  /// Set when A_k was not positive definite and the standard normal was used instead.
  bool fallback = false;
  /// log|det JΨ_T| for the pushed-forward filter approximation.
  double log_det_jacobian = 0.0;

  double log_density(const Vector & v) const;
  Matrix covariance() const;
};

inline constexpr int kDenseCap = 256;

struct AkBk {
  Matrix A;
  Vector B;
};

/// A_k = Σ (JΦ_i)'(JΦ_i) + J²Φ_i[·,·,Z_i] and B_k = Σ (JΦ_i)' Z_i with
/// Z_i = Φ_{t_i}(u_ref) - Y_i.
AkBk assemble_AkBk(const SmoothingProblem & p, const Vector & u_ref);

/// Center u_ref - A_k^{-1} B_k with precision A_k. Falls back to the standard
/// normal (flagged) when A_k is not positive definite, unless `strict`.
GaussianApprox smoother_gaussian_theory(const SmoothingProblem & p, const Vector & u_ref,
                                        bool strict = false);

/// Center at the MAP with precision σ_Z² ∇²g^sm(MAP).
GaussianApprox smoother_gaussian_laplace(const SmoothingProblem & p, const Vector & u_map);

/// Push-forward through Ψ_T, T = k h, with the interval schedule of the observations.
GaussianApprox filter_gaussian(const GaussianApprox & sm, const BilinearSystem & sys, double h,
                               int k, const IntegratorOptions & opt = {});

/// JΨ_{kh}(v) as a dense matrix.
Matrix flow_jacobian(const BilinearSystem & sys, const Vector & v, double h, int k,
                     const IntegratorOptions & opt = {});

}  // namespace bda
