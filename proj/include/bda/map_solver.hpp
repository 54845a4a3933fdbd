/*
 * (C) Copyright 2026 The bda authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bda/dynamics.hpp"
#include "bda/init_est.hpp"
#include "bda/observation.hpp"

namespace bda {

/// System, observation model and data. The prior is uniform on the trapping ball.
struct SmoothingProblem {
  BilinearSystem sys;
  ObservationSetup setup;
  ObservationRecord record;
  IntegratorOptions integrator{};

  /// 1/σ_Z², or 1 when σ_Z = 0 (the minimizer does not depend on the scale).
  double data_weight() const;
  void validate() const;
};

enum class GradientMode { Adjoint, FiniteDifference };
enum class HessianMode { Auto, DenseFD, MatrixFree };

std::string_view to_string(HessianMode mode);
HessianMode resolve_hessian_mode(HessianMode mode, int d);

/// Observed residuals Φ_{t_j}(v) - Y_j for j = 0..k, plus the trajectory they came from.
struct Residuals {
  std::vector<Vector> r;
  double misfit = 0.0;  // ½ w Σ ‖r_j‖²
};

Residuals residuals(const SmoothingProblem & p, const Trajectory & traj);

/// g^sm(v) = (1/(2σ_Z²)) Σ ‖Y_j - Φ_{t_j}(v)‖²; +inf outside the ball.
double objective(const SmoothingProblem & p, const Vector & v);
/// -g^sm(v) (log of the uniform prior dropped); -inf outside the ball.
double log_posterior(const SmoothingProblem & p, const Vector & v);

struct GradientResult {
  Vector grad;
  double objective = 0.0;
  /// Set when ‖v‖ > R - 1e-9; the ball constraint may be active.
  bool near_boundary = false;
};

GradientResult gradient(const SmoothingProblem & p, const Vector & v,
                        GradientMode mode = GradientMode::Adjoint);

/// Full Hessian by central differences of the adjoint gradient, symmetrized.
Matrix hessian_dense(const SmoothingProblem & p, const Vector & v);

/// Hessian-vector product. DenseFD forms the full matrix; MatrixFree uses the
/// Gauss-Newton product plus a differenced curvature term.
Vector hessian_apply(const SmoothingProblem & p, const Vector & v, const Vector & w,
                     HessianMode mode);

/// Matrix-free Hessian operator at a fixed point, reusing the forward sweep.
class HessianOperator {
 public:
  HessianOperator(const SmoothingProblem & p, const Vector & v);

  Vector apply(const Vector & w) const;
  /// Gauss-Newton part only.
  Vector apply_gauss_newton(const Vector & w) const;
  /// Positive diagonal for Jacobi preconditioning.
  Vector preconditioner_diagonal() const;
  const Vector & gradient() const { return grad_; }
  double objective() const { return misfit_; }

 private:
  const SmoothingProblem * p_;
  Vector v_;
  Trajectory traj_;
  std::vector<Vector> res_;
  Vector grad_;
  double misfit_ = 0.0;
};

struct NewtonOptions {
  double delta_min = 0.0;  // 0 selects 1e-10 R
  int max_iters = 50;
  HessianMode hessian = HessianMode::Auto;
  double cg_tol = 1e-10;
  int cg_max_iters = 500;
};

struct NewtonTrace {
  std::vector<Vector> iterates;
  std::vector<double> step_norms;
  std::vector<double> objective;
  std::vector<double> shifts;  // Levenberg shift used at each step
  std::vector<int> cg_iterations;
  HessianMode hessian_mode = HessianMode::DenseFD;
  bool converged = false;
  bool boundary_warning = false;
  int iterations() const { return static_cast<int>(step_norms.size()); }
};

struct NewtonResult {
  Vector x;
  NewtonTrace trace;
};

NewtonResult newton_solve(const SmoothingProblem & p, const Vector & x0,
                          const NewtonOptions & opt = {});

struct SmoothConfig {
  std::optional<ReconstructionPlan> plan;
  NewtonOptions newton{};
};

struct EstimateReport {
  Vector x0;
  Vector u_map;
  Vector u_filter;
  NewtonTrace trace;
  std::string init_method;
  std::optional<double> rmse_x0;
  std::optional<double> rmse_map;
};

/// Initial estimate followed by Newton's method on the smoothing objective.
EstimateReport smooth(const SmoothingProblem & p, const SmoothConfig & cfg = {});

/// ‖a - b‖ / √d
double rmse(const Vector & a, const Vector & b);

struct FilterOutput {
  std::vector<Vector> estimates;  // one per observation index
  std::vector<bool> refreshed;
  std::vector<bool> failed;
};

/// Online estimates of u(t_i): zeros until a full window of k+1 observations is
/// available, then every `stride` steps a smoothing solve on Y_{i-k..i} pushed
/// forward to t_i; between solves the last estimate is propagated by the flow.
FilterOutput filter_stream(const BilinearSystem & sys, const ObservationSetup & window_setup,
                           const Matrix & Y, int stride, const SmoothConfig & cfg = {},
                           const IntegratorOptions & opt = {});

}  // namespace bda
