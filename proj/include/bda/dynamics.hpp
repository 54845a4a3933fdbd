/*
 * (C) Copyright 2026 The bda authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "bda/common.hpp"
#include "bda/kernels.hpp"

namespace bda {

/// B(u,v)[out] += coeff * u[i] * v[j].
struct SparseEntry {
  int i;
  int j;
  int out;
  double coeff;
};

/// Linear part A, stored either as a diagonal or as a dense matrix.
class LinearOperator {
 public:
  static LinearOperator identity(int d);
  static LinearOperator diagonal(Vector diag);
  static LinearOperator dense(Matrix m);

  int dim() const { return dim_; }
  bool is_diagonal() const { return diagonal_; }
  const Vector & diag() const { return diag_; }
  const Matrix & matrix() const { return dense_; }

  // out += scale * A x  (or A' x)
  void apply_add(const Vector & x, double scale, Vector & out) const;
  void apply_transpose_add(const Vector & x, double scale, Vector & out) const;
  /// Spectral norm (exact for diagonal, SVD for dense).
  double norm() const;

 private:
  int dim_ = 0;
  bool diagonal_ = true;
  Vector diag_;
  Matrix dense_;
};

struct SystemConstants {
  double C0;
  double C_der;
  double G;
  double v_max;
  double a_max;
  /// C_J^(k) = 2^k (C_der + ‖B‖), the bound on the k-th derivative of the flow map.
  double C_J(int k) const { return std::ldexp(C_der + norm_B, k); }
  double norm_B;
};

/// du/dt = -A u - B(u,u) + f, with every trajectory absorbed by the ball of radius R.
/// Immutable after construction.
class BilinearSystem {
 public:
  /// `norm_B` overrides the Frobenius upper bound used for ‖B‖ when the caller
  /// knows a sharper value.
  BilinearSystem(LinearOperator A, std::vector<SparseEntry> B, Vector f, double R,
                 std::optional<double> norm_B = std::nullopt);

  /// Circulant variant: B given by a stencil shared by every output row.
  static BilinearSystem circulant(LinearOperator A, std::vector<kernels::StencilTerm> stencil,
                                  Vector f, double R, std::optional<double> norm_B = std::nullopt);

  int dim() const { return dim_; }
  const LinearOperator & A() const { return A_; }
  const std::vector<SparseEntry> & B_entries() const { return entries_; }
  const Vector & forcing() const { return f_; }
  double radius() const { return R_; }
  bool symmetric_B() const { return symmetric_; }
  bool has_stencil() const { return !stencil_.empty(); }
  const std::vector<kernels::StencilTerm> & stencil() const { return stencil_; }
  /// Forcing constant when the system was built by lorenz96().
  std::optional<double> lorenz96_forcing() const { return l96_forcing_; }

  double norm_A() const { return norm_A_; }
  double norm_B() const { return norm_B_; }
  double norm_f() const { return norm_f_; }
  const SystemConstants & constants() const { return constants_; }

  // out += scale * B(x, y)
  void bilinear_add(const Vector & x, const Vector & y, double scale, Vector & out) const;
  // out += scale * grad_x <g, B(x, y)>
  void bilinear_grad_x_add(const Vector & g, const Vector & y, double scale, Vector & out) const;
  // out += scale * grad_y <g, B(x, y)>
  void bilinear_grad_y_add(const Vector & g, const Vector & x, double scale, Vector & out) const;

  Vector B(const Vector & x, const Vector & y) const;
  /// Dv = -A v - B(v, v) + f
  Vector rhs(const Vector & v) const;

  /// Throws OutOfBall if ‖v‖ exceeds R beyond the projection slack.
  void require_in_ball(const Vector & v, const char * what) const;

 private:
  void finish(std::optional<double> norm_B);

  int dim_ = 0;
  LinearOperator A_;
  std::vector<SparseEntry> entries_;
  std::vector<kernels::StencilTerm> stencil_;
  std::vector<kernels::StencilTerm> grad_x_stencil_;
  std::vector<kernels::StencilTerm> grad_y_stencil_;
  Vector f_;
  double R_ = 0.0;
  bool symmetric_ = false;
  double norm_A_ = 0.0;
  double norm_B_ = 0.0;
  double norm_f_ = 0.0;
  SystemConstants constants_{};
  std::optional<double> l96_forcing_;

  friend BilinearSystem lorenz96(int d, double f);
};

/// Lorenz-96 with A = I, forcing f·1 and R = f√d; B is the symmetric form of
/// -(u_{i-1}u_{i+1} - u_{i-1}u_{i-2}).
BilinearSystem lorenz96(int d, double f);

/// ‖u‖ ≤ R ball projection.
Vector project_ball(const Vector & v, double R);

/// Taylor coefficients c_i = D^i v / i!, i = 0..order, written into `c`.
void taylor_coefficients(const BilinearSystem & sys, const Vector & v, int order,
                         std::vector<Vector> & c);

/// D^0 v, ..., D^{i_max} v.
std::vector<Vector> derivative_series(const BilinearSystem & sys, const Vector & v, int i_max);

/// Σ_{i ≤ i_max} t^i D^i v / i!
Vector taylor_step(const BilinearSystem & sys, const Vector & v, double t, int i_max);

struct IntegratorOptions {
  /// Step size; 0 selects min(h, 0.25 / C_der) for an interval of length h.
  double step = 0.0;
  int order = 12;
};

/// Effective step for an interval of length `interval`.
double resolve_step(const BilinearSystem & sys, double interval, const IntegratorOptions & opt);

/// Full steps of size `step` followed by the remainder.
std::vector<double> step_schedule(double t, double step);

/// Ψ_t(v): projected Taylor steps.
Vector flow(const BilinearSystem & sys, const Vector & v, double t, double step, int i_max);
Vector flow(const BilinearSystem & sys, const Vector & v, double t,
            const IntegratorOptions & opt = {});

/// Ψ_{kh}(v) as k consecutive interval flows, the schedule used for observations.
Vector flow_intervals(const BilinearSystem & sys, const Vector & v, double h, int k,
                      const IntegratorOptions & opt = {});

/// Ψ_{-t}(v) as a single truncated Taylor series.
Vector flow_backward(const BilinearSystem & sys, const Vector & v, double t, int i_max);

/// JΨ_t(v) w
Vector tangent_flow(const BilinearSystem & sys, const Vector & v, const Vector & w, double t,
                    double step, int i_max);
/// (JΨ_t(v))' z
Vector adjoint_flow(const BilinearSystem & sys, const Vector & v, const Vector & z, double t,
                    double step, int i_max);

/// Forward trajectory over k intervals of length h with every integrator step
/// recorded, so that tangent and adjoint sweeps reuse the stored coefficients.
class Trajectory {
 public:
  Trajectory(const BilinearSystem & sys, const Vector & v, double h, int k,
             const IntegratorOptions & opt = {});

  int intervals() const { return k_; }
  double h() const { return h_; }
  /// Ψ_{jh}(v)
  const Vector & state(int j) const { return states_[static_cast<std::size_t>(j)]; }
  const std::vector<Vector> & states() const { return states_; }

  /// JΨ_{jh}(v) w for j = 0..k.
  std::vector<Vector> tangent(const Vector & w) const;
  /// Σ_j (JΨ_{jh}(v))' r_j  in a single reverse sweep.
  Vector adjoint(const std::vector<Vector> & r) const;

 private:
  struct Step {
    double t;
    std::vector<Vector> c;  // Taylor coefficients at the step start
    Vector y;               // pre-projection result
    bool projected;
  };

  const BilinearSystem * sys_;
  double h_;
  int k_;
  std::vector<std::vector<Step>> steps_;  // per interval
  std::vector<Vector> states_;
};

}  // namespace bda
