/*
 * (C) Copyright 2026 The bda authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "bda/gaussian_approx.hpp"

#include <cmath>
#include <numbers>

namespace bda {

std::string_view to_string(GaussianKind k) {
  switch (k) {
    case GaussianKind::SmootherTheory: return "smoother-theory";
    case GaussianKind::SmootherLaplace: return "smoother-laplace";
    case GaussianKind::FilterPushforward: return "filter-pushforward";
  }
  return "unknown";
}

double GaussianApprox::log_density(const Vector & v) const {
  const double d = static_cast<double>(center.size());
  const Eigen::LLT<Matrix> llt(precision);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::NotPositiveDefinite, "precision matrix is not positive definite");
  }
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const Vector e = v - center;
  const double q = e.dot(precision * e);
  return -0.5 * d * std::log(2.0 * std::numbers::pi) - d * std::log(sigma_z) + 0.5 * log_det -
         q / (2.0 * sigma_z * sigma_z);
}

Matrix GaussianApprox::covariance() const {
  const Eigen::LLT<Matrix> llt(precision);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::NotPositiveDefinite, "precision matrix is not positive definite");
  }
  const Matrix I = Matrix::Identity(precision.rows(), precision.cols());
  return sigma_z * sigma_z * llt.solve(I);
}

namespace {

void check_cap(int d) {
  if (d > kDenseCap) {
    throw Error(ErrorCode::MatrixFreeUnsupported,
                "dense Gaussian approximation is limited to d <= 256");
  }
}

}  // namespace

Matrix flow_jacobian(const BilinearSystem & sys, const Vector & v, double h, int k,
                     const IntegratorOptions & opt) {
  const int d = sys.dim();
  check_cap(d);
  const Trajectory traj(sys, v, h, k, opt);
  Matrix J(d, d);
  for (int i = 0; i < d; ++i) J.col(i) = traj.tangent(Vector::Unit(d, i)).back();
  return J;
}

AkBk assemble_AkBk(const SmoothingProblem & p, const Vector & u_ref) {
  p.validate();
  const int d = p.sys.dim();
  check_cap(d);
  p.sys.require_in_ball(u_ref, "assemble_AkBk");
  const Trajectory traj(p.sys, u_ref, p.setup.h, p.setup.k, p.integrator);
  const auto & H = p.setup.H;

  // Z_i = Φ_{t_i}(u_ref) - Y_i, pulled back as H' Z_i.
  std::vector<Vector> hz;
  for (int j = 0; j <= p.setup.k; ++j) {
    hz.push_back(H.apply_transpose(H.apply(traj.state(j)) - p.record.y(j)));
  }

  AkBk out;
  out.B = traj.adjoint(hz);
  out.A = Matrix::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    const std::vector<Vector> t = traj.tangent(Vector::Unit(d, i));
    std::vector<Vector> q;
    q.reserve(t.size());
    for (const auto & tj : t) q.push_back(H.apply_transpose(H.apply(tj)));
    out.A.col(i) = traj.adjoint(q);
  }

  // Second-order term: Σ J²Φ_i[·,·,Z_i], the Jacobian of v ↦ Σ JΦ_i(v)' Z_i.
  const double eps = 1e-5 * std::max(1.0, u_ref.norm());
  Matrix second(d, d);
  for (int i = 0; i < d; ++i) {
    Vector a = u_ref;
    Vector b = u_ref;
    a[i] += eps;
    b[i] -= eps;
    const double R = p.sys.radius();
    const bool a_in = a.norm() <= R;
    const bool b_in = b.norm() <= R;
    if (a_in && b_in) {
      const Trajectory ta(p.sys, a, p.setup.h, p.setup.k, p.integrator);
      const Trajectory tb(p.sys, b, p.setup.h, p.setup.k, p.integrator);
      second.col(i) = (ta.adjoint(hz) - tb.adjoint(hz)) / (2.0 * eps);
    } else {
      const Vector & x = a_in ? a : b;
      const double sgn = a_in ? 1.0 : -1.0;
      const Trajectory tx(p.sys, x, p.setup.h, p.setup.k, p.integrator);
      second.col(i) = sgn * (tx.adjoint(hz) - out.B) / eps;
    }
  }
  out.A += 0.5 * (second + second.transpose());
  out.A = 0.5 * (out.A + out.A.transpose());
  return out;
}

GaussianApprox smoother_gaussian_theory(const SmoothingProblem & p, const Vector & u_ref,
                                        bool strict) {
  const AkBk ab = assemble_AkBk(p, u_ref);
  GaussianApprox g;
  g.kind = GaussianKind::SmootherTheory;
  g.sigma_z = p.setup.sigma_z;
  const Eigen::LLT<Matrix> llt(ab.A);
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(ab.A, Eigen::EigenvaluesOnly);
  if (llt.info() != Eigen::Success || !(eig.eigenvalues()(0) > 0.0)) {
    if (strict) throw Error(ErrorCode::NotPositiveDefinite, "A_k is not positive definite");
    const int d = p.sys.dim();
    g.center = Vector::Zero(d);
    g.precision = g.sigma_z * g.sigma_z * Matrix::Identity(d, d);
    g.fallback = true;
    return g;
  }
  g.center = u_ref - llt.solve(ab.B);
  g.precision = ab.A;
  return g;
}

GaussianApprox smoother_gaussian_laplace(const SmoothingProblem & p, const Vector & u_map) {
  check_cap(p.sys.dim());
  GaussianApprox g;
  g.kind = GaussianKind::SmootherLaplace;
  g.sigma_z = p.setup.sigma_z;
  g.center = u_map;
  g.precision = hessian_dense(p, u_map) / p.data_weight();
  return g;
}

GaussianApprox filter_gaussian(const GaussianApprox & sm, const BilinearSystem & sys, double h,
                               int k, const IntegratorOptions & opt) {
  const int d = sys.dim();
  check_cap(d);
  const Vector c = project_ball(sm.center, sys.radius());
  const Matrix J = flow_jacobian(sys, c, h, k, opt);
  const Eigen::PartialPivLU<Matrix> lu(J);
  const double det = lu.determinant();
  if (!(std::abs(det) > 0.0) || !std::isfinite(det)) {
    throw Error(ErrorCode::Numerical, "flow Jacobian is singular");
  }
  const Matrix Jinv = lu.inverse();
  GaussianApprox out;
  out.kind = GaussianKind::FilterPushforward;
  out.sigma_z = sm.sigma_z;
  out.fallback = sm.fallback;
  out.center = flow_intervals(sys, c, h, k, opt);
  out.precision = Jinv.transpose() * sm.precision * Jinv;
  out.precision = 0.5 * (out.precision + out.precision.transpose());
  out.log_det_jacobian = std::log(std::abs(det));
  return out;
}

}  // namespace bda
