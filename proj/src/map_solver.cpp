/*
 * (C) Copyright 2026 The bda authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "bda/map_solver.hpp"

#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <limits>

namespace bda {

double SmoothingProblem::data_weight() const {
  return setup.sigma_z > 0.0 ? 1.0 / (setup.sigma_z * setup.sigma_z) : 1.0;
}

void SmoothingProblem::validate() const {
  setup.validate(sys);
  if (record.rows() != setup.k + 1) {
    throw Error(ErrorCode::InvalidDimension, "record must hold k+1 observations");
  }
  if (record.Y.cols() != setup.H.obs_dim()) {
    throw Error(ErrorCode::InvalidDimension, "observation width does not match H");
  }
}

std::string_view to_string(HessianMode mode) {
  switch (mode) {
    case HessianMode::Auto: return "auto";
    case HessianMode::DenseFD: return "dense";
    case HessianMode::MatrixFree: return "matfree";
  }
  return "unknown";
}

HessianMode resolve_hessian_mode(HessianMode mode, int d) {
  if (mode != HessianMode::Auto) return mode;
  return d <= 64 ? HessianMode::DenseFD : HessianMode::MatrixFree;
}

namespace {

bool outside_ball(const SmoothingProblem & p, const Vector & v) {
  return v.norm() > p.sys.radius() * (1.0 + kBallSlack);
}

Trajectory forward(const SmoothingProblem & p, const Vector & v) {
  return Trajectory(p.sys, v, p.setup.h, p.setup.k, p.integrator);
}

// w H' r_j for every j.
std::vector<Vector> weighted_adjoint_inputs(const SmoothingProblem & p,
                                            const std::vector<Vector> & r) {
  const double w = p.data_weight();
  std::vector<Vector> out;
  out.reserve(r.size());
  for (const auto & rj : r) out.push_back(w * p.setup.H.apply_transpose(rj));
  return out;
}

}  // namespace

Residuals residuals(const SmoothingProblem & p, const Trajectory & traj) {
  Residuals out;
  out.r.reserve(static_cast<std::size_t>(p.setup.k) + 1);
  double s = 0.0;
  for (int j = 0; j <= p.setup.k; ++j) {
    Vector rj = p.setup.H.apply(traj.state(j)) - p.record.y(j);
    s += rj.squaredNorm();
    out.r.push_back(std::move(rj));
  }
  out.misfit = 0.5 * p.data_weight() * s;
  return out;
}

double objective(const SmoothingProblem & p, const Vector & v) {
  if (outside_ball(p, v)) return std::numeric_limits<double>::infinity();
  return residuals(p, forward(p, v)).misfit;
}

double log_posterior(const SmoothingProblem & p, const Vector & v) {
  if (outside_ball(p, v)) return -std::numeric_limits<double>::infinity();
  return -objective(p, v);
}

GradientResult gradient(const SmoothingProblem & p, const Vector & v, GradientMode mode) {
  if (outside_ball(p, v)) throw Error(ErrorCode::OutOfBall, "gradient requested outside the ball");
  GradientResult out;
  out.near_boundary = v.norm() > p.sys.radius() - 1e-9;
  if (mode == GradientMode::Adjoint) {
    const Trajectory traj = forward(p, v);
    const Residuals res = residuals(p, traj);
    out.objective = res.misfit;
    out.grad = traj.adjoint(weighted_adjoint_inputs(p, res.r));
    return out;
  }
  const int d = p.sys.dim();
  const double eps = 1e-6 * std::max(1.0, v.norm());
  out.objective = objective(p, v);
  out.grad.resize(d);
  for (int i = 0; i < d; ++i) {
    Vector a = v;
    Vector b = v;
    a[i] += eps;
    b[i] -= eps;
    const double fa = objective(p, a);
    const double fb = objective(p, b);
    if (std::isfinite(fa) && std::isfinite(fb)) {
      out.grad[i] = (fa - fb) / (2.0 * eps);
    } else if (std::isfinite(fb)) {
      out.grad[i] = (out.objective - fb) / eps;
    } else {
      out.grad[i] = (fa - out.objective) / eps;
    }
  }
  return out;
}

Matrix hessian_dense(const SmoothingProblem & p, const Vector & v) {
  const int d = p.sys.dim();
  const double eps = 1e-6 * std::max(1.0, v.norm());
  Matrix Hm(d, d);
  for (int i = 0; i < d; ++i) {
    Vector a = v;
    Vector b = v;
    a[i] += eps;
    b[i] -= eps;
    const bool a_in = !outside_ball(p, a);
    const bool b_in = !outside_ball(p, b);
    if (a_in && b_in) {
      Hm.col(i) = (gradient(p, a).grad - gradient(p, b).grad) / (2.0 * eps);
    } else {
      const Vector g0 = gradient(p, v).grad;
      Hm.col(i) = a_in ? Vector((gradient(p, a).grad - g0) / eps)
                       : Vector((g0 - gradient(p, b).grad) / eps);
    }
  }
  return 0.5 * (Hm + Hm.transpose());
}

Vector hessian_apply(const SmoothingProblem & p, const Vector & v, const Vector & w,
                     HessianMode mode) {
  if (resolve_hessian_mode(mode, p.sys.dim()) == HessianMode::DenseFD) {
    return hessian_dense(p, v) * w;
  }
  return HessianOperator(p, v).apply(w);
}

// ---------------------------------------------------------------------------
// HessianOperator

HessianOperator::HessianOperator(const SmoothingProblem & p, const Vector & v)
  : p_(&p), v_(v), traj_(p.sys, v, p.setup.h, p.setup.k, p.integrator) {
  const Residuals res = residuals(p, traj_);
  res_ = res.r;
  misfit_ = res.misfit;
  grad_ = traj_.adjoint(weighted_adjoint_inputs(p, res_));
}

Vector HessianOperator::apply_gauss_newton(const Vector & w) const {
  const std::vector<Vector> tang = traj_.tangent(w);
  const double wt = p_->data_weight();
  std::vector<Vector> q;
  q.reserve(tang.size());
  for (const auto & t : tang) {
    q.push_back(wt * p_->setup.H.apply_transpose(p_->setup.H.apply(t)));
  }
  return traj_.adjoint(q);
}

Vector HessianOperator::apply(const Vector & w) const {
  const double wn = w.norm();
  if (wn == 0.0) return Vector::Zero(w.size());
  Vector out = apply_gauss_newton(w);
  // Residual curvature: adjoint at v + εw with the residuals frozen at v.
  double eps = 1e-5 * std::max(1.0, v_.norm()) / wn;
  Vector shifted = v_ + eps * w;
  if (shifted.norm() > p_->sys.radius()) {
    eps = -eps;
    shifted = v_ + eps * w;
  }
  const Trajectory t2(p_->sys, shifted, p_->setup.h, p_->setup.k, p_->integrator);
  const Vector g2 = t2.adjoint(weighted_adjoint_inputs(*p_, res_));
  out += (g2 - grad_) / eps;
  return out;
}

Vector HessianOperator::preconditioner_diagonal() const {
  const int d = p_->sys.dim();
  const double wt = p_->data_weight();
  Vector diag = Vector::Zero(d);
  if (d <= 256) {
    for (int i = 0; i < d; ++i) {
      for (const auto & t : traj_.tangent(Vector::Unit(d, i))) {
        diag[i] += wt * p_->setup.H.apply(t).squaredNorm();
      }
    }
  } else {
    // Short-time expansion JΨ_t ≈ I + t Jf + t²/2 Jf² around the start point.
    const auto & sys = p_->sys;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(sys.B_entries().size() * 2 + static_cast<std::size_t>(d));
    for (const auto & e : sys.B_entries()) {
      trip.emplace_back(e.out, e.i, -e.coeff * v_[e.j]);
      trip.emplace_back(e.out, e.j, -e.coeff * v_[e.i]);
    }
    if (sys.A().is_diagonal()) {
      for (int i = 0; i < d; ++i) trip.emplace_back(i, i, -sys.A().diag()[i]);
    } else {
      for (int i = 0; i < d; ++i) trip.emplace_back(i, i, -sys.A().matrix()(i, i));
    }
    Eigen::SparseMatrix<double> Jf(d, d);
    Jf.setFromTriplets(trip.begin(), trip.end());
    const Eigen::SparseMatrix<double> Jf2 = Jf * Jf;
    Eigen::SparseMatrix<double> I(d, d);
    I.setIdentity();
    const Matrix Hsel = p_->setup.H.is_selection() ? Matrix() : p_->setup.H.matrix();
    for (int j = 0; j <= p_->setup.k; ++j) {
      const double t = p_->setup.time(j);
      const Eigen::SparseMatrix<double> M = I + t * Jf + (0.5 * t * t) * Jf2;
      if (p_->setup.H.is_selection()) {
        const Eigen::SparseMatrix<double, Eigen::RowMajor> Mr = M;
        for (const int r : p_->setup.H.indices()) {
          for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(Mr, r); it; ++it) {
            diag[it.col()] += wt * it.value() * it.value();
          }
        }
      } else {
        const Matrix HM = Hsel * M;
        diag += wt * HM.colwise().squaredNorm().transpose();
      }
    }
  }
  const double floor = 1e-8 * std::max(diag.maxCoeff(), 1e-300);
  return diag.cwiseMax(floor);
}

// ---------------------------------------------------------------------------
// Newton

namespace {

struct LinearSolve {
  bool ok = false;
  Vector p;
  int iterations = 0;
};

LinearSolve solve_dense(const Matrix & Hm, const Vector & g, double lambda) {
  Matrix M = Hm;
  M.diagonal().array() += lambda;
  const Eigen::LLT<Matrix> llt(M);
  LinearSolve out;
  if (llt.info() != Eigen::Success) return out;
  out.p = llt.solve(-g);
  out.ok = out.p.allFinite();
  return out;
}

LinearSolve solve_cg(const HessianOperator & op, const Vector & g, const Vector & precond,
                     double lambda, double tol, int max_iters) {
  LinearSolve out;
  const int d = static_cast<int>(g.size());
  const Vector inv = (precond.array() + lambda).inverse().matrix();
  Vector x = Vector::Zero(d);
  Vector r = -g;
  Vector z = inv.cwiseProduct(r);
  Vector dir = z;
  double rz = r.dot(z);
  const double r0 = r.norm();
  if (r0 == 0.0) {
    out.ok = true;
    out.p = x;
    return out;
  }
  for (int it = 0; it < max_iters; ++it) {
    const Vector Ad = op.apply(dir) + lambda * dir;
    const double curv = dir.dot(Ad);
    if (!(curv > 0.0)) return out;  // non-positive curvature
    const double alpha = rz / curv;
    x += alpha * dir;
    r -= alpha * Ad;
    out.iterations = it + 1;
    if (r.norm() <= tol * r0) break;
    z = inv.cwiseProduct(r);
    const double rz_new = r.dot(z);
    dir = z + (rz_new / rz) * dir;
    rz = rz_new;
  }
  out.ok = x.allFinite();
  out.p = x;
  return out;
}

}  // namespace

NewtonResult newton_solve(const SmoothingProblem & p, const Vector & x0, const NewtonOptions & opt) {
  p.validate();
  const double R = p.sys.radius();
  if (outside_ball(p, x0)) throw Error(ErrorCode::OutOfBall, "Newton start outside the ball");
  const int d = p.sys.dim();
  const double delta_min = opt.delta_min > 0.0 ? opt.delta_min : 1e-10 * R;
  NewtonResult out;
  out.trace.hessian_mode = resolve_hessian_mode(opt.hessian, d);
  const bool dense = out.trace.hessian_mode == HessianMode::DenseFD;

  Vector x = project_ball(x0, R);
  double f = objective(p, x);
  out.trace.iterates.push_back(x);
  out.trace.objective.push_back(f);

  for (int it = 0; it < opt.max_iters; ++it) {
    Vector g;
    Matrix Hm;
    std::optional<HessianOperator> op;
    Vector precond;
    double scale = 1.0;
    if (dense) {
      const GradientResult gr = gradient(p, x);
      g = gr.grad;
      out.trace.boundary_warning |= gr.near_boundary;
      Hm = hessian_dense(p, x);
      scale = std::abs(Hm.trace()) / d;
    } else {
      op.emplace(p, x);
      g = op->gradient();
      out.trace.boundary_warning |= x.norm() > R - 1e-9;
      precond = op->preconditioner_diagonal();
      scale = precond.mean();
    }
    if (!(scale > 0.0)) scale = 1.0;

    double lambda = 0.0;
    bool accepted = false;
    bool converged = false;
    Vector xn;
    double fn = f;
    int cg_its = 0;
    for (int tries = 0; tries < 80 && !accepted; ++tries) {
      const LinearSolve s = dense ? solve_dense(Hm, g, lambda)
                                  : solve_cg(*op, g, precond, lambda, opt.cg_tol, opt.cg_max_iters);
      cg_its += s.iterations;
      if (s.ok) {
        xn = project_ball(x + s.p, R);
        const double step = (xn - x).norm();
        if (step < delta_min) {
          accepted = true;
          converged = true;
          fn = objective(p, xn);
          break;
        }
        fn = objective(p, xn);
        if (std::isfinite(fn) && fn <= f + 1e-12 * std::abs(f)) {
          accepted = true;
          break;
        }
      }
      lambda = lambda == 0.0 ? 1e-8 * scale : 2.0 * lambda;
    }
    if (!accepted) break;
    out.trace.step_norms.push_back((xn - x).norm());
    out.trace.shifts.push_back(lambda);
    out.trace.cg_iterations.push_back(cg_its);
    x = xn;
    f = fn;
    out.trace.iterates.push_back(x);
    out.trace.objective.push_back(f);
    if (converged) {
      out.trace.converged = true;
      break;
    }
  }
  out.x = x;
  return out;
}

// ---------------------------------------------------------------------------
// Algorithms

double rmse(const Vector & a, const Vector & b) {
  return (a - b).norm() / std::sqrt(static_cast<double>(a.size()));
}

EstimateReport smooth(const SmoothingProblem & p, const SmoothConfig & cfg) {
  p.validate();
  const ReconstructionPlan plan = cfg.plan ? *cfg.plan : default_plan(p.sys, p.setup);
  EstimateReport rep;
  try {
    const InitialEstimate ie = initial_estimate_multianchor(p, plan);
    rep.x0 = ie.x0;
    rep.init_method = std::string(to_string(plan.scenario)) + "@" + std::to_string(ie.anchor);
  } catch (const Error & e) {
    if (e.code() != ErrorCode::InitializationFailure || p.sys.dim() > 256) throw;
    const std::vector<Vector> derivs = estimate_observed_derivatives(p, plan, 0);
    rep.x0 = generic_least_squares_F(derivs, p.sys, p.setup.H);
    rep.init_method = "generic-least-squares";
  }
  NewtonResult nr = newton_solve(p, rep.x0, cfg.newton);
  rep.u_map = nr.x;
  rep.trace = std::move(nr.trace);
  rep.u_filter = flow_intervals(p.sys, rep.u_map, p.setup.h, p.setup.k, p.integrator);
  if (p.record.truth) {
    const Vector truth = p.record.truth->row(0).transpose();
    rep.rmse_x0 = rmse(rep.x0, truth);
    rep.rmse_map = rmse(rep.u_map, truth);
  }
  return rep;
}

FilterOutput filter_stream(const BilinearSystem & sys, const ObservationSetup & window_setup,
                           const Matrix & Y, int stride, const SmoothConfig & cfg,
                           const IntegratorOptions & opt) {
  if (stride < 1) throw Error(ErrorCode::InvalidArgument, "refresh stride must be >= 1");
  window_setup.validate(sys);
  const int k = window_setup.k;
  const int n = static_cast<int>(Y.rows());
  FilterOutput out;
  Vector last = Vector::Zero(sys.dim());
  for (int i = 0; i < n; ++i) {
    bool refreshed = false;
    bool failed = false;
    if (i < k) {
      last = Vector::Zero(sys.dim());
    } else if ((i - k) % stride == 0) {
      refreshed = true;
      try {
        SmoothingProblem p{sys, window_setup, {}, opt};
        p.record.Y = Y.middleRows(i - k, k + 1);
        const EstimateReport rep = smooth(p, cfg);
        if (!rep.trace.converged) failed = true;
        last = rep.u_filter;
      } catch (const Error &) {
        failed = true;
        last = project_ball(last, sys.radius());
        last = flow_intervals(sys, last, window_setup.h, 1, opt);
      }
    } else {
      last = flow_intervals(sys, project_ball(last, sys.radius()), window_setup.h, 1, opt);
    }
    out.estimates.push_back(last);
    out.refreshed.push_back(refreshed);
    out.failed.push_back(failed);
  }
  return out;
}

}  // namespace bda
