/*
 * (C) Copyright 2026 The bda authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "bda/dynamics.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <tuple>

namespace bda {

// ---------------------------------------------------------------------------
// LinearOperator

LinearOperator LinearOperator::identity(int d) { return diagonal(Vector::Ones(d)); }

LinearOperator LinearOperator::diagonal(Vector diag) {
  LinearOperator op;
  op.dim_ = static_cast<int>(diag.size());
  op.diagonal_ = true;
  op.diag_ = std::move(diag);
  return op;
}

LinearOperator LinearOperator::dense(Matrix m) {
  if (m.rows() != m.cols()) throw Error(ErrorCode::InvalidDimension, "A must be square");
  LinearOperator op;
  op.dim_ = static_cast<int>(m.rows());
  op.diagonal_ = false;
  op.dense_ = std::move(m);
  return op;
}

void LinearOperator::apply_add(const Vector & x, double scale, Vector & out) const {
  if (diagonal_) {
    out.array() += scale * diag_.array() * x.array();
  } else {
    out.noalias() += scale * (dense_ * x);
  }
}

void LinearOperator::apply_transpose_add(const Vector & x, double scale, Vector & out) const {
  if (diagonal_) {
    out.array() += scale * diag_.array() * x.array();
  } else {
    out.noalias() += scale * (dense_.transpose() * x);
  }
}

double LinearOperator::norm() const {
  if (dim_ == 0) return 0.0;
  if (diagonal_) return diag_.cwiseAbs().maxCoeff();
  Eigen::JacobiSVD<Matrix> svd(dense_);
  return svd.singularValues()(0);
}

// ---------------------------------------------------------------------------
// BilinearSystem

BilinearSystem::BilinearSystem(LinearOperator A, std::vector<SparseEntry> B, Vector f, double R,
                               std::optional<double> norm_B)
  : dim_(A.dim()), A_(std::move(A)), entries_(std::move(B)), f_(std::move(f)), R_(R) {
  finish(norm_B);
}

BilinearSystem BilinearSystem::circulant(LinearOperator A,
                                         std::vector<kernels::StencilTerm> stencil, Vector f,
                                         double R, std::optional<double> norm_B) {
  const int d = A.dim();
  std::vector<SparseEntry> entries;
  entries.reserve(static_cast<std::size_t>(d) * stencil.size());
  for (int i = 0; i < d; ++i) {
    for (const auto & t : stencil) {
      entries.push_back({((i + t.x_offset) % d + d) % d, ((i + t.y_offset) % d + d) % d, i,
                         t.coeff});
    }
  }
  BilinearSystem sys(std::move(A), std::move(entries), std::move(f), R, norm_B);
  for (const auto & t : stencil) {
    // The kernels wrap indices once, so every derived offset must stay below d.
    const int reach = std::max({std::abs(t.x_offset), std::abs(t.y_offset),
                                std::abs(t.y_offset - t.x_offset)});
    if (reach >= d) throw Error(ErrorCode::InvalidDimension, "stencil wider than the system");
  }
  sys.stencil_ = stencil;
  for (const auto & t : stencil) {
    sys.grad_x_stencil_.push_back({-t.x_offset, t.y_offset - t.x_offset, t.coeff});
    sys.grad_y_stencil_.push_back({-t.y_offset, t.x_offset - t.y_offset, t.coeff});
  }
  return sys;
}

void BilinearSystem::finish(std::optional<double> norm_B) {
  if (dim_ <= 0) throw Error(ErrorCode::InvalidDimension, "system dimension must be positive");
  if (f_.size() != dim_) throw Error(ErrorCode::InvalidDimension, "forcing has wrong length");
  if (!(R_ > 0.0) || !std::isfinite(R_)) {
    throw Error(ErrorCode::InvalidArgument, "trapping radius must be positive");
  }
  std::map<std::tuple<int, int, int>, double> merged;
  for (const auto & e : entries_) {
    if (e.i < 0 || e.i >= dim_ || e.j < 0 || e.j >= dim_ || e.out < 0 || e.out >= dim_) {
      throw Error(ErrorCode::InvalidDimension, "bilinear entry index out of range");
    }
    merged[{e.i, e.j, e.out}] += e.coeff;
  }
  symmetric_ = true;
  double frob2 = 0.0;
  for (const auto & [key, c] : merged) {
    frob2 += c * c;
    const auto [i, j, out] = key;
    const auto it = merged.find({j, i, out});
    const double other = it == merged.end() ? 0.0 : it->second;
    if (std::abs(other - c) > 1e-15 * std::max(1.0, std::abs(c))) symmetric_ = false;
  }

  norm_A_ = A_.norm();
  norm_B_ = norm_B.value_or(std::sqrt(frob2));
  norm_f_ = f_.norm();
  if (norm_f_ > 0.0 && !(norm_A_ > 0.0)) {
    throw Error(ErrorCode::Configuration, "nonzero forcing requires a nonzero linear part");
  }
  const double f_over_a = norm_f_ > 0.0 ? norm_f_ / norm_A_ : 0.0;
  constants_.C0 = R_ + f_over_a;
  constants_.C_der = norm_A_ + norm_B_ * R_ + norm_B_ * f_over_a;
  constants_.a_max = norm_A_ + 2.0 * norm_B_ * R_;
  constants_.G = constants_.a_max;
  constants_.v_max = norm_A_ * R_ + norm_B_ * R_ * R_ + norm_f_;
  constants_.norm_B = norm_B_;
}

void BilinearSystem::bilinear_add(const Vector & x, const Vector & y, double scale,
                                  Vector & out) const {
  if (!stencil_.empty()) {
    kernels::active().stencil(stencil_.data(), stencil_.size(), scale, x.data(), y.data(),
                              out.data(), static_cast<std::size_t>(dim_));
    return;
  }
  for (const auto & e : entries_) out[e.out] += scale * e.coeff * x[e.i] * y[e.j];
}

void BilinearSystem::bilinear_grad_x_add(const Vector & g, const Vector & y, double scale,
                                         Vector & out) const {
  if (!stencil_.empty()) {
    kernels::active().stencil(grad_x_stencil_.data(), grad_x_stencil_.size(), scale, g.data(),
                              y.data(), out.data(), static_cast<std::size_t>(dim_));
    return;
  }
  for (const auto & e : entries_) out[e.i] += scale * e.coeff * g[e.out] * y[e.j];
}

void BilinearSystem::bilinear_grad_y_add(const Vector & g, const Vector & x, double scale,
                                         Vector & out) const {
  if (!stencil_.empty()) {
    kernels::active().stencil(grad_y_stencil_.data(), grad_y_stencil_.size(), scale, g.data(),
                              x.data(), out.data(), static_cast<std::size_t>(dim_));
    return;
  }
  for (const auto & e : entries_) out[e.j] += scale * e.coeff * g[e.out] * x[e.i];
}

Vector BilinearSystem::B(const Vector & x, const Vector & y) const {
  Vector out = Vector::Zero(dim_);
  bilinear_add(x, y, 1.0, out);
  return out;
}

Vector BilinearSystem::rhs(const Vector & v) const {
  Vector out = f_;
  A_.apply_add(v, -1.0, out);
  bilinear_add(v, v, -1.0, out);
  return out;
}

void BilinearSystem::require_in_ball(const Vector & v, const char * what) const {
  if (v.size() != dim_) {
    throw Error(ErrorCode::InvalidDimension, std::string(what) + ": vector has wrong length");
  }
  if (v.norm() > R_ * (1.0 + kBallSlack)) {
    throw Error(ErrorCode::OutOfBall, std::string(what) + ": point lies outside the ball");
  }
}

BilinearSystem lorenz96(int d, double f) {
  if (d < 4) throw Error(ErrorCode::InvalidDimension, "Lorenz-96 needs d >= 4");
  if (f == 0.0 || !std::isfinite(f)) {
    throw Error(ErrorCode::InvalidArgument, "Lorenz-96 forcing must be finite and nonzero");
  }
  // B(x,y)_i = -1/2 (y_{i-1}x_{i+1} + x_{i-1}y_{i+1} - y_{i-2}x_{i-1} - x_{i-2}y_{i-1})
  std::vector<kernels::StencilTerm> stencil{
    {+1, -1, -0.5},
    {-1, +1, -0.5},
    {-1, -2, +0.5},
    {-2, -1, +0.5},
  };
  const double R = std::abs(f) * std::sqrt(static_cast<double>(d));
  BilinearSystem sys = BilinearSystem::circulant(LinearOperator::identity(d), std::move(stencil),
                                                 Vector::Constant(d, f), R, 2.0);
  sys.l96_forcing_ = f;
  return sys;
}

// ---------------------------------------------------------------------------
// Taylor machinery

Vector project_ball(const Vector & v, double R) {
  const double n = v.norm();
  if (n <= R) return v;
  return v * (R / n);
}

void taylor_coefficients(const BilinearSystem & sys, const Vector & v, int order,
                         std::vector<Vector> & c) {
  const int d = sys.dim();
  c.resize(static_cast<std::size_t>(order) + 1);
  c[0] = v;
  for (int i = 1; i <= order; ++i) {
    Vector & ci = c[static_cast<std::size_t>(i)];
    ci.setZero(d);
    sys.A().apply_add(c[static_cast<std::size_t>(i - 1)], -1.0, ci);
    if (sys.symmetric_B()) {
      for (int j = 0; j < i - 1 - j; ++j) {
        sys.bilinear_add(c[static_cast<std::size_t>(j)], c[static_cast<std::size_t>(i - 1 - j)],
                         -2.0, ci);
      }
      if ((i - 1) % 2 == 0) {
        const auto m = static_cast<std::size_t>((i - 1) / 2);
        sys.bilinear_add(c[m], c[m], -1.0, ci);
      }
    } else {
      for (int j = 0; j <= i - 1; ++j) {
        sys.bilinear_add(c[static_cast<std::size_t>(j)], c[static_cast<std::size_t>(i - 1 - j)],
                         -1.0, ci);
      }
    }
    if (i == 1) ci += sys.forcing();
    ci *= 1.0 / i;
  }
}

namespace {

constexpr int kMaxOrder = 30;

void check_order(int order) {
  if (order < 0) throw Error(ErrorCode::InvalidArgument, "Taylor order must be non-negative");
  if (order > kMaxOrder) throw Error(ErrorCode::InvalidArgument, "Taylor order above 30");
}

// Σ t^i c_i by Horner.
Vector horner(const std::vector<Vector> & c, double t) {
  Vector y = c.back();
  const auto & K = kernels::active();
  for (std::size_t i = c.size() - 1; i-- > 0;) {
    K.scale_add(t, y.data(), c[i].data(), static_cast<std::size_t>(y.size()));
  }
  return y;
}

double inverse_C_der(const BilinearSystem & sys) {
  const double c = sys.constants().C_der;
  return c > 0.0 ? 1.0 / c : std::numeric_limits<double>::infinity();
}

}  // namespace

std::vector<Vector> derivative_series(const BilinearSystem & sys, const Vector & v, int i_max) {
  check_order(i_max);
  sys.require_in_ball(v, "derivative_series");
  std::vector<Vector> c;
  taylor_coefficients(sys, v, i_max, c);
  double fact = 1.0;
  for (int i = 1; i <= i_max; ++i) {
    fact *= i;
    c[static_cast<std::size_t>(i)] *= fact;
  }
  return c;
}

Vector taylor_step(const BilinearSystem & sys, const Vector & v, double t, int i_max) {
  check_order(i_max);
  sys.require_in_ball(v, "taylor_step");
  if (t < 0.0) throw Error(ErrorCode::InvalidArgument, "taylor_step needs t >= 0");
  if (t >= inverse_C_der(sys)) throw Error(ErrorCode::StepTooLarge, "t >= 1/C_der");
  std::vector<Vector> c;
  taylor_coefficients(sys, v, i_max, c);
  return horner(c, t);
}

double resolve_step(const BilinearSystem & sys, double interval, const IntegratorOptions & opt) {
  if (opt.step > 0.0) return opt.step;
  const double cap = 0.25 * inverse_C_der(sys);
  return interval > 0.0 ? std::min(interval, cap) : cap;
}

std::vector<double> step_schedule(double t, double step) {
  std::vector<double> out;
  if (t <= 0.0) return out;
  const double n = std::floor(t / step);
  for (double i = 0; i < n; i += 1.0) out.push_back(step);
  const double rem = t - n * step;
  if (rem > 1e-12 * t) out.push_back(rem);
  return out;
}

namespace {

void validate_flow_args(const BilinearSystem & sys, const Vector & v, double t, double step,
                        int i_max, const char * what) {
  check_order(i_max);
  sys.require_in_ball(v, what);
  if (t < 0.0) throw Error(ErrorCode::InvalidArgument, std::string(what) + ": t must be >= 0");
  if (!(step > 0.0)) throw Error(ErrorCode::InvalidArgument, std::string(what) + ": step <= 0");
  if (step >= inverse_C_der(sys)) {
    throw Error(ErrorCode::StepTooLarge, std::string(what) + ": step >= 1/C_der");
  }
}

// JΨ of one projected Taylor step applied to w.
Vector tangent_step(const BilinearSystem & sys, const std::vector<Vector> & c, double t,
                    const Vector & y, bool projected, const Vector & w) {
  const std::size_t n = c.size() - 1;
  std::vector<Vector> dc(n + 1);
  dc[0] = w;
  const double mult = sys.symmetric_B() ? 2.0 : 1.0;
  for (std::size_t i = 1; i <= n; ++i) {
    Vector & di = dc[i];
    di.setZero(sys.dim());
    sys.A().apply_add(dc[i - 1], -1.0, di);
    for (std::size_t j = 0; j <= i - 1; ++j) {
      sys.bilinear_add(dc[j], c[i - 1 - j], -mult, di);
      if (!sys.symmetric_B()) sys.bilinear_add(c[j], dc[i - 1 - j], -1.0, di);
    }
    di *= 1.0 / static_cast<double>(i);
  }
  Vector dy = horner(dc, t);
  if (projected) {
    const double ny = y.norm();
    dy = (sys.radius() / ny) * (dy - y * (y.dot(dy) / (ny * ny)));
  }
  return dy;
}

// (JΨ of one projected Taylor step)' z.
Vector adjoint_step(const BilinearSystem & sys, const std::vector<Vector> & c, double t,
                    const Vector & y, bool projected, const Vector & z) {
  Vector zb = z;
  if (projected) {
    const double ny = y.norm();
    zb = (sys.radius() / ny) * (z - y * (y.dot(z) / (ny * ny)));
  }
  const std::size_t n = c.size() - 1;
  std::vector<Vector> ab(n + 1);
  double tp = 1.0;
  for (std::size_t i = 0; i <= n; ++i) {
    ab[i] = tp * zb;
    tp *= t;
  }
  Vector g(sys.dim());
  for (std::size_t i = n; i >= 1; --i) {
    g = ab[i] * (1.0 / static_cast<double>(i));
    sys.A().apply_transpose_add(g, -1.0, ab[i - 1]);
    for (std::size_t j = 0; j <= i - 1; ++j) {
      if (sys.symmetric_B()) {
        sys.bilinear_grad_x_add(g, c[i - 1 - j], -2.0, ab[j]);
      } else {
        sys.bilinear_grad_x_add(g, c[i - 1 - j], -1.0, ab[j]);
        sys.bilinear_grad_y_add(g, c[j], -1.0, ab[i - 1 - j]);
      }
    }
  }
  return ab[0];
}

}  // namespace

Vector flow(const BilinearSystem & sys, const Vector & v, double t, double step, int i_max) {
  validate_flow_args(sys, v, t, step, i_max, "flow");
  Vector x = v;
  std::vector<Vector> c;
  for (const double dt : step_schedule(t, step)) {
    taylor_coefficients(sys, x, i_max, c);
    x = project_ball(horner(c, dt), sys.radius());
  }
  return x;
}

Vector flow(const BilinearSystem & sys, const Vector & v, double t, const IntegratorOptions & opt) {
  return flow(sys, v, t, resolve_step(sys, t, opt), opt.order);
}

Vector flow_intervals(const BilinearSystem & sys, const Vector & v, double h, int k,
                      const IntegratorOptions & opt) {
  if (k < 0) throw Error(ErrorCode::InvalidArgument, "flow_intervals needs k >= 0");
  const double step = resolve_step(sys, h, opt);
  validate_flow_args(sys, v, h, step, opt.order, "flow_intervals");
  const std::vector<double> schedule = step_schedule(h, step);
  Vector x = v;
  std::vector<Vector> c;
  for (int j = 0; j < k; ++j) {
    for (const double dt : schedule) {
      taylor_coefficients(sys, x, opt.order, c);
      x = project_ball(horner(c, dt), sys.radius());
    }
  }
  return x;
}

Vector flow_backward(const BilinearSystem & sys, const Vector & v, double t, int i_max) {
  check_order(i_max);
  sys.require_in_ball(v, "flow_backward");
  if (t < 0.0) throw Error(ErrorCode::InvalidArgument, "flow_backward needs t >= 0");
  if (t >= 0.9 * inverse_C_der(sys)) {
    throw Error(ErrorCode::NotInvertible, "backward time must stay below 0.9/C_der");
  }
  std::vector<Vector> c;
  taylor_coefficients(sys, v, i_max, c);
  return horner(c, -t);
}

Vector tangent_flow(const BilinearSystem & sys, const Vector & v, const Vector & w, double t,
                    double step, int i_max) {
  validate_flow_args(sys, v, t, step, i_max, "tangent_flow");
  const Trajectory traj(sys, v, t, 1, {step, i_max});
  return traj.tangent(w)[1];
}

Vector adjoint_flow(const BilinearSystem & sys, const Vector & v, const Vector & z, double t,
                    double step, int i_max) {
  validate_flow_args(sys, v, t, step, i_max, "adjoint_flow");
  const Trajectory traj(sys, v, t, 1, {step, i_max});
  return traj.adjoint({Vector::Zero(sys.dim()), z});
}

// ---------------------------------------------------------------------------
// Trajectory

Trajectory::Trajectory(const BilinearSystem & sys, const Vector & v, double h, int k,
                       const IntegratorOptions & opt)
  : sys_(&sys), h_(h), k_(k) {
  if (k < 0) throw Error(ErrorCode::InvalidArgument, "trajectory needs k >= 0");
  if (h < 0.0) throw Error(ErrorCode::InvalidArgument, "trajectory needs h >= 0");
  check_order(opt.order);
  sys.require_in_ball(v, "trajectory");
  const double step = resolve_step(sys, h, opt);
  if (step >= inverse_C_der(sys)) throw Error(ErrorCode::StepTooLarge, "step >= 1/C_der");
  const std::vector<double> schedule = step_schedule(h, step);

  states_.reserve(static_cast<std::size_t>(k) + 1);
  steps_.resize(static_cast<std::size_t>(k));
  states_.push_back(v);
  Vector x = v;
  for (int j = 0; j < k; ++j) {
    auto & interval = steps_[static_cast<std::size_t>(j)];
    interval.reserve(schedule.size());
    for (const double dt : schedule) {
      Step s;
      s.t = dt;
      taylor_coefficients(sys, x, opt.order, s.c);
      s.y = horner(s.c, dt);
      s.projected = s.y.norm() > sys.radius();
      x = s.projected ? Vector(s.y * (sys.radius() / s.y.norm())) : s.y;
      interval.push_back(std::move(s));
    }
    states_.push_back(x);
  }
}

std::vector<Vector> Trajectory::tangent(const Vector & w) const {
  if (w.size() != sys_->dim()) throw Error(ErrorCode::InvalidDimension, "tangent direction");
  std::vector<Vector> out;
  out.reserve(static_cast<std::size_t>(k_) + 1);
  out.push_back(w);
  Vector x = w;
  for (const auto & interval : steps_) {
    for (const auto & s : interval) x = tangent_step(*sys_, s.c, s.t, s.y, s.projected, x);
    out.push_back(x);
  }
  return out;
}

Vector Trajectory::adjoint(const std::vector<Vector> & r) const {
  if (r.size() != static_cast<std::size_t>(k_) + 1) {
    throw Error(ErrorCode::InvalidDimension, "adjoint needs k+1 residual vectors");
  }
  Vector lambda = r.back();
  for (int j = k_; j >= 1; --j) {
    const auto & interval = steps_[static_cast<std::size_t>(j - 1)];
    for (auto it = interval.rbegin(); it != interval.rend(); ++it) {
      lambda = adjoint_step(*sys_, it->c, it->t, it->y, it->projected, lambda);
    }
    lambda += r[static_cast<std::size_t>(j - 1)];
  }
  return lambda;
}

}  // namespace bda
