/*
 * (C) Copyright 2026 The bda authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "bda/init_est.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bda/map_solver.hpp"
#include "bda/rng.hpp"

namespace bda {

std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::HalfBlocks: return "half-blocks";
    case Scenario::First3: return "first3";
    case Scenario::Generic: return "generic";
  }
  return "unknown";
}

Scenario detect_scenario(const BilinearSystem & sys, const ObservationOperator & H) {
  if (!sys.lorenz96_forcing() || !H.is_selection()) return Scenario::Generic;
  const int d = sys.dim();
  if (d % 6 == 0 && H.indices() == scenario_half_blocks(d).indices()) return Scenario::HalfBlocks;
  if (H.indices() == std::vector<int>{0, 1, 2}) return Scenario::First3;
  return Scenario::Generic;
}

ReconstructionPlan default_plan(const BilinearSystem & sys, const ObservationSetup & setup) {
  ReconstructionPlan plan;
  plan.scenario = detect_scenario(sys, setup.H);
  plan.j = plan.scenario == Scenario::First3 ? first3_depth(sys.dim()) : 1;
  plan.J_caps.resize(static_cast<std::size_t>(plan.j) + 1);
  for (int l = 0; l <= plan.j; ++l) plan.J_caps[static_cast<std::size_t>(l)] = std::max(l, 1);
  const double limit = 0.9 / sys.constants().C_der;
  plan.anchors.clear();
  for (const int a : {0, setup.k / 4, setup.k / 2}) {
    if (a > 0 && !(a * setup.h < limit)) continue;
    if (std::find(plan.anchors.begin(), plan.anchors.end(), a) == plan.anchors.end()) {
      plan.anchors.push_back(a);
    }
  }
  return plan;
}

double divisor_floor(double R) { return 1e-6 * R; }

namespace {

double checked_divisor(double x, double floor, int index) {
  if (!(std::abs(x) > floor)) {
    throw Error(ErrorCode::DegenerateInput,
                "component " + std::to_string(index) + " is too close to zero to divide by");
  }
  return x;
}

int wrap(int i, int d) { return ((i % d) + d) % d; }

}  // namespace

Vector reconstruct_halfblocks(const std::vector<Vector> & derivs, double f, double R) {
  if (derivs.size() < 2) throw Error(ErrorCode::InvalidArgument, "need H u and H D u");
  const int d_o = static_cast<int>(derivs[0].size());
  if (d_o % 3 != 0 || derivs[1].size() != d_o) {
    throw Error(ErrorCode::InvalidDimension, "half-block data must come in triples");
  }
  const int d = 2 * d_o;
  const double floor = divisor_floor(R);
  Vector u = Vector::Zero(d);
  Vector du = Vector::Zero(d);
  for (int b = 0; b < d_o / 3; ++b) {
    for (int m = 0; m < 3; ++m) {
      u[6 * b + m] = derivs[0][3 * b + m];
      du[6 * b + m] = derivs[1][3 * b + m];
    }
  }
  for (int b = 0; b < d / 6; ++b) {
    const int i0 = 6 * b;
    const int i1 = i0 + 1;
    const int i2 = i0 + 2;
    // Du_{i2} = u_{i1}(u_{i2+1} - u_{i0}) - u_{i2} + f
    u[i2 + 1] = (du[i2] - f + u[i2] + u[i1] * u[i0]) / checked_divisor(u[i1], floor, i1);
    // Du_{i1} = u_{i0}(u_{i2} - u_{i0-1}) - u_{i1} + f
    const int im1 = wrap(i0 - 1, d);
    u[im1] = (f - du[i1] - u[i1] + u[i0] * u[i2]) / checked_divisor(u[i0], floor, i0);
    // Du_{i0} = u_{i0-1}(u_{i1} - u_{i0-2}) - u_{i0} + f
    const int im2 = wrap(i0 - 2, d);
    u[im2] = (f - du[i0] - u[i0] + u[im1] * u[i1]) / checked_divisor(u[im1], floor, im1);
  }
  return u;
}

Vector reconstruct_first3(const std::vector<Vector> & derivs, int d, double f, double R) {
  if (d < 4) throw Error(ErrorCode::InvalidDimension, "first-3 reconstruction needs d >= 4");
  const int j = first3_depth(d);
  if (static_cast<int>(derivs.size()) < j + 1) {
    throw Error(ErrorCode::InvalidArgument,
                "first-3 reconstruction needs " + std::to_string(j + 1) + " derivative orders");
  }
  const double floor = divisor_floor(R);
  // D[i][m] = D^m u_i; order[i] = highest known m, -1 when unknown.
  std::vector<std::vector<double>> D(static_cast<std::size_t>(d),
                                     std::vector<double>(static_cast<std::size_t>(j) + 1, 0.0));
  std::vector<int> order(static_cast<std::size_t>(d), -1);
  for (int i = 0; i < 3; ++i) {
    if (derivs[0].size() != 3) throw Error(ErrorCode::InvalidDimension, "expected 3 observations");
    order[static_cast<std::size_t>(i)] = j;
    for (int m = 0; m <= j; ++m) D[static_cast<std::size_t>(i)][static_cast<std::size_t>(m)] = derivs[static_cast<std::size_t>(m)][i];
  }
  auto at = [&](int i, int m) -> double {
    return D[static_cast<std::size_t>(wrap(i, d))][static_cast<std::size_t>(m)];
  };
  auto ord = [&](int i) { return order[static_cast<std::size_t>(wrap(i, d))]; };
  std::vector<double> binom(static_cast<std::size_t>(j) + 1);
  auto binom_row = [&](int m) {
    binom[0] = 1.0;
    for (int r = 1; r <= m; ++r) binom[static_cast<std::size_t>(r)] = binom[static_cast<std::size_t>(r - 1)] * (m - r + 1) / r;
  };

  // Forward: D^m u_i from u_{i-1} (order m+1), u_{i-2}, u_{i-3}.
  for (int i = 3; i < d; ++i) {
    const int top = std::min({ord(i - 1) - 1, ord(i - 2), ord(i - 3)});
    if (top < 0) break;
    const double div = checked_divisor(at(i - 2, 0), floor, wrap(i - 2, d));
    auto & Di = D[static_cast<std::size_t>(i)];
    for (int m = 0; m <= top; ++m) {
      binom_row(m);
      double s = at(i - 1, m + 1) + at(i - 1, m) - (m == 0 ? f : 0.0);
      for (int r = 0; r <= m; ++r) s += binom[static_cast<std::size_t>(r)] * at(i - 2, r) * at(i - 3, m - r);
      for (int r = 1; r <= m; ++r) s -= binom[static_cast<std::size_t>(r)] * at(i - 2, r) * Di[static_cast<std::size_t>(m - r)];
      Di[static_cast<std::size_t>(m)] = s / div;
    }
    order[static_cast<std::size_t>(i)] = top;
  }

  // Backward: D^m u_{i-1} from u_i, u_{i+1} (order m+1), u_{i+2}.
  for (int t = d - 1; t >= 3 && order[static_cast<std::size_t>(t)] < 0; --t) {
    const int i = t + 1;
    const int top = std::min({ord(i), ord(i + 1) - 1, ord(i + 2)});
    if (top < 0) break;
    const double div = checked_divisor(at(i, 0), floor, wrap(i, d));
    auto & Dt = D[static_cast<std::size_t>(t)];
    for (int m = 0; m <= top; ++m) {
      binom_row(m);
      double s = -at(i + 1, m + 1) - at(i + 1, m) + (m == 0 ? f : 0.0);
      for (int r = 0; r <= m; ++r) s += binom[static_cast<std::size_t>(r)] * at(i, r) * at(i + 2, m - r);
      for (int r = 1; r <= m; ++r) s -= binom[static_cast<std::size_t>(r)] * at(i, r) * Dt[static_cast<std::size_t>(m - r)];
      Dt[static_cast<std::size_t>(m)] = s / div;
    }
    order[static_cast<std::size_t>(t)] = top;
  }

  Vector u(d);
  for (int i = 0; i < d; ++i) {
    if (order[static_cast<std::size_t>(i)] < 0) {
      throw Error(ErrorCode::InsufficientData, "not enough derivative orders to reach every component");
    }
    u[i] = D[static_cast<std::size_t>(i)][0];
  }
  return u;
}

// ---------------------------------------------------------------------------
// Least-squares F

namespace {

// Stacked residuals H D^i v - x_i and, optionally, their Jacobian.
Vector ls_residual(const BilinearSystem & sys, const ObservationOperator & H,
                   const std::vector<Vector> & derivs, const Vector & v, Matrix * jac) {
  const int j = static_cast<int>(derivs.size()) - 1;
  const int d_o = H.obs_dim();
  const int d = sys.dim();
  std::vector<Vector> c;
  taylor_coefficients(sys, v, j, c);
  Vector r((j + 1) * d_o);
  std::vector<double> fact(static_cast<std::size_t>(j) + 1, 1.0);
  for (int i = 1; i <= j; ++i) fact[static_cast<std::size_t>(i)] = fact[static_cast<std::size_t>(i - 1)] * i;
  for (int i = 0; i <= j; ++i) {
    r.segment(i * d_o, d_o) = H.apply(fact[static_cast<std::size_t>(i)] * c[static_cast<std::size_t>(i)]) - derivs[static_cast<std::size_t>(i)];
  }
  if (jac) {
    jac->resize((j + 1) * d_o, d);
    const double mult = sys.symmetric_B() ? 2.0 : 1.0;
    std::vector<Vector> dc(static_cast<std::size_t>(j) + 1);
    for (int col = 0; col < d; ++col) {
      dc[0] = Vector::Unit(d, col);
      for (int i = 1; i <= j; ++i) {
        Vector & di = dc[static_cast<std::size_t>(i)];
        di.setZero(d);
        sys.A().apply_add(dc[static_cast<std::size_t>(i - 1)], -1.0, di);
        for (int q = 0; q <= i - 1; ++q) {
          sys.bilinear_add(dc[static_cast<std::size_t>(q)], c[static_cast<std::size_t>(i - 1 - q)], -mult, di);
          if (!sys.symmetric_B()) sys.bilinear_add(c[static_cast<std::size_t>(q)], dc[static_cast<std::size_t>(i - 1 - q)], -1.0, di);
        }
        di *= 1.0 / i;
      }
      for (int i = 0; i <= j; ++i) {
        jac->block(i * d_o, col, d_o, 1) = H.apply(fact[static_cast<std::size_t>(i)] * dc[static_cast<std::size_t>(i)]);
      }
    }
  }
  return r;
}

struct LmResult {
  Vector x;
  double obj;
};

LmResult levenberg_marquardt(const BilinearSystem & sys, const ObservationOperator & H,
                             const std::vector<Vector> & derivs, Vector x, int max_iters) {
  const double R = sys.radius();
  x = project_ball(x, R);
  Matrix J;
  Vector r = ls_residual(sys, H, derivs, x, &J);
  double obj = r.squaredNorm();
  double mu = -1.0;
  for (int it = 0; it < max_iters && std::isfinite(obj); ++it) {
    const Matrix JtJ = J.transpose() * J;
    const Vector g = J.transpose() * r;
    if (mu < 0.0) mu = 1e-3 * std::max(JtJ.diagonal().maxCoeff(), 1e-300);
    bool accepted = false;
    for (int tries = 0; tries < 40; ++tries) {
      Matrix Mx = JtJ;
      Mx.diagonal().array() += mu;
      const Vector step = Mx.ldlt().solve(-g);
      const Vector xn = project_ball(x + step, R);
      const double moved = (xn - x).norm();
      if (moved <= 1e-15 * (1.0 + x.norm())) return {x, obj};
      Matrix Jn;
      const Vector rn = ls_residual(sys, H, derivs, xn, &Jn);
      const double on = rn.squaredNorm();
      if (std::isfinite(on) && on < obj) {
        x = xn;
        r = rn;
        J = std::move(Jn);
        const double rel = (obj - on) / std::max(obj, 1e-300);
        obj = on;
        mu = std::max(mu / 3.0, 1e-300);
        accepted = true;
        if (rel < 1e-15 || obj == 0.0) return {x, obj};
        break;
      }
      mu *= 4.0;
    }
    if (!accepted) break;
  }
  return {x, obj};
}

}  // namespace

double least_squares_objective(const BilinearSystem & sys, const ObservationOperator & H,
                               const std::vector<Vector> & derivs, const Vector & v) {
  return ls_residual(sys, H, derivs, v, nullptr).squaredNorm();
}

Vector generic_least_squares_F(const std::vector<Vector> & derivs, const BilinearSystem & sys,
                               const ObservationOperator & H,
                               const std::vector<Vector> & extra_starts,
                               const LeastSquaresOptions & opt) {
  if (derivs.empty()) throw Error(ErrorCode::InvalidArgument, "no derivative estimates given");
  for (const auto & x : derivs) {
    if (x.size() != H.obs_dim()) throw Error(ErrorCode::InvalidDimension, "derivative estimate length");
  }
  const int d = sys.dim();
  std::vector<Vector> starts = extra_starts;
  const rng::NormalStream normals(opt.seed, 1);
  for (int s = 0; s < opt.starts; ++s) {
    Vector z(d);
    for (int i = 0; i < d; ++i) {
      z[i] = normals.at(static_cast<std::uint64_t>(s) * static_cast<std::uint64_t>(d) +
                        static_cast<std::uint64_t>(i));
    }
    starts.push_back(z * (0.5 * sys.radius() / z.norm()));
  }
  bool found = false;
  LmResult best{Vector::Zero(d), std::numeric_limits<double>::infinity()};
  for (const auto & s : starts) {
    if (s.size() != d || !s.allFinite()) continue;
    const LmResult res = levenberg_marquardt(sys, H, derivs, s, opt.max_iters);
    if (std::isfinite(res.obj) && res.obj < best.obj) {
      best = res;
      found = true;
    }
  }
  if (!found) throw Error(ErrorCode::OptimizationFailure, "no least-squares start produced a finite objective");
  return best.x;
}

// ---------------------------------------------------------------------------
// Pipeline

std::vector<Vector> estimate_observed_derivatives(const SmoothingProblem & p,
                                                  const ReconstructionPlan & plan, int first) {
  const int rows = p.record.rows();
  if (first < 0 || first >= rows) throw Error(ErrorCode::InsufficientData, "anchor outside the record");
  ErrorBudgetInputs in;
  in.h = p.setup.h;
  in.sigma_z = p.setup.sigma_z;
  in.d_o = p.setup.H.obs_dim();
  in.C0 = p.sys.constants().C0;
  in.C_der = p.sys.constants().C_der;
  in.H_norm = p.setup.H.norm();
  const Matrix Y = p.record.Y.bottomRows(rows - first);
  std::vector<Vector> out;
  for (int l = 0; l <= plan.j; ++l) {
    const int cap = static_cast<std::size_t>(l) < plan.J_caps.size()
                      ? plan.J_caps[static_cast<std::size_t>(l)]
                      : std::max(l, 1);
    out.push_back(estimate_derivative(Y, l, std::max(cap, l), in).value);
  }
  return out;
}

Vector reconstruct(const SmoothingProblem & p, const ReconstructionPlan & plan,
                   const std::vector<Vector> & derivs) {
  const double R = p.sys.radius();
  switch (plan.scenario) {
    case Scenario::HalfBlocks:
      return reconstruct_halfblocks(derivs, *p.sys.lorenz96_forcing(), R);
    case Scenario::First3:
      return reconstruct_first3(derivs, p.sys.dim(), *p.sys.lorenz96_forcing(), R);
    case Scenario::Generic:
      return generic_least_squares_F(derivs, p.sys, p.setup.H);
  }
  throw Error(ErrorCode::Configuration, "unknown scenario");
}

InitialEstimate initial_estimate_multianchor(const SmoothingProblem & p,
                                             const ReconstructionPlan & plan) {
  if ((plan.scenario != Scenario::Generic) && !p.sys.lorenz96_forcing()) {
    throw Error(ErrorCode::Configuration, "closed-form reconstruction needs a Lorenz-96 system");
  }
  const double R = p.sys.radius();
  const double limit = 0.9 / p.sys.constants().C_der;
  InitialEstimate out;
  double best = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (const int a : plan.anchors) {
    AnchorCandidate cand;
    cand.anchor = a;
    try {
      const double t = a * p.setup.h;
      if (a < 0 || (a > 0 && !(t < limit))) {
        throw Error(ErrorCode::NotInvertible, "anchor lies beyond the backward-flow horizon");
      }
      const std::vector<Vector> derivs = estimate_observed_derivatives(p, plan, a);
      Vector x = project_ball(reconstruct(p, plan, derivs), R);
      if (a > 0) x = project_ball(flow_backward(p.sys, x, t, plan.backward_order), R);
      if (!x.allFinite()) throw Error(ErrorCode::Numerical, "non-finite reconstruction");
      cand.point = x;
      cand.log_posterior = log_posterior(p, x);
      cand.ok = true;
    } catch (const Error & e) {
      cand.failure = e.what();
    }
    if (cand.ok && (!any || cand.log_posterior > best)) {
      best = cand.log_posterior;
      out.x0 = cand.point;
      out.anchor = a;
      any = true;
    }
    out.candidates.push_back(std::move(cand));
  }
  if (!any) {
    std::string why;
    for (const auto & c : out.candidates) why += " [anchor " + std::to_string(c.anchor) + ": " + c.failure + "]";
    throw Error(ErrorCode::InitializationFailure, "every anchor failed:" + why);
  }
  return out;
}

}  // namespace bda
