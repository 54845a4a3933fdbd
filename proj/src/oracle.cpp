/*
 * (C) Copyright 2026 The bda authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "bda/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "bda/rng.hpp"

namespace bda {

namespace {

constexpr int kMaxGridDim = 4;

// Multi-index of a flat node, last axis fastest.
void unflatten(std::size_t flat, const std::vector<Vector> & axes, std::vector<int> & idx) {
  for (int a = static_cast<int>(axes.size()) - 1; a >= 0; --a) {
    const auto n = static_cast<std::size_t>(axes[a].size());
    idx[a] = static_cast<int>(flat % n);
    flat /= n;
  }
}

}  // namespace

Vector GridPosterior::node(std::size_t flat) const {
  std::vector<int> idx(axes.size());
  unflatten(flat, axes, idx);
  Vector v(dim());
  for (int a = 0; a < dim(); ++a) v[a] = axes[a][idx[a]];
  return v;
}

double GridPosterior::spacing(int a) const {
  const Vector & x = axes[a];
  return x.size() > 1 ? (x[x.size() - 1] - x[0]) / static_cast<double>(x.size() - 1) : 0.0;
}

std::vector<Vector> grid_axes(const Vector & center, const Matrix & precision, double sigma_z,
                              const GridSpec & spec) {
  const int d = static_cast<int>(center.size());
  if (d < 1 || d > kMaxGridDim) {
    throw Error(ErrorCode::InvalidDimension, "grid posterior requires 1 <= d <= 4");
  }
  if (spec.points_per_axis < 3 || !(spec.width_std > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "grid needs at least 3 points and a positive width");
  }
  const Eigen::LLT<Matrix> llt(precision);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::NotPositiveDefinite, "grid scale precision is not positive definite");
  }
  const Matrix cov = llt.solve(Matrix::Identity(d, d));
  const double s = sigma_z > 0.0 ? sigma_z : 1.0;
  std::vector<Vector> axes;
  for (int a = 0; a < d; ++a) {
    const double sd = s * std::sqrt(cov(a, a));
    axes.push_back(Vector::LinSpaced(spec.points_per_axis, center[a] - spec.width_std * sd,
                                     center[a] + spec.width_std * sd));
  }
  return axes;
}

GridPosterior tabulate(const std::vector<Vector> & axes,
                       const std::function<double(const Vector &)> & log_density,
                       double boundary_tolerance) {
  const int d = static_cast<int>(axes.size());
  if (d < 1 || d > kMaxGridDim) {
    throw Error(ErrorCode::InvalidDimension, "grid posterior requires 1 <= d <= 4");
  }
  GridPosterior g;
  g.axes = axes;
  std::size_t n = 1;
  for (const auto & x : axes) n *= static_cast<std::size_t>(x.size());

  double cell = 1.0;
  for (int a = 0; a < d; ++a) cell *= g.spacing(a);

  std::vector<double> logf(n);
  g.weight.resize(n);
  std::vector<bool> on_boundary(n);
  std::vector<int> idx(d);
  Vector v(d);
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    unflatten(i, axes, idx);
    double w = cell;
    bool edge = false;
    for (int a = 0; a < d; ++a) {
      v[a] = axes[a][idx[a]];
      if (idx[a] == 0 || idx[a] == axes[a].size() - 1) {
        w *= 0.5;
        edge = true;
      }
    }
    g.weight[i] = w;
    on_boundary[i] = edge;
    logf[i] = log_density(v);
    m = std::max(m, logf[i]);
  }
  if (!std::isfinite(m)) {
    throw Error(ErrorCode::GridTooSmall, "density vanishes on every grid node");
  }

  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) z += g.weight[i] * std::exp(logf[i] - m);
  g.log_normalizer = m + std::log(z);

  g.density.resize(n);
  g.mean = Vector::Zero(d);
  std::size_t best = 0;
  for (std::size_t i = 0; i < n; ++i) {
    g.density[i] = std::exp(logf[i] - g.log_normalizer);
    const double mass = g.weight[i] * g.density[i];
    if (on_boundary[i]) g.boundary_mass += mass;
    if (logf[i] > logf[best]) best = i;
    g.mean += mass * g.node(i);
  }
  g.argmax = g.node(best);
  g.covariance = Matrix::Zero(d, d);
  for (std::size_t i = 0; i < n; ++i) {
    const Vector e = g.node(i) - g.mean;
    g.covariance += g.weight[i] * g.density[i] * e * e.transpose();
  }
  if (g.boundary_mass > boundary_tolerance) {
    throw Error(ErrorCode::GridTooSmall, "boundary cells hold " + std::to_string(g.boundary_mass) +
                                             " of the mass");
  }
  return g;
}

GridPosterior grid_posterior(const SmoothingProblem & p, const Vector & center,
                             const Matrix & precision, const GridSpec & spec) {
  p.validate();
  const auto axes = grid_axes(center, precision, p.setup.sigma_z, spec);
  return tabulate(axes, [&](const Vector & v) { return log_posterior(p, v); },
                  spec.boundary_tolerance);
}

double tv_distance(const GridPosterior & p, const GaussianApprox & q) {
  if (q.center.size() != p.dim()) {
    throw Error(ErrorCode::InvalidDimension, "distribution dimensions differ");
  }
  double l1 = 0.0;
  double q_on_grid = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double qi = std::exp(q.log_density(p.node(i)));
    l1 += p.weight[i] * std::abs(p.density[i] - qi);
    q_on_grid += p.weight[i] * qi;
  }
  return 0.5 * l1 + 0.5 * std::max(0.0, 1.0 - q_on_grid);
}

double w1_distance_mc(const GridPosterior & p, const GaussianApprox & q, int n_samples,
                      std::uint64_t seed) {
  if (q.center.size() != p.dim()) {
    throw Error(ErrorCode::InvalidDimension, "distribution dimensions differ");
  }
  if (n_samples < 1) throw Error(ErrorCode::InvalidArgument, "need at least one sample");
  const std::size_t n = p.size();
  // Cumulative masses of the positive and negative parts of p - q.
  std::vector<double> cum_pos(n);
  std::vector<double> cum_neg(n);
  double pos = 0.0;
  double neg = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double diff = p.weight[i] * (p.density[i] - std::exp(q.log_density(p.node(i))));
    pos += std::max(diff, 0.0);
    neg += std::max(-diff, 0.0);
    cum_pos[i] = pos;
    cum_neg[i] = neg;
  }
  const double excess = 0.5 * (pos + neg);  // 1 - γ
  if (!(pos > 0.0) || !(neg > 0.0)) return 0.0;

  auto draw = [](const std::vector<double> & cum, double u) {
    const auto it = std::lower_bound(cum.begin(), cum.end(), u * cum.back());
    return static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cum.begin(),
                                                             static_cast<std::ptrdiff_t>(cum.size()) - 1));
  };

  double sum = 0.0;
  for (int s = 0; s < n_samples; ++s) {
    const auto r = rng::philox4x64({static_cast<std::uint64_t>(s), 0, 0, 0}, {seed, 7});
    const Vector x = p.node(draw(cum_pos, rng::to_unit_open0(r[0])));
    const Vector y = p.node(draw(cum_neg, rng::to_unit_open0(r[1])));
    sum += (x - y).norm();
  }
  return excess * sum / n_samples;
}

ImportanceEstimate importance_posterior(const SmoothingProblem & p, const GaussianApprox & proposal,
                                        int n_samples, std::uint64_t seed) {
  const int d = p.sys.dim();
  if (proposal.center.size() != d) throw Error(ErrorCode::InvalidDimension, "proposal dimension");
  if (n_samples < 2) throw Error(ErrorCode::InvalidArgument, "need at least two samples");
  const Eigen::LLT<Matrix> llt(proposal.covariance());
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::NotPositiveDefinite, "proposal covariance is not positive definite");
  }
  const Matrix L = llt.matrixL();
  const rng::NormalStream normals(seed, 9);
  std::vector<Vector> xs(static_cast<std::size_t>(n_samples));
  std::vector<double> logw(static_cast<std::size_t>(n_samples));
  double top = -std::numeric_limits<double>::infinity();
  Vector z(d);
  for (int s = 0; s < n_samples; ++s) {
    for (int i = 0; i < d; ++i) {
      z[i] = normals.at(static_cast<std::uint64_t>(s) * static_cast<std::uint64_t>(d) +
                        static_cast<std::uint64_t>(i));
    }
    auto & x = xs[static_cast<std::size_t>(s)];
    x = proposal.center + L * z;
    auto & lw = logw[static_cast<std::size_t>(s)];
    lw = log_posterior(p, x) - proposal.log_density(x);
    top = std::max(top, lw);
  }
  if (!std::isfinite(top)) throw Error(ErrorCode::Numerical, "every sample fell outside the ball");
  double sw = 0.0;
  double sw2 = 0.0;
  ImportanceEstimate out;
  out.samples = n_samples;
  out.mean = Vector::Zero(d);
  for (int s = 0; s < n_samples; ++s) {
    const double w = std::exp(logw[static_cast<std::size_t>(s)] - top);
    sw += w;
    sw2 += w * w;
    out.mean += w * xs[static_cast<std::size_t>(s)];
  }
  out.mean /= sw;
  out.covariance = Matrix::Zero(d, d);
  for (int s = 0; s < n_samples; ++s) {
    const double w = std::exp(logw[static_cast<std::size_t>(s)] - top) / sw;
    const Vector e = xs[static_cast<std::size_t>(s)] - out.mean;
    out.covariance += w * e * e.transpose();
  }
  out.effective_sample_size = sw * sw / sw2;
  return out;
}

MseRatio mse_ratio(const BilinearSystem & sys, const ObservationSetup & setup, const Vector & u0,
                   const std::vector<std::uint64_t> & seeds, const GridSpec & spec,
                   const IntegratorOptions & opt) {
  if (sys.dim() > kMaxGridDim) {
    throw Error(ErrorCode::InvalidDimension, "mse_ratio requires d <= 4");
  }
  if (seeds.size() < 2) throw Error(ErrorCode::InvalidArgument, "need at least two seeds");
  const auto n = static_cast<double>(seeds.size());
  std::vector<double> e_mean;
  std::vector<double> e_map;
  for (const auto seed : seeds) {
    SmoothingProblem p{sys, setup, generate(sys, setup, u0, seed, opt), opt};
    const NewtonResult pre = newton_solve(p, u0);
    const Matrix P = hessian_dense(p, pre.x) / p.data_weight();
    const GridPosterior g = grid_posterior(p, pre.x, P, spec);
    // Restart from the grid mean so the reported MAP does not lean on the truth.
    const NewtonResult map = newton_solve(p, project_ball(g.mean, sys.radius()));
    e_mean.push_back((g.mean - u0).squaredNorm());
    e_map.push_back((map.x - u0).squaredNorm());
  }
  auto mean_of = [&](const std::vector<double> & x) {
    return std::accumulate(x.begin(), x.end(), 0.0) / n;
  };
  MseRatio out;
  out.trials = static_cast<int>(seeds.size());
  out.mse_mean = mean_of(e_mean);
  out.mse_map = mean_of(e_map);
  out.ratio = out.mse_map / out.mse_mean;

  double va = 0.0;
  double vb = 0.0;
  double cab = 0.0;
  double vdiff = 0.0;
  const double dbar = out.mse_map - out.mse_mean;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const double a = e_mean[i] - out.mse_mean;
    const double b = e_map[i] - out.mse_map;
    va += a * a;
    vb += b * b;
    cab += a * b;
    const double dd = (e_map[i] - e_mean[i]) - dbar;
    vdiff += dd * dd;
  }
  va /= n - 1.0;
  vb /= n - 1.0;
  cab /= n - 1.0;
  vdiff /= n - 1.0;
  // Delta method for the ratio of two correlated means.
  const double r = out.ratio;
  const double var_r = (vb - 2.0 * r * cab + r * r * va) / (out.mse_mean * out.mse_mean * n);
  out.ratio_stderr = std::sqrt(std::max(var_r, 0.0));
  out.diff_stderr = std::sqrt(vdiff / n);
  return out;
}

BilinearSystem toy_system(double f0, double f1) {
  Vector f(2);
  f << f0, f1;
  const double R = f.norm();
  std::vector<SparseEntry> entries{{0, 1, 0, 1.0}, {0, 0, 1, -1.0}};
  return BilinearSystem(LinearOperator::identity(2), std::move(entries), std::move(f), R);
}

BilinearSystem linear_system(int d, double R) {
  return BilinearSystem(LinearOperator::identity(d), {}, Vector::Zero(d), R);
}

}  // namespace bda
