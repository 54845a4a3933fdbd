/*
 * (C) Copyright 2026 The bda authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include <cmath>

#include "bda/harness.hpp"

namespace bda {

namespace {

std::vector<TrialResult> run_point(const ExperimentConfig & cfg, int k, double h, double sigma_z) {
  return run_pool<TrialResult>(cfg.trials, cfg.jobs, [&](int i) {
    return run_trial(cfg, k, h, sigma_z, cfg.seed + static_cast<std::uint64_t>(i));
  });
}

}  // namespace

SmoothConfig make_smooth_config(const ExperimentConfig & cfg, const BilinearSystem & sys,
                                const ObservationSetup & setup) {
  SmoothConfig sc;
  sc.newton = cfg.newton();
  if (!cfg.jmax_caps.empty()) {
    ReconstructionPlan plan = default_plan(sys, setup);
    for (std::size_t l = 0; l < plan.J_caps.size() && l < cfg.jmax_caps.size(); ++l) {
      plan.J_caps[l] = std::max(cfg.jmax_caps[l], static_cast<int>(l));
    }
    sc.plan = plan;
  }
  return sc;
}

TrialResult run_trial(const ExperimentConfig & cfg, int k, double h, double sigma_z,
                      std::uint64_t seed) {
  TrialResult t;
  t.seed = seed;
  try {
    const BilinearSystem sys = cfg.system();
    const ObservationSetup setup{cfg.observation(), sigma_z, h, k};
    const Vector u0 = cfg.initial_state();
    SmoothingProblem p{sys, setup, generate(sys, setup, u0, seed, cfg.integrator()),
                       cfg.integrator()};
    const EstimateReport rep = smooth(p, make_smooth_config(cfg, sys, setup));
    t.rmse_x0 = rmse(rep.x0, u0);
    t.rmse_map = rmse(rep.u_map, u0);
    t.iterations = rep.trace.iterations();
    t.converged = rep.trace.converged;
  } catch (const Error & e) {
    t.failed = true;
    t.reason = e.what();
  }
  return t;
}

RmseSummary summarize(const std::vector<TrialResult> & trials) {
  RmseSummary s;
  if (trials.empty()) return s;
  std::vector<double> sq;
  double sq_x0 = 0.0;
  int conv = 0;
  double iters = 0.0;
  for (const auto & t : trials) {
    if (t.failed) continue;
    sq.push_back(t.rmse_map * t.rmse_map);
    sq_x0 += t.rmse_x0 * t.rmse_x0;
    conv += t.converged;
    iters += t.iterations;
  }
  const auto n_all = static_cast<double>(trials.size());
  s.failure_fraction = (n_all - static_cast<double>(sq.size())) / n_all;
  if (sq.empty()) {
    s.rmse_x0 = s.rmse_map = s.stderr_map = std::nan("");
    return s;
  }
  const auto n = static_cast<double>(sq.size());
  double mean = 0.0;
  for (double x : sq) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : sq) var += (x - mean) * (x - mean);
  var = sq.size() > 1 ? var / (n - 1.0) : 0.0;
  s.rmse_map = std::sqrt(mean);
  s.rmse_x0 = std::sqrt(sq_x0 / n);
  // d sqrt(m) = dm / (2 sqrt(m))
  s.stderr_map = s.rmse_map > 0.0 ? std::sqrt(var / n) / (2.0 * s.rmse_map) : 0.0;
  s.converged_fraction = conv / n_all;
  s.mean_iterations = iters / n;
  return s;
}

std::vector<RmseVsKRow> experiment_rmse_vs_k(const ExperimentConfig & cfg) {
  cfg.validate();
  std::vector<RmseVsKRow> rows;
  for (int k : cfg.k_list) rows.push_back({k, summarize(run_point(cfg, k, cfg.h, cfg.sigma_z))});
  return rows;
}

std::vector<RmseVsNoiseRow> experiment_rmse_vs_noise(const ExperimentConfig & cfg) {
  cfg.validate();
  std::vector<RmseVsNoiseRow> rows;
  for (double h : cfg.h_list) {
    const int k = static_cast<int>(std::lround(cfg.T / h));
    for (double s : cfg.sigma_list) rows.push_back({s, h, k, summarize(run_point(cfg, k, h, s))});
  }
  return rows;
}

SlopeFit fit_noise_slope(const std::vector<RmseVsNoiseRow> & rows) {
  std::vector<double> x;
  std::vector<double> y;
  for (const auto & r : rows) {
    if (!(r.sigma_z > 0.0) || !(r.s.rmse_map > 0.0) || !std::isfinite(r.s.rmse_map)) continue;
    x.push_back(std::log(r.sigma_z * std::sqrt(r.h)));
    y.push_back(std::log(r.s.rmse_map));
  }
  SlopeFit fit;
  fit.points = static_cast<int>(x.size());
  if (x.size() < 2) {
    fit.slope = fit.intercept = std::nan("");
    return fit;
  }
  const auto n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  fit.slope = sxx > 0.0 ? sxy / sxx : std::nan("");
  fit.intercept = my - fit.slope * mx;
  return fit;
}

}  // namespace bda
