/*
 * (C) Copyright 2026 The bda authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bda/map_solver.hpp"

namespace bda {

/// Every experiment-level parameter, read from a `key = value` file and
/// overridden by command-line flags.
struct ExperimentConfig {
  int d = 12;
  double f = 8.0;
  double h = 1e-2;
  double sigma_z = 1e-3;
  int k = 50;
  std::vector<int> k_list{10, 20, 40, 60, 80, 100};
  std::vector<double> sigma_list{1e-5, 1e-4, 5e-4, 1e-3};
  std::vector<double> h_list{1e-3, 2e-3};
  /// Window length for the noise sweep; k = T / h at every grid point.
  double T = 0.1;
  std::string scenario = "halfblocks";  // halfblocks | first3
  std::uint64_t seed = 0;
  int trials = 20;
  /// Degree cap per derivative order; empty keeps the plan defaults.
  std::vector<int> jmax_caps;
  double delta_min = 0.0;
  int max_iters = 50;
  int taylor_order = 12;
  double taylor_step = 0.0;
  HessianMode hessian = HessianMode::Auto;
  int stride = 1;
  /// Extra observation rows beyond the first window when filtering.
  int filter_steps = 20;
  int jobs = 1;
  std::optional<std::vector<double>> u0;
  /// Observation CSV to smooth or filter; empty simulates from `seed`.
  std::string observations;
  std::string out = "bda_out";

  void validate() const;
  IntegratorOptions integrator() const { return {taylor_step, taylor_order}; }
  NewtonOptions newton() const;
  /// ((d+1)/(2d), (d+2)/(2d), ..., 1) unless u0 is set.
  Vector initial_state() const;
  BilinearSystem system() const;
  ObservationOperator observation() const;
};

/// Applies one `key = value` setting; unknown keys are configuration errors.
void apply_setting(ExperimentConfig & cfg, const std::string & key, const std::string & value);
/// Reads a config file: one `key = value` per line, `#` starts a comment.
ExperimentConfig load_config(const std::string & path);
/// Canonical text form, readable back by load_config.
std::string to_config_text(const ExperimentConfig & cfg);

/// Newton options and, when degree caps are configured, the adjusted default plan.
SmoothConfig make_smooth_config(const ExperimentConfig & cfg, const BilinearSystem & sys,
                                const ObservationSetup & setup);

/// Runs fn(0), ..., fn(n-1) on `jobs` workers; results come back in index order.
template <class R>
std::vector<R> run_pool(int n, int jobs, const std::function<R(int)> & fn);

struct TrialResult {
  std::uint64_t seed = 0;
  bool failed = false;
  std::string reason;
  double rmse_x0 = 0.0;
  double rmse_map = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// One synthetic record and one smoothing solve against the known truth.
TrialResult run_trial(const ExperimentConfig & cfg, int k, double h, double sigma_z,
                      std::uint64_t seed);

/// Root mean square over successful trials plus a delta-method standard error.
struct RmseSummary {
  double rmse_x0 = 0.0;
  double rmse_map = 0.0;
  double stderr_map = 0.0;
  double failure_fraction = 0.0;
  double converged_fraction = 0.0;
  double mean_iterations = 0.0;
};

RmseSummary summarize(const std::vector<TrialResult> & trials);

struct RmseVsKRow {
  int k = 0;
  RmseSummary s;
};

std::vector<RmseVsKRow> experiment_rmse_vs_k(const ExperimentConfig & cfg);

struct RmseVsNoiseRow {
  double sigma_z = 0.0;
  double h = 0.0;
  int k = 0;
  RmseSummary s;
};

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  int points = 0;
};

std::vector<RmseVsNoiseRow> experiment_rmse_vs_noise(const ExperimentConfig & cfg);
/// Least-squares line through (log σ_Z√h, log RMSE) over rows with σ_Z > 0.
SlopeFit fit_noise_slope(const std::vector<RmseVsNoiseRow> & rows);

// Output formatting. All numbers are written with 17 significant digits.
std::string rmse_vs_k_csv(const std::vector<RmseVsKRow> & rows);
std::string rmse_vs_noise_csv(const std::vector<RmseVsNoiseRow> & rows);
std::string noise_summary_json(const std::vector<RmseVsNoiseRow> & rows, const SlopeFit & fit);
std::string report_json(const EstimateReport & rep, const ExperimentConfig & cfg);
std::string filter_csv(const FilterOutput & out, double h, const std::optional<Matrix> & truth);
std::string filter_json(const FilterOutput & out, const ExperimentConfig & cfg);
/// Empty when the report has every required field with the right type,
/// otherwise the first problem found.
std::string check_report_json(const std::string & text);
void write_text_file(const std::string & path, const std::string & text);

struct SelftestCheck {
  std::string module;
  std::string name;
  bool passed = false;
  std::string detail;
};

struct SelftestOptions {
  /// Flips one entry of the stored derivative-coefficient table (used to show
  /// that the suite notices corruption).
  bool corrupt_coefficient_table = false;
};

struct SelftestSummary {
  std::vector<SelftestCheck> checks;
  double seconds = 0.0;
  bool passed() const;
  /// (passed, total) per module, in first-seen order.
  std::vector<std::pair<std::string, std::pair<int, int>>> per_module() const;
};

SelftestSummary run_selftest(const SelftestOptions & opt = {});

/// Entry point of the `bda` tool. Returns the process exit code.
int run_cli(int argc, char ** argv);

}  // namespace bda

#include "bda/detail/run_pool.hpp"
