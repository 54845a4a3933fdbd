/*
 * (C) Copyright 2026 The bda authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "bda/harness.hpp"

namespace bda {

namespace {

// Exit codes.
constexpr int kOk = 0;
constexpr int kNotConverged = 1;
constexpr int kLibraryError = 2;

struct Overrides {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<std::string> out;
  std::optional<std::string> hessian;
  std::optional<int> stride;
};

ExperimentConfig resolve(const Overrides & o) {
  ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
  for (const auto & s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::Configuration, "--set expects key=value");
    apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
  }
  if (o.seed) cfg.seed = *o.seed;
  if (o.jobs) cfg.jobs = *o.jobs;
  if (o.out) cfg.out = *o.out;
  if (o.hessian) apply_setting(cfg, "hessian", *o.hessian);
  if (o.stride) cfg.stride = *o.stride;
  cfg.validate();
  return cfg;
}

std::string state_csv(const Matrix & X, double h, const char * prefix) {
  std::ostringstream os;
  os << "t";
  for (Eigen::Index i = 0; i < X.cols(); ++i) os << "," << prefix << i + 1;
  os << "\n";
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    os << format_double(static_cast<double>(r) * h);
    for (Eigen::Index i = 0; i < X.cols(); ++i) os << "," << format_double(X(r, i));
    os << "\n";
  }
  return os.str();
}

// Observations from the configured file, or simulated from the seed.
ObservationRecord load_or_simulate(const ExperimentConfig & cfg, const BilinearSystem & sys,
                                   const ObservationSetup & setup) {
  if (cfg.observations.empty()) {
    return generate(sys, setup, cfg.initial_state(), cfg.seed, cfg.integrator());
  }
  std::ifstream is(cfg.observations);
  if (!is) throw Error(ErrorCode::Io, "cannot open " + cfg.observations);
  ObservationRecord rec;
  rec.Y = read_observations_csv(is);
  rec.seed = cfg.seed;
  if (rec.Y.rows() < setup.k + 1) {
    throw Error(ErrorCode::InsufficientData, "observation file has fewer than k+1 rows");
  }
  if (rec.Y.rows() > setup.k + 1 && setup.k + 1 > 0) rec.Y.conservativeResize(setup.k + 1, rec.Y.cols());
  return rec;
}

int cmd_simulate(const ExperimentConfig & cfg) {
  const BilinearSystem sys = cfg.system();
  const ObservationSetup setup{cfg.observation(), cfg.sigma_z, cfg.h, cfg.k};
  const ObservationRecord rec = generate(sys, setup, cfg.initial_state(), cfg.seed, cfg.integrator());
  std::ostringstream obs;
  write_observations_csv(obs, rec.Y, cfg.h);
  write_text_file(cfg.out + "_obs.csv", obs.str());
  write_text_file(cfg.out + "_truth.csv", state_csv(*rec.truth, cfg.h, "u"));
  Matrix resid(rec.Y.rows(), rec.Y.cols());
  for (Eigen::Index r = 0; r < rec.Y.rows(); ++r) {
    resid.row(r) = rec.Y.row(r) - setup.H.apply(rec.truth->row(r).transpose()).transpose();
  }
  write_text_file(cfg.out + "_noise.csv", state_csv(resid, cfg.h, "z"));
  std::cout << "wrote " << rec.Y.rows() << " observation rows to " << cfg.out << "_obs.csv\n";
  return kOk;
}

int cmd_smooth(const ExperimentConfig & cfg) {
  const BilinearSystem sys = cfg.system();
  const ObservationSetup setup{cfg.observation(), cfg.sigma_z, cfg.h, cfg.k};
  SmoothingProblem p{sys, setup, load_or_simulate(cfg, sys, setup), cfg.integrator()};
  const EstimateReport rep = smooth(p, make_smooth_config(cfg, sys, setup));
  write_text_file(cfg.out + ".json", report_json(rep, cfg));
  std::cout << "init " << rep.init_method << ", " << rep.trace.iterations() << " Newton steps, "
            << (rep.trace.converged ? "converged" : "not converged");
  if (rep.rmse_map) std::cout << ", rmse_x0 " << *rep.rmse_x0 << ", rmse_map " << *rep.rmse_map;
  std::cout << "\n";
  return rep.trace.converged ? kOk : kNotConverged;
}

int cmd_filter(const ExperimentConfig & cfg) {
  const BilinearSystem sys = cfg.system();
  const ObservationSetup window{cfg.observation(), cfg.sigma_z, cfg.h, cfg.k};
  const ObservationSetup full{cfg.observation(), cfg.sigma_z, cfg.h, cfg.k + cfg.filter_steps};
  const ObservationRecord rec = load_or_simulate(cfg, sys, full);
  const FilterOutput out =
      filter_stream(sys, window, rec.Y, cfg.stride, make_smooth_config(cfg, sys, window), cfg.integrator());
  write_text_file(cfg.out + ".csv", filter_csv(out, cfg.h, rec.truth));
  write_text_file(cfg.out + ".json", filter_json(out, cfg));
  int failures = 0;
  int refreshes = 0;
  for (std::size_t i = 0; i < out.failed.size(); ++i) {
    failures += out.failed[i];
    refreshes += out.refreshed[i];
  }
  std::cout << out.estimates.size() << " filter rows, " << refreshes << " smoothing solves, "
            << failures << " failed\n";
  return failures == 0 && refreshes > 0 ? kOk : kNotConverged;
}

int cmd_rmse_vs_k(const ExperimentConfig & cfg) {
  const auto rows = experiment_rmse_vs_k(cfg);
  const std::string csv = rmse_vs_k_csv(rows);
  write_text_file(cfg.out + ".csv", csv);
  std::cout << csv;
  return kOk;
}

int cmd_rmse_vs_noise(const ExperimentConfig & cfg) {
  const auto rows = experiment_rmse_vs_noise(cfg);
  const SlopeFit fit = fit_noise_slope(rows);
  const std::string csv = rmse_vs_noise_csv(rows);
  write_text_file(cfg.out + ".csv", csv);
  write_text_file(cfg.out + ".summary.json", noise_summary_json(rows, fit));
  std::cout << csv << "slope " << format_double(fit.slope) << " over " << fit.points << " points\n";
  return kOk;
}

int cmd_selftest(bool corrupt) {
  SelftestOptions opt;
  opt.corrupt_coefficient_table = corrupt;
  const SelftestSummary s = run_selftest(opt);
  for (const auto & c : s.checks) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.module << ": " << c.name << " (" << c.detail
              << ")\n";
  }
  for (const auto & [module, counts] : s.per_module()) {
    std::cout << module << " " << counts.first << "/" << counts.second << "\n";
  }
  std::printf("selftest %s in %.1f s\n", s.passed() ? "passed" : "FAILED", s.seconds);
  return s.passed() ? kOk : kNotConverged;
}

void report_error(const std::string & code, const std::string & message) {
  nlohmann::json j{{"error", code}, {"message", message}};
  std::cerr << j.dump() << "\n";
}

}  // namespace

int run_cli(int argc, char ** argv) {
  CLI::App app{"Bayesian data assimilation for bilinear chaotic systems"};
  app.require_subcommand(1);
  app.fallthrough();
  Overrides o;
  app.add_option("--config", o.config, "key = value configuration file");
  app.add_option("--set", o.sets, "override one setting, key=value (repeatable)");
  app.add_option("--seed", o.seed, "random seed");
  app.add_option("--jobs", o.jobs, "worker threads for Monte-Carlo trials");
  app.add_option("--out", o.out, "output path prefix");
  app.add_option("--hessian", o.hessian, "Hessian mode")->check(CLI::IsMember({"dense", "matfree", "auto"}));
  app.add_option("--stride", o.stride, "filter refresh stride K");

  auto * sim = app.add_subcommand("simulate", "generate truth and observations");
  auto * smo = app.add_subcommand("smooth", "MAP estimate of the initial state");
  auto * fil = app.add_subcommand("filter", "online MAP estimates of the current state");
  auto * rk = app.add_subcommand("experiment-rmse-vs-k", "RMSE against the number of observations");
  auto * rn = app.add_subcommand("experiment-rmse-vs-noise", "RMSE against sigma_z sqrt(h)");
  auto * st = app.add_subcommand("selftest", "fast invariant suites");
  bool corrupt = false;
  st->add_flag("--corrupt-table", corrupt, "perturb the stored coefficient table")->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError & e) {
    return app.exit(e);
  }

  try {
    if (st->parsed()) return cmd_selftest(corrupt);
    const ExperimentConfig cfg = resolve(o);
    if (sim->parsed()) return cmd_simulate(cfg);
    if (smo->parsed()) return cmd_smooth(cfg);
    if (fil->parsed()) return cmd_filter(cfg);
    if (rk->parsed()) return cmd_rmse_vs_k(cfg);
    if (rn->parsed()) return cmd_rmse_vs_noise(cfg);
  } catch (const Error & e) {
    report_error(std::string(to_string(e.code())), e.what());
    return kLibraryError;
  } catch (const std::exception & e) {
    report_error("internal", e.what());
    return kLibraryError;
  }
  return kLibraryError;
}

}  // namespace bda
