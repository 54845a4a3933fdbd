/*
 * (C) Copyright 2026 The bda authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "bda/harness.hpp"

namespace bda {

using nlohmann::json;

namespace {

json to_json(const Vector & v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

json summary_json(const RmseSummary & s) {
  return {{"rmse_x0", s.rmse_x0},
          {"rmse_map", s.rmse_map},
          {"stderr", s.stderr_map},
          {"failure_fraction", s.failure_fraction},
          {"converged_fraction", s.converged_fraction},
          {"mean_iterations", s.mean_iterations}};
}

}  // namespace

std::string rmse_vs_k_csv(const std::vector<RmseVsKRow> & rows) {
  std::ostringstream os;
  os << "k,rmse_x0,rmse_map,stderr,failure_fraction,converged_fraction\n";
  for (const auto & r : rows) {
    os << r.k << "," << format_double(r.s.rmse_x0) << "," << format_double(r.s.rmse_map) << ","
       << format_double(r.s.stderr_map) << "," << format_double(r.s.failure_fraction) << ","
       << format_double(r.s.converged_fraction) << "\n";
  }
  return os.str();
}

std::string rmse_vs_noise_csv(const std::vector<RmseVsNoiseRow> & rows) {
  std::ostringstream os;
  os << "sigma_z,h,k,rmse_map,stderr,rmse_x0,failure_fraction\n";
  for (const auto & r : rows) {
    os << format_double(r.sigma_z) << "," << format_double(r.h) << "," << r.k << ","
       << format_double(r.s.rmse_map) << "," << format_double(r.s.stderr_map) << ","
       << format_double(r.s.rmse_x0) << "," << format_double(r.s.failure_fraction) << "\n";
  }
  return os.str();
}

std::string noise_summary_json(const std::vector<RmseVsNoiseRow> & rows, const SlopeFit & fit) {
  json j;
  j["slope"] = fit.slope;
  j["intercept"] = fit.intercept;
  j["points"] = fit.points;
  json pts = json::array();
  for (const auto & r : rows) {
    pts.push_back({{"sigma_z", r.sigma_z}, {"h", r.h}, {"k", r.k}, {"summary", summary_json(r.s)}});
  }
  j["grid"] = pts;
  return j.dump(2) + "\n";
}

std::string report_json(const EstimateReport & rep, const ExperimentConfig & cfg) {
  json j;
  j["x0"] = to_json(rep.x0);
  j["u_map"] = to_json(rep.u_map);
  j["u_filter"] = to_json(rep.u_filter);
  j["init_method"] = rep.init_method;
  j["iterations"] = rep.trace.iterations();
  j["step_norms"] = rep.trace.step_norms;
  j["objective"] = rep.trace.objective;
  j["shifts"] = rep.trace.shifts;
  j["cg_iterations"] = rep.trace.cg_iterations;
  j["hessian"] = std::string(to_string(rep.trace.hessian_mode));
  j["converged"] = rep.trace.converged;
  j["boundary_warning"] = rep.trace.boundary_warning;
  j["rmse_x0"] = rep.rmse_x0 ? json(*rep.rmse_x0) : json(nullptr);
  j["rmse_map"] = rep.rmse_map ? json(*rep.rmse_map) : json(nullptr);
  j["config"] = {{"d", cfg.d}, {"f", cfg.f},         {"h", cfg.h},
                 {"k", cfg.k}, {"sigma_z", cfg.sigma_z}, {"seed", cfg.seed},
                 {"scenario", cfg.scenario}};
  return j.dump(2) + "\n";
}

std::string check_report_json(const std::string & text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception & e) {
    return std::string("not JSON: ") + e.what();
  }
  if (!j.is_object()) return "report is not an object";
  for (const char * key : {"x0", "u_map", "u_filter"}) {
    if (!j.contains(key) || !j[key].is_array() || j[key].empty()) return std::string(key) + " missing";
    for (const auto & x : j[key]) {
      if (!x.is_number()) return std::string(key) + " holds a non-number";
    }
    if (j[key].size() != j["x0"].size()) return std::string(key) + " has the wrong length";
  }
  if (!j.contains("iterations") || !j["iterations"].is_number_integer()) return "iterations missing";
  for (const char * key : {"step_norms", "objective"}) {
    if (!j.contains(key) || !j[key].is_array()) return std::string(key) + " missing";
  }
  if (j["step_norms"].size() != j["iterations"].get<std::size_t>()) {
    return "step_norms length differs from iterations";
  }
  if (!j.contains("converged") || !j["converged"].is_boolean()) return "converged missing";
  if (!j.contains("init_method") || !j["init_method"].is_string()) return "init_method missing";
  return {};
}

std::string filter_csv(const FilterOutput & out, double h, const std::optional<Matrix> & truth) {
  std::ostringstream os;
  const std::size_t d = out.estimates.empty() ? 0 : static_cast<std::size_t>(out.estimates[0].size());
  os << "index,t,refreshed,failed";
  for (std::size_t i = 0; i < d; ++i) os << ",u" << i + 1;
  if (truth) os << ",rmse";
  os << "\n";
  for (std::size_t r = 0; r < out.estimates.size(); ++r) {
    const Vector & e = out.estimates[r];
    os << r << "," << format_double(static_cast<double>(r) * h) << "," << int(out.refreshed[r]) << ","
       << int(out.failed[r]);
    for (Eigen::Index i = 0; i < e.size(); ++i) os << "," << format_double(e[i]);
    if (truth) os << "," << format_double(rmse(e, truth->row(static_cast<Eigen::Index>(r)).transpose()));
    os << "\n";
  }
  return os.str();
}

std::string filter_json(const FilterOutput & out, const ExperimentConfig & cfg) {
  json j;
  int refreshes = 0;
  int failures = 0;
  for (std::size_t r = 0; r < out.estimates.size(); ++r) {
    refreshes += out.refreshed[r];
    failures += out.failed[r];
  }
  j["rows"] = out.estimates.size();
  j["stride"] = cfg.stride;
  j["refreshes"] = refreshes;
  j["failures"] = failures;
  j["converged"] = failures == 0 && refreshes > 0;
  j["u_filter"] = out.estimates.empty() ? json::array() : to_json(out.estimates.back());
  return j.dump(2) + "\n";
}

void write_text_file(const std::string & path, const std::string & text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::Io, "cannot write " + path);
  os << text;
  if (!os) throw Error(ErrorCode::Io, "write failed for " + path);
}

}  // namespace bda
