/*
 * (C) Copyright 2026 The bda authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "bda/harness.hpp"

namespace bda {

namespace {

std::string trim(const std::string & s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(const std::string & key, const std::string & why) {
  throw Error(ErrorCode::Configuration, key + ": " + why);
}

template <class T>
T parse_number(const std::string & key, const std::string & text) {
  const std::string t = trim(text);
  T x{};
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), x);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    bad(key, "cannot parse '" + t + "'");
  }
  return x;
}

template <class T>
std::vector<T> parse_list(const std::string & key, const std::string & text) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!trim(item).empty()) out.push_back(parse_number<T>(key, item));
  }
  return out;
}

template <class T>
std::string join(const std::vector<T> & xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += ",";
    if constexpr (std::is_floating_point_v<T>) {
      s += format_double(xs[i]);
    } else {
      s += std::to_string(xs[i]);
    }
  }
  return s;
}

HessianMode parse_hessian(const std::string & v) {
  if (v == "dense") return HessianMode::DenseFD;
  if (v == "matfree") return HessianMode::MatrixFree;
  if (v == "auto") return HessianMode::Auto;
  bad("hessian", "expected dense, matfree or auto");
}

}  // namespace

void apply_setting(ExperimentConfig & cfg, const std::string & key_in, const std::string & value_in) {
  const std::string key = trim(key_in);
  const std::string value = trim(value_in);
  if (key == "d") cfg.d = parse_number<int>(key, value);
  else if (key == "f") cfg.f = parse_number<double>(key, value);
  else if (key == "h") cfg.h = parse_number<double>(key, value);
  else if (key == "sigma_z") cfg.sigma_z = parse_number<double>(key, value);
  else if (key == "k") cfg.k = parse_number<int>(key, value);
  else if (key == "k_list") cfg.k_list = parse_list<int>(key, value);
  else if (key == "sigma_list") cfg.sigma_list = parse_list<double>(key, value);
  else if (key == "h_list") cfg.h_list = parse_list<double>(key, value);
  else if (key == "T") cfg.T = parse_number<double>(key, value);
  else if (key == "scenario") cfg.scenario = value;
  else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "trials") cfg.trials = parse_number<int>(key, value);
  else if (key == "jmax_caps") cfg.jmax_caps = parse_list<int>(key, value);
  else if (key == "delta_min") cfg.delta_min = parse_number<double>(key, value);
  else if (key == "max_iters") cfg.max_iters = parse_number<int>(key, value);
  else if (key == "taylor_order") cfg.taylor_order = parse_number<int>(key, value);
  else if (key == "taylor_step") cfg.taylor_step = parse_number<double>(key, value);
  else if (key == "hessian") cfg.hessian = parse_hessian(value);
  else if (key == "stride") cfg.stride = parse_number<int>(key, value);
  else if (key == "filter_steps") cfg.filter_steps = parse_number<int>(key, value);
  else if (key == "jobs") cfg.jobs = parse_number<int>(key, value);
  else if (key == "u0") cfg.u0 = parse_list<double>(key, value);
  else if (key == "observations") cfg.observations = value;
  else if (key == "out") cfg.out = value;
  else bad(key, "unknown setting");
}

ExperimentConfig load_config(const std::string & path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::Io, "cannot open config " + path);
  ExperimentConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::Configuration, path + ":" + std::to_string(lineno) + ": expected key = value");
    }
    apply_setting(cfg, line.substr(0, eq), line.substr(eq + 1));
  }
  return cfg;
}

std::string to_config_text(const ExperimentConfig & cfg) {
  std::ostringstream os;
  os << "d = " << cfg.d << "\n"
     << "f = " << format_double(cfg.f) << "\n"
     << "h = " << format_double(cfg.h) << "\n"
     << "sigma_z = " << format_double(cfg.sigma_z) << "\n"
     << "k = " << cfg.k << "\n"
     << "k_list = " << join(cfg.k_list) << "\n"
     << "sigma_list = " << join(cfg.sigma_list) << "\n"
     << "h_list = " << join(cfg.h_list) << "\n"
     << "T = " << format_double(cfg.T) << "\n"
     << "scenario = " << cfg.scenario << "\n"
     << "seed = " << cfg.seed << "\n"
     << "trials = " << cfg.trials << "\n"
     << "jmax_caps = " << join(cfg.jmax_caps) << "\n"
     << "delta_min = " << format_double(cfg.delta_min) << "\n"
     << "max_iters = " << cfg.max_iters << "\n"
     << "taylor_order = " << cfg.taylor_order << "\n"
     << "taylor_step = " << format_double(cfg.taylor_step) << "\n"
     << "hessian = " << to_string(cfg.hessian) << "\n"
     << "stride = " << cfg.stride << "\n"
     << "filter_steps = " << cfg.filter_steps << "\n";
  if (cfg.u0) os << "u0 = " << join(*cfg.u0) << "\n";
  if (!cfg.observations.empty()) os << "observations = " << cfg.observations << "\n";
  os << "out = " << cfg.out << "\n";
  return os.str();
}

void ExperimentConfig::validate() const {
  auto positive = [](double x) { return x > 0.0 && std::isfinite(x); };
  if (d < 4) bad("d", "Lorenz-96 needs d >= 4");
  if (!positive(f)) bad("f", "forcing must be positive");
  if (!positive(h)) bad("h", "must be positive");
  if (!(sigma_z >= 0.0) || !std::isfinite(sigma_z)) bad("sigma_z", "must be non-negative");
  if (k < 1) bad("k", "must be >= 1");
  for (int x : k_list) {
    if (x < 1) bad("k_list", "entries must be >= 1");
  }
  for (double s : sigma_list) {
    if (!(s >= 0.0) || !std::isfinite(s)) bad("sigma_list", "entries must be non-negative");
  }
  for (double x : h_list) {
    if (!positive(x)) bad("h_list", "entries must be positive");
    if (positive(T) && std::abs(T / x - std::round(T / x)) > 1e-9 * (T / x)) {
      bad("h_list", "T must be a whole multiple of every h");
    }
  }
  if (!positive(T)) bad("T", "must be positive");
  if (scenario == "halfblocks") {
    if (d % 6 != 0) bad("scenario", "halfblocks needs d divisible by 6");
  } else if (scenario != "first3") {
    bad("scenario", "expected halfblocks or first3");
  }
  if (trials < 1) bad("trials", "must be >= 1");
  for (int c : jmax_caps) {
    if (c < 0 || c > kMaxDegree) bad("jmax_caps", "entries must lie in [0, 12]");
  }
  if (!(delta_min >= 0.0)) bad("delta_min", "must be non-negative");
  if (max_iters < 1) bad("max_iters", "must be >= 1");
  if (taylor_order < 1 || taylor_order > 30) bad("taylor_order", "must lie in [1, 30]");
  if (!(taylor_step >= 0.0)) bad("taylor_step", "must be non-negative");
  if (stride < 1) bad("stride", "must be >= 1");
  if (filter_steps < 0) bad("filter_steps", "must be non-negative");
  if (jobs < 1) bad("jobs", "must be >= 1");
  if (u0) {
    if (static_cast<int>(u0->size()) != d) bad("u0", "needs exactly d entries");
    Eigen::Map<const Vector> v(u0->data(), d);
    if (v.norm() > f * std::sqrt(static_cast<double>(d))) bad("u0", "outside the trapping ball");
  }
  if (out.empty()) bad("out", "must not be empty");
}

NewtonOptions ExperimentConfig::newton() const {
  NewtonOptions o;
  o.delta_min = delta_min;
  o.max_iters = max_iters;
  o.hessian = hessian;
  return o;
}

Vector ExperimentConfig::initial_state() const {
  if (u0) {
    if (static_cast<int>(u0->size()) != d) bad("u0", "expected d entries");
    return Eigen::Map<const Vector>(u0->data(), d);
  }
  Vector v(d);
  for (int i = 0; i < d; ++i) v[i] = static_cast<double>(d + 1 + i) / (2.0 * d);
  return v;
}

BilinearSystem ExperimentConfig::system() const { return lorenz96(d, f); }

ObservationOperator ExperimentConfig::observation() const {
  return scenario == "first3" ? scenario_first3(d) : scenario_half_blocks(d);
}

}  // namespace bda
