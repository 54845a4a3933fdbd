/*
 * (C) Copyright 2026 The bda authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "bda/gaussian_approx.hpp"
#include "bda/harness.hpp"
#include "bda/kernels.hpp"
#include "bda/oracle.hpp"
#include "bda/rng.hpp"

namespace bda {

namespace {

// Weights of the least-squares line through (i, Y_i), i = 0..5, at h = 1:
// slope (i - 2.5) / 17.5 and intercept 1/6 - 2.5 (i - 2.5) / 17.5.
struct StoredCoefficients {
  int l;
  double c[6];
};

constexpr StoredCoefficients kStoredTable[] = {
    {1, {-2.5 / 17.5, -1.5 / 17.5, -0.5 / 17.5, 0.5 / 17.5, 1.5 / 17.5, 2.5 / 17.5}},
    {0,
     {1.0 / 6 + 6.25 / 17.5, 1.0 / 6 + 3.75 / 17.5, 1.0 / 6 + 1.25 / 17.5, 1.0 / 6 - 1.25 / 17.5,
      1.0 / 6 - 3.75 / 17.5, 1.0 / 6 - 6.25 / 17.5}},
};

std::string num(double x) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << x;
  return os.str();
}

Vector normal_vector(int d, std::uint64_t seed, std::uint64_t offset) {
  const rng::NormalStream s(seed, 3);
  Vector z(d);
  for (int i = 0; i < d; ++i) z[i] = s.at(offset + static_cast<std::uint64_t>(i));
  return z;
}

// Point at radius `frac` R in a pseudo-random direction.
Vector point_in_ball(int d, double R, double frac, std::uint64_t seed) {
  const Vector z = normal_vector(d, seed, 0);
  return frac * R * z / z.norm();
}

class Suite {
 public:
  void check(const std::string & module, const std::string & name, bool ok,
             const std::string & detail) {
    out.push_back({module, name, ok, detail});
  }
  template <class F>
  void guarded(const std::string & module, const std::string & name, F && body) {
    try {
      body();
    } catch (const std::exception & e) {
      check(module, name, false, std::string("threw: ") + e.what());
    }
  }
  std::vector<SelftestCheck> out;
};

void kernel_checks(Suite & s) {
  s.guarded("kernels", "scalar and active ISA agree", [&] {
    const auto & sc = kernels::scalar_table();
    const auto & ac = kernels::active();
    const int n = 37;
    const Vector x = normal_vector(n, 1, 0);
    const Vector y = normal_vector(n, 1, 100);
    Vector a = y;
    Vector b = y;
    sc.axpy(0.3, x.data(), a.data(), n);
    ac.axpy(0.3, x.data(), b.data(), n);
    bool ok = a == b;
    const kernels::StencilTerm terms[] = {{1, -1, -0.5}, {-1, 1, -0.5}, {-1, -2, 0.5}, {-2, -1, 0.5}};
    Vector c = Vector::Zero(n);
    Vector e = Vector::Zero(n);
    sc.stencil(terms, 4, 1.5, x.data(), y.data(), c.data(), n);
    ac.stencil(terms, 4, 1.5, x.data(), y.data(), e.data(), n);
    ok = ok && c == e;
    const double d0 = sc.dot(x.data(), y.data(), n);
    const double d1 = ac.dot(x.data(), y.data(), n);
    ok = ok && std::abs(d0 - d1) <= 1e-14 * x.norm() * y.norm();
    s.check("kernels", "scalar and active ISA agree", ok,
            std::string("active=") + std::string(kernels::to_string(ac.isa)));
  });
}

void rng_checks(Suite & s) {
  s.guarded("rng", "Philox4x64-10 known answer", [&] {
    const auto r = rng::philox4x64({0, 0, 0, 0}, {0, 0});
    const bool ok = r[0] == 0x16554d9eca36314cULL && r[1] == 0xdb20fe9d672d0fdcULL &&
                    r[2] == 0xd7e772cee186176bULL && r[3] == 0x7e68b68aec7ba23bULL;
    s.check("rng", "Philox4x64-10 known answer", ok, "Random123 vector ctr=0 key=0");
  });
}

void dynamics_checks(Suite & s) {
  const BilinearSystem sys = lorenz96(12, 8.0);
  const auto & k = sys.constants();
  const double R = sys.radius();

  s.guarded("dynamics", "energy conservation <B(v,v),v> = 0", [&] {
    double worst = 0.0;
    const BilinearSystem toy = toy_system(2.0, 0.5);
    for (std::uint64_t i = 0; i < 20; ++i) {
      const Vector v = point_in_ball(12, R, 0.9, 100 + i);
      worst = std::max(worst, std::abs(sys.B(v, v).dot(v)) / std::pow(v.norm(), 3));
      const Vector w = point_in_ball(2, toy.radius(), 0.9, 200 + i);
      worst = std::max(worst, std::abs(toy.B(w, w).dot(w)) / std::pow(w.norm(), 3));
    }
    s.check("dynamics", "energy conservation <B(v,v),v> = 0", worst <= 1e-14,
            "max relative " + num(worst));
  });

  s.guarded("dynamics", "derivative bound |D^i v| <= C0 C_der^i i!", [&] {
    bool ok = true;
    double worst = 0.0;
    for (std::uint64_t n = 0; n < 20; ++n) {
      const Vector v = point_in_ball(12, R, 0.95, 300 + n);
      const auto D = derivative_series(sys, v, 8);
      double fact = 1.0;
      for (int i = 0; i <= 8; ++i) {
        if (i > 0) fact *= i;
        const double bound = k.C0 * std::pow(k.C_der, i) * fact;
        worst = std::max(worst, D[i].norm() / bound);
        ok = ok && D[i].norm() <= bound;
      }
    }
    s.check("dynamics", "derivative bound |D^i v| <= C0 C_der^i i!", ok,
            "max ratio " + num(worst));
  });

  s.guarded("dynamics", "Taylor remainder within C0 (C_der t)^(i+1)", [&] {
    bool ok = true;
    double worst = 0.0;
    for (double frac : {0.1, 0.25, 0.5}) {
      const double t = frac / k.C_der;
      for (std::uint64_t n = 0; n < 10; ++n) {
        const Vector v = point_in_ball(12, R, 0.9, 400 + n);
        const double diff = (taylor_step(sys, v, t, 12) - taylor_step(sys, v, t, 20)).norm();
        const double bound = k.C0 * std::pow(k.C_der * t, 13) + 1e-13 * R;
        worst = std::max(worst, diff / bound);
        ok = ok && diff <= bound;
      }
    }
    s.check("dynamics", "Taylor remainder within C0 (C_der t)^(i+1)", ok,
            "max ratio " + num(worst));
  });

  s.guarded("dynamics", "Gronwall sandwich on flows", [&] {
    bool ok = true;
    for (double t : {0.02, 0.1}) {
      for (std::uint64_t n = 0; n < 10; ++n) {
        const Vector u = point_in_ball(12, R, 0.5, 500 + n);
        const Vector v = u + 1e-3 * normal_vector(12, 600 + n, 0).normalized();
        const double d0 = (u - v).norm();
        const double dt = (flow(sys, u, t) - flow(sys, v, t)).norm();
        ok = ok && dt <= std::exp(k.G * t) * d0 && dt >= std::exp(-k.G * t) * d0;
        const Vector w = normal_vector(12, 700 + n, 0);
        const double tw = tangent_flow(sys, u, w, t, resolve_step(sys, t, {}), 12).norm();
        ok = ok && tw <= std::exp(k.G * t) * w.norm() && tw >= std::exp(-k.G * t) * w.norm();
      }
    }
    s.check("dynamics", "Gronwall sandwich on flows", ok, "G = " + num(k.G));
  });

  s.guarded("dynamics", "forward flow inverts backward flow", [&] {
    const double t = 1e-3;
    const int i_max = 20;
    const double back = k.C0 * std::pow(k.C_der * t, i_max + 1) / (1.0 - k.C_der * t);
    const double step = resolve_step(sys, t, {});
    const double fwd = (t + step) * std::exp(k.G * t) * k.C0 * k.C_der * std::pow(k.C_der * step, 12);
    // Double rounding of O(R) sums sets a floor far above both truncation bounds.
    const double tol = 2.0 * (back + fwd) + 64.0 * std::numeric_limits<double>::epsilon() * R;
    double worst = 0.0;
    for (std::uint64_t n = 0; n < 10; ++n) {
      const Vector v = point_in_ball(12, R, 0.5, 800 + n);
      const Vector back_v = project_ball(flow_backward(sys, v, t, i_max), R);
      worst = std::max(worst, (flow(sys, back_v, t) - v).norm());
    }
    s.check("dynamics", "forward flow inverts backward flow", worst <= tol,
            "max error " + num(worst) + " tol " + num(tol));
  });

  s.guarded("dynamics", "tangent/adjoint transpose identity", [&] {
    double worst = 0.0;
    for (std::uint64_t n = 0; n < 5; ++n) {
      const Vector v = point_in_ball(12, R, 0.5, 900 + n);
      const Trajectory traj(sys, v, 1e-2, 5);
      const Vector w = normal_vector(12, 1000 + n, 0);
      std::vector<Vector> z;
      for (int j = 0; j <= 5; ++j) z.push_back(normal_vector(12, 1100 + n, 20 * j));
      const auto tw = traj.tangent(w);
      double lhs = 0.0;
      double scale = 0.0;
      for (int j = 0; j <= 5; ++j) {
        lhs += tw[j].dot(z[j]);
        scale += tw[j].norm() * z[j].norm();
      }
      const double rhs = w.dot(traj.adjoint(z));
      worst = std::max(worst, std::abs(lhs - rhs) / scale);
    }
    s.check("dynamics", "tangent/adjoint transpose identity", worst <= 1e-10,
            "max relative " + num(worst));
  });
}

SmoothingProblem small_problem(double sigma, int k, std::uint64_t seed) {
  const BilinearSystem sys = lorenz96(12, 8.0);
  ObservationSetup setup{scenario_half_blocks(12), sigma, 1e-2, k};
  Vector u0(12);
  for (int i = 0; i < 12; ++i) u0[i] = (13.0 + i) / 24.0;
  return SmoothingProblem{sys, setup, generate(sys, setup, u0, seed)};
}

void solver_checks(Suite & s) {
  s.guarded("map_solver", "adjoint gradient matches finite differences", [&] {
    const SmoothingProblem p = small_problem(1e-3, 10, 5);
    const Vector v = p.record.truth->row(0).transpose() + 1e-2 * normal_vector(12, 1200, 0);
    const Vector ga = gradient(p, v, GradientMode::Adjoint).grad;
    const Vector gf = gradient(p, v, GradientMode::FiniteDifference).grad;
    const double rel = (ga - gf).norm() / gf.norm();
    s.check("map_solver", "adjoint gradient matches finite differences", rel <= 1e-5,
            "relative " + num(rel));
  });

  s.guarded("gaussian_approx", "A_k positive definite at the small-noise point", [&] {
    const SmoothingProblem p = small_problem(1e-4, 20, 6);
    const AkBk ab = assemble_AkBk(p, p.record.truth->row(0).transpose());
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(ab.A, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues()(0);
    s.check("gaussian_approx", "A_k positive definite at the small-noise point", lo > 0.0,
            "smallest eigenvalue " + num(lo));
  });
}

void deriv_checks(Suite & s, const SelftestOptions & opt) {
  s.guarded("deriv_est", "polynomial exactness", [&] {
    const double h = 1e-2;
    const int kh = 12;
    // Y(t) = 0.7 - 1.3 t + 2.1 t^2 - 0.4 t^3 has D^l Y(0) = {0.7, -1.3, 4.2, -2.4}.
    const double exact[] = {0.7, -1.3, 4.2, -2.4};
    double worst = 0.0;
    for (int j = 3; j <= 4; ++j) {
      for (int l = 0; l <= 3; ++l) {
        const DerivCoefficients c = coefficients(l, j, kh, h);
        double est = 0.0;
        for (int i = 0; i <= kh; ++i) {
          const double t = i * h;
          est += c.c[i] * (0.7 - 1.3 * t + 2.1 * t * t - 0.4 * t * t * t);
        }
        worst = std::max(worst, std::abs(est - exact[l]) / std::max(1.0, std::abs(exact[l])));
      }
    }
    s.check("deriv_est", "polynomial exactness", worst <= 1e-9, "max relative " + num(worst));
  });

  s.guarded("deriv_est", "stored coefficient table", [&] {
    double worst = 0.0;
    for (const auto & row : kStoredTable) {
      const DerivCoefficients c = coefficients(row.l, 1, 5, 1.0);
      for (int i = 0; i < 6; ++i) {
        double stored = row.c[i];
        if (opt.corrupt_coefficient_table && row.l == 1 && i == 2) stored += 1e-3;
        worst = std::max(worst, std::abs(c.c[i] - stored));
      }
    }
    s.check("deriv_est", "stored coefficient table", worst <= 1e-12, "max deviation " + num(worst));
  });

  s.guarded("deriv_est", "window and degree selection equal brute-force argmin", [&] {
    const BilinearSystem sys = lorenz96(12, 8.0);
    bool ok = true;
    int cases = 0;
    for (double sigma : {1e-6, 1e-3, 1e-1}) {
      for (double h : {1e-3, 1e-2}) {
        ErrorBudgetInputs in{h, sigma, 6, sys.constants().C0, sys.constants().C_der, 1.0};
        for (int k : {11, 30, 100}) {
          for (int l = 0; l <= 2; ++l) {
            int best_deg = -1;
            double best_deg_score = std::numeric_limits<double>::infinity();
            for (int j = l; j <= 4; ++j) {
              if (k < 2 * j + 3) break;
              int best_w = -1;
              double best_g = std::numeric_limits<double>::infinity();
              for (int kh = 2 * j + 3; kh <= k; ++kh) {
                const double g = error_budget(l, j, kh, in);
                if (g < best_g) {
                  best_g = g;
                  best_w = kh;
                }
              }
              ok = ok && select_window(l, j, k, in) == best_w;
              const double score = coefficients(l, j, best_w, h).C_M * best_g;
              if (score < best_deg_score) {
                best_deg_score = score;
                best_deg = j;
              }
              ++cases;
            }
            if (best_deg >= 0) ok = ok && select_degree(l, 4, k, in) == best_deg;
          }
        }
      }
    }
    s.check("deriv_est", "window and degree selection equal brute-force argmin", ok,
            std::to_string(cases) + " cases");
  });
}

void init_checks(Suite & s) {
  s.guarded("init_est", "Lorenz-96 half-block round trip", [&] {
    const BilinearSystem sys = lorenz96(12, 8.0);
    const ObservationOperator H = scenario_half_blocks(12);
    double worst = 0.0;
    for (std::uint64_t n = 0; n < 5; ++n) {
      const Vector u = point_in_ball(12, sys.radius(), 0.3, 1300 + n);
      const auto D = derivative_series(sys, u, 1);
      const Vector back = reconstruct_halfblocks({H.apply(D[0]), H.apply(D[1])}, 8.0, sys.radius());
      worst = std::max(worst, (back - u).norm() / u.norm());
    }
    s.check("init_est", "Lorenz-96 half-block round trip", worst <= 1e-8,
            "max relative " + num(worst));
  });

  s.guarded("init_est", "Lorenz-96 first-3 round trip", [&] {
    const int d = 7;
    const BilinearSystem sys = lorenz96(d, 8.0);
    const ObservationOperator H = scenario_first3(d);
    const int j = first3_depth(d);
    double worst = 0.0;
    for (std::uint64_t n = 0; n < 5; ++n) {
      const Vector u = point_in_ball(d, sys.radius(), 0.3, 1400 + n);
      const auto D = derivative_series(sys, u, j);
      std::vector<Vector> obs;
      for (const auto & x : D) obs.push_back(H.apply(x));
      const Vector back = reconstruct_first3(obs, d, 8.0, sys.radius());
      worst = std::max(worst, (back - u).norm() / u.norm());
    }
    s.check("init_est", "Lorenz-96 first-3 round trip", worst <= 1e-8,
            "max relative " + num(worst));
  });
}

}  // namespace

bool SelftestSummary::passed() const {
  for (const auto & c : checks) {
    if (!c.passed) return false;
  }
  return !checks.empty();
}

std::vector<std::pair<std::string, std::pair<int, int>>> SelftestSummary::per_module() const {
  std::vector<std::pair<std::string, std::pair<int, int>>> out;
  for (const auto & c : checks) {
    auto it = std::find_if(out.begin(), out.end(), [&](const auto & e) { return e.first == c.module; });
    if (it == out.end()) {
      out.push_back({c.module, {0, 0}});
      it = out.end() - 1;
    }
    it->second.first += c.passed;
    it->second.second += 1;
  }
  return out;
}

SelftestSummary run_selftest(const SelftestOptions & opt) {
  const auto t0 = std::chrono::steady_clock::now();
  Suite s;
  kernel_checks(s);
  rng_checks(s);
  dynamics_checks(s);
  deriv_checks(s, opt);
  init_checks(s);
  solver_checks(s);
  SelftestSummary out;
  out.checks = std::move(s.out);
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace bda
