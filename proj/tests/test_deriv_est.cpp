/*
 * (C) Copyright 2026 The bda authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "bda/deriv_est.hpp"
#include "bda/observation.hpp"
#include "test_util.hpp"

using namespace bda;

namespace {

using Real = long double;

struct OracleCoeffs {
  std::vector<Real> c;
  Real C_M;
};

// Normal equations in extended precision, Gaussian elimination with pivoting.
OracleCoeffs oracle_coefficients(int l, int j_max, int k_hat, Real h) {
  const int n = j_max + 1;
  std::vector<std::vector<Real>> G(n, std::vector<Real>(n + 1, 0.0L));
  const auto row = [&](int i, int j) { return std::pow(static_cast<Real>(i) / k_hat, static_cast<Real>(j)); };
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      for (int i = 0; i <= k_hat; ++i) G[a][b] += row(i, a) * row(i, b);
    }
    G[a][n] = a == l ? 1.0L : 0.0L;
  }
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r) {
      if (std::abs(G[r][col]) > std::abs(G[piv][col])) piv = r;
    }
    std::swap(G[col], G[piv]);
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const Real m = G[r][col] / G[col][col];
      for (int cc = col; cc <= n; ++cc) G[r][cc] -= m * G[col][cc];
    }
  }
  std::vector<Real> x(n);
  for (int a = 0; a < n; ++a) x[a] = G[a][n] / G[a][a];
  Real fact = 1.0L;
  for (int t = 2; t <= l; ++t) fact *= t;
  const Real scale = fact / std::pow(k_hat * h, static_cast<Real>(l));
  OracleCoeffs out;
  out.c.resize(k_hat + 1);
  for (int i = 0; i <= k_hat; ++i) {
    Real s = 0.0L;
    for (int a = 0; a < n; ++a) s += row(i, a) * x[a];
    out.c[i] = scale * s;
  }
  out.C_M = std::sqrt(k_hat * x[l]);
  return out;
}

Real oracle_g(int l, int j_max, int k_hat, const ErrorBudgetInputs & in) {
  const Real x = static_cast<Real>(k_hat) * in.h;
  const Real bias = static_cast<Real>(in.C0) * in.H_norm * std::pow(static_cast<Real>(in.C_der), j_max + 1) /
                    std::sqrt(j_max + 1.5L) * std::pow(x, static_cast<Real>(j_max + 1 - l));
  const Real noise = std::pow(x, -l - 0.5L) * in.sigma_z * std::sqrt(static_cast<Real>(in.h)) *
                     std::sqrt(2.0L * in.d_o * std::log(in.d_o + 1.0L));
  return bias + noise;
}

ErrorBudgetInputs d12_inputs(double sigma_z) {
  const BilinearSystem s = lorenz96(12, 8.0);
  return {1e-2, sigma_z, 6, s.constants().C0, s.constants().C_der, 1.0};
}

int brute_window(int l, int j, int k, const ErrorBudgetInputs & in) {
  int best = 2 * j + 3;
  for (int kh = best + 1; kh <= k; ++kh) {
    if (oracle_g(l, j, kh, in) < oracle_g(l, j, best, in)) best = kh;
  }
  return best;
}

}  // namespace

TEST_CASE("coefficients agree with extended-precision normal equations") {
  for (int j = 0; j <= 4; ++j) {
    for (int l = 0; l <= j; ++l) {
      for (int kh : {j, 2 * j + 3, 20, 101}) {
        if (kh < 1) continue;
        const auto c = coefficients(l, j, kh, 0.01);
        const auto o = oracle_coefficients(l, j, kh, 0.01L);
        REQUIRE(c.c.size() == kh + 1);
        double scale = 0.0;
        for (int i = 0; i <= kh; ++i) scale = std::max(scale, std::abs(static_cast<double>(o.c[i])));
        for (int i = 0; i <= kh; ++i) CHECK(std::abs(c.c[i] - static_cast<double>(o.c[i])) <= 1e-10 * scale);
        CHECK(c.C_M == doctest::Approx(static_cast<double>(o.C_M)).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("coefficient examples") {
  SUBCASE("degree zero is the sample mean") {
    for (int kh : {1, 4, 17}) {
      const auto c = coefficients(0, 0, kh, 0.3);
      for (int i = 0; i <= kh; ++i) CHECK(c.c[i] == doctest::Approx(1.0 / (kh + 1)));
      Vector q = Vector::Constant(kh + 1, 2.5);
      CHECK(c.c.dot(q) == doctest::Approx(2.5));
    }
  }
  SUBCASE("slope of a noiseless line") {
    const double h = 0.01;
    const auto c = coefficients(1, 1, 7, h);
    Vector y(8);
    for (int i = 0; i < 8; ++i) y[i] = 3.0 - 1.75 * i * h;
    CHECK(c.c.dot(y) == doctest::Approx(-1.75).epsilon(1e-12));
  }
  SUBCASE("invalid arguments") {
    CHECK_THROWS_AS(coefficients(2, 1, 10, 0.1), Error);
    CHECK_THROWS_AS(coefficients(0, 13, 40, 0.1), Error);
    CHECK_THROWS_AS(coefficients(0, 3, 2, 0.1), Error);
  }
}

TEST_CASE("polynomial exactness") {
  const double h = 0.01;
  for (int j = 0; j <= 6; ++j) {
    for (int l = 0; l <= j; ++l) {
      const int kh = 2 * j + 3 + 4;
      const auto c = coefficients(l, j, kh, h);
      for (int m = 0; m <= j; ++m) {
        // p(t) = (t - 0.02)^m, p^(l)(0) = m!/(m-l)! (-0.02)^(m-l)
        Vector y(kh + 1);
        for (int i = 0; i <= kh; ++i) y[i] = std::pow(i * h - 0.02, m);
        double expect = 0.0;
        if (m >= l) expect = std::tgamma(m + 1.0) / std::tgamma(m - l + 1.0) * std::pow(-0.02, m - l);
        // Rounding in the weighted sum scales with sum |c_i y_i|.
        const double scale = c.c.cwiseAbs().dot(y.cwiseAbs());
        CHECK(std::abs(c.c.dot(y) - expect) <= 1e-9 * std::max(scale, 1.0));
      }
    }
  }
}

TEST_CASE("error budget") {
  const ErrorBudgetInputs in = d12_inputs(1e-3);
  SUBCASE("matches the formula evaluated in extended precision") {
    const double g = error_budget(0, 1, 5, in);
    CHECK(g == doctest::Approx(static_cast<double>(oracle_g(0, 1, 5, in))).epsilon(1e-13));
    for (int l = 0; l <= 2; ++l) {
      for (int j = l; j <= 4; ++j) {
        for (int kh : {7, 30, 90}) {
          CHECK(error_budget(l, j, kh, in) ==
                doctest::Approx(static_cast<double>(oracle_g(l, j, kh, in))).epsilon(1e-12));
        }
      }
    }
  }
  SUBCASE("noise-free budget is the bias term") {
    ErrorBudgetInputs z = in;
    z.sigma_z = 0.0;
    const double bias = z.C0 * std::pow(z.C_der, 2) / std::sqrt(1.5 + 1.0) * std::pow(9 * z.h, 1);
    CHECK(error_budget(1, 1, 9, z) == doctest::Approx(bias));
  }
  SUBCASE("unimodal in the window length") {
    for (double s : {1e-6, 1e-4, 1e-2}) {
      ErrorBudgetInputs v = in;
      v.sigma_z = s;
      for (int l = 0; l <= 1; ++l) {
        int changes = 0;
        bool falling = true;
        for (int kh = 2 * l + 3; kh < 400; ++kh) {
          const bool down = error_budget(l, l, kh + 1, v) < error_budget(l, l, kh, v);
          if (down != falling) {
            ++changes;
            falling = down;
          }
        }
        CHECK(changes <= 1);
      }
    }
  }
}

TEST_CASE("window selection") {
  const ErrorBudgetInputs in = d12_inputs(1e-3);
  SUBCASE("the d=12 defaults select a five-step window") {
    CHECK(select_window(0, 1, 50, in) == 5);
  }
  SUBCASE("no noise picks the smallest window") {
    ErrorBudgetInputs z = in;
    z.sigma_z = 0.0;
    for (int j = 0; j <= 3; ++j) CHECK(select_window(0, j, 100, z) == 2 * j + 3);
  }
  SUBCASE("huge noise picks the whole record") {
    ErrorBudgetInputs z = in;
    z.sigma_z = 1e6;
    CHECK(select_window(0, 1, 40, z) == 40);
  }
  SUBCASE("too few observations") {
    try {
      (void)select_window(0, 2, 6, in);
      FAIL("expected an error");
    } catch (const Error & e) {
      CHECK(e.code() == ErrorCode::InsufficientData);
    }
  }
  SUBCASE("equals the brute-force argmin") {
    for (double s : {1e-7, 1e-5, 1e-3, 1e-1, 10.0}) {
      for (double h : {1e-3, 1e-2}) {
        ErrorBudgetInputs v = in;
        v.sigma_z = s;
        v.h = h;
        for (int l = 0; l <= 2; ++l) {
          for (int j = l; j <= 4; ++j) {
            for (int k : {2 * j + 3, 25, 80, 300}) {
              if (k < 2 * j + 3) continue;
              CHECK(select_window(l, j, k, v) == brute_window(l, j, k, v));
            }
          }
        }
      }
    }
  }
}

TEST_CASE("degree selection") {
  const ErrorBudgetInputs in = d12_inputs(1e-3);
  CHECK(select_degree(1, 1, 50, in) == 1);
  CHECK_THROWS_AS(select_degree(2, 1, 50, in), Error);
  for (double s : {1e-6, 1e-3, 1.0}) {
    ErrorBudgetInputs v = in;
    v.sigma_z = s;
    for (int l = 0; l <= 2; ++l) {
      for (int cap = l; cap <= 4; ++cap) {
        for (int k : {30, 120}) {
          int best = l;
          Real best_score = std::numeric_limits<Real>::infinity();
          for (int j = l; j <= std::min(cap, (k - 3) / 2); ++j) {
            const int kh = brute_window(l, j, k, v);
            const Real score = oracle_coefficients(l, j, kh, v.h).C_M * oracle_g(l, j, kh, v);
            if (score < best_score * (1 - 1e-12L)) {
              best_score = score;
              best = j;
            }
          }
          CHECK(select_degree(l, cap, k, v) == best);
        }
      }
    }
  }
}

TEST_CASE("derivative estimates") {
  SUBCASE("noiseless line gives its slope") {
    Matrix Y(41, 2);
    for (int i = 0; i <= 40; ++i) {
      Y(i, 0) = 1.0 + 2.0 * i * 0.01;
      Y(i, 1) = -4.0 - 0.5 * i * 0.01;
    }
    ErrorBudgetInputs in{0.01, 1e-3, 2, 50.0, 100.0, 1.0};
    const auto e = estimate_derivative(Y, 1, 1, in);
    CHECK(e.value[0] == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(e.value[1] == doctest::Approx(-0.5).epsilon(1e-10));
    CHECK(e.k_hat_used >= 2 * e.j_max_used + 3);
  }
  SUBCASE("constant observations") {
    const Matrix Y = Matrix::Constant(21, 3, 1.25);
    ErrorBudgetInputs in{0.01, 1e-2, 3, 50.0, 100.0, 1.0};
    const auto e = estimate_derivative(Y, 0, 2, in);
    CHECK((e.value - Vector::Constant(3, 1.25)).norm() < 1e-12);
  }
  SUBCASE("noiseless Lorenz-96 stays within the bias term") {
    const BilinearSystem sys = lorenz96(12, 8.0);
    const ObservationSetup setup{scenario_half_blocks(12), 0.0, 1e-2, 20};
    const Vector u0 = test::point_at_radius(12, sys.radius(), 0.4, 3);
    const auto rec = generate(sys, setup, u0, 0);
    const ErrorBudgetInputs in = [&] {
      ErrorBudgetInputs x = d12_inputs(0.0);
      return x;
    }();
    for (int l = 0; l <= 1; ++l) {
      const auto e = estimate_derivative(rec.Y, l, 1, in);
      const auto D = derivative_series(sys, u0, l);
      const double err = (e.value - setup.H.apply(D[l])).norm();
      CHECK(err <= error_budget(l, e.j_max_used, e.k_hat_used, in));
    }
  }
  SUBCASE("noise enters linearly with standard deviation |c| sigma") {
    const BilinearSystem sys = lorenz96(12, 8.0);
    const double sigma = 1e-3;
    const ObservationSetup setup{scenario_half_blocks(12), 0.0, 1e-2, 30};
    const auto clean = generate(sys, setup, test::point_at_radius(12, sys.radius(), 0.4, 4), 0);
    const ErrorBudgetInputs in = d12_inputs(sigma);
    const auto base = estimate_derivative(clean.Y, 1, 1, in);
    const double cn = coefficients(1, base.j_max_used, base.k_hat_used, 1e-2).c.norm();
    const int n = 10000;
    double sum = 0.0;
    double sq = 0.0;
    for (int s = 0; s < n; ++s) {
      const rng::NormalStream z(static_cast<std::uint64_t>(s), 0);
      Matrix Y = clean.Y;
      for (Eigen::Index i = 0; i < Y.size(); ++i) Y.data()[i] += sigma * z.at(static_cast<std::uint64_t>(i));
      const double e = estimate_derivative(Y, 1, 1, in).value[0] - base.value[0];
      sum += e;
      sq += e * e;
    }
    const double sd = std::sqrt(sq / n - (sum / n) * (sum / n));
    CHECK(sd <= 1.05 * cn * sigma);
    CHECK(sd >= 0.95 * cn * sigma);
    CHECK(std::abs(sum / n) < 5 * cn * sigma / std::sqrt(n));
  }
}

TEST_CASE("Hilbert limit") {
  CHECK(hilbert_limit(1, 1).entry == doctest::Approx(12.0));
  CHECK(hilbert_limit(0, 1).entry == doctest::Approx(4.0));
  CHECK(hilbert_limit(0, 0).entry == doctest::Approx(1.0));
  CHECK(hilbert_limit(1, 1).sqrt_entry == doctest::Approx(std::sqrt(12.0)));
  CHECK_THROWS_AS(hilbert_limit(0, 13), Error);

  SUBCASE("agrees with a numerical inverse") {
    for (int j = 0; j <= 6; ++j) {
      Matrix K(j + 1, j + 1);
      for (int a = 0; a <= j; ++a) {
        for (int b = 0; b <= j; ++b) K(a, b) = 1.0 / (a + b + 1);
      }
      const Matrix Ki = K.inverse();
      for (int l = 0; l <= j; ++l) CHECK(hilbert_limit(l, j).entry == doctest::Approx(Ki(l, l)).epsilon(1e-6));
    }
  }
  SUBCASE("C_M approaches the square root monotonically") {
    for (int j = 1; j <= 3; ++j) {
      for (int l = 0; l <= j; ++l) {
        const double lim = hilbert_limit(l, j).sqrt_entry;
        double prev = std::numeric_limits<double>::infinity();
        for (int kh : {100, 1000, 10000}) {
          const double err = std::abs(coefficients(l, j, kh, 1.0).C_M - lim);
          CHECK(err < prev);
          prev = err;
        }
        CHECK(prev < 1e-2 * lim);
      }
    }
  }
}
