/*
 * (C) Copyright 2026 The bda authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "bda/deriv_est.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bda {

namespace {

void check_degree(int l, int j_max) {
  if (l < 0) throw Error(ErrorCode::InvalidArgument, "derivative order must be non-negative");
  if (j_max < l) throw Error(ErrorCode::InvalidArgument, "polynomial degree must be >= l");
  if (j_max > kMaxDegree) {
    throw Error(ErrorCode::InvalidArgument, "polynomial degree above 12 is too ill-conditioned");
  }
}

// Rows (i/k_hat)^j, j = 0..j_max, with 0^0 = 1.
Matrix design(int j_max, int k_hat) {
  Matrix M(j_max + 1, k_hat + 1);
  for (int i = 0; i <= k_hat; ++i) {
    const double x = k_hat > 0 ? static_cast<double>(i) / k_hat : 0.0;
    double p = 1.0;
    for (int j = 0; j <= j_max; ++j) {
      M(j, i) = p;
      p *= x;
    }
  }
  return M;
}

// Least-squares weights w = M'(MM')^{-1} e_l and the entry [(MM')^{-1}]_{ll},
// through a QR factorization of M' rather than the squared normal matrix.
struct Weights {
  Vector w;
  double diag;
};

Weights ls_weights(const Matrix & M, int l) {
  const Matrix Mt = M.transpose();
  const Eigen::HouseholderQR<Matrix> qr(Mt);
  const int n = static_cast<int>(M.rows());
  const Matrix R = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
  const double rmax = R.diagonal().cwiseAbs().maxCoeff();
  if (!(R.diagonal().cwiseAbs().minCoeff() > 1e-12 * rmax)) {
    throw Error(ErrorCode::Numerical, "least-squares design of the derivative estimator is singular");
  }
  Vector e = Vector::Zero(n);
  e[l] = 1.0;
  // z = R^{-T} e_l, then w = Q [z; 0]
  const Vector z = R.transpose().triangularView<Eigen::Lower>().solve(e);
  Vector full = Vector::Zero(Mt.rows());
  full.head(n) = z;
  Weights out;
  out.w = qr.householderQ() * full;
  out.diag = z.squaredNorm();
  return out;
}

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

double C_M_of(int l, int j_max, int k_hat) {
  return std::sqrt(k_hat * ls_weights(design(j_max, k_hat), l).diag);
}

}  // namespace

DerivCoefficients coefficients(int l, int j_max, int k_hat, double h) {
  check_degree(l, j_max);
  if (k_hat < j_max) throw Error(ErrorCode::InsufficientData, "window shorter than the degree");
  if (!(h > 0.0)) throw Error(ErrorCode::InvalidArgument, "h must be positive");
  const Matrix M = design(j_max, k_hat);
  const Weights lw = ls_weights(M, l);
  DerivCoefficients out;
  out.l = l;
  out.j_max = j_max;
  out.k_hat = k_hat;
  out.h = h;
  out.c = (factorial(l) / std::pow(k_hat * h, l)) * lw.w;
  out.C_M = std::sqrt(k_hat * lw.diag);
  return out;
}

double error_budget(int l, int j_max, int k_hat, const ErrorBudgetInputs & in) {
  const double x = k_hat * in.h;
  const double bias = in.C0 * in.H_norm * std::pow(in.C_der, j_max + 1) / std::sqrt(j_max + 1.5) *
                      std::pow(x, j_max + 1 - l);
  const double noise = std::pow(x, -l - 0.5) * in.sigma_z * std::sqrt(in.h) *
                       std::sqrt(2.0 * in.d_o * std::log(in.d_o + 1.0));
  return bias + (in.sigma_z > 0.0 ? noise : 0.0);
}

double window_stationary_point(int l, int j_max, const ErrorBudgetInputs & in) {
  if (!(in.sigma_z > 0.0)) return 0.0;
  // g(x) = a x^p + b x^{-q}, x = k_hat h; g'(x) = 0 at x^{p+q} = q b / (p a).
  const double p = j_max + 1 - l;
  const double q = l + 0.5;
  const double log_a = std::log(in.C0) + std::log(in.H_norm) + (j_max + 1) * std::log(in.C_der) -
                       0.5 * std::log(j_max + 1.5);
  const double log_b = std::log(in.sigma_z) + 0.5 * std::log(in.h) +
                       0.5 * std::log(2.0 * in.d_o * std::log(in.d_o + 1.0));
  const double log_x = (std::log(q) + log_b - std::log(p) - log_a) / (p + q);
  return std::exp(log_x) / in.h;
}

int select_window(int l, int j_max, int k, const ErrorBudgetInputs & in) {
  check_degree(l, j_max);
  const int lo = 2 * j_max + 3;
  if (k < lo) throw Error(ErrorCode::InsufficientData, "need k >= 2 j_max + 3 observations");
  const double x = window_stationary_point(l, j_max, in);
  if (!(x > lo)) return lo;
  if (x >= k) return k;
  const int fl = static_cast<int>(std::floor(x));
  const int ce = static_cast<int>(std::ceil(x));
  if (fl == ce) return fl;
  return error_budget(l, j_max, ce, in) < error_budget(l, j_max, fl, in) ? ce : fl;
}

int select_degree(int l, int J_cap, int k, const ErrorBudgetInputs & in) {
  if (J_cap < l) throw Error(ErrorCode::Configuration, "degree cap below the derivative order");
  if (k < 2 * l + 3) throw Error(ErrorCode::InsufficientData, "need k >= 2 l + 3 observations");
  const int top = std::min({J_cap, (k - 3) / 2, kMaxDegree});
  int best = l;
  double best_score = std::numeric_limits<double>::infinity();
  for (int j = l; j <= top; ++j) {
    const int kh = select_window(l, j, k, in);
    const double score = C_M_of(l, j, kh) * error_budget(l, j, kh, in);
    if (score < best_score) {
      best_score = score;
      best = j;
    }
  }
  return best;
}

DerivEstimate estimate_derivative(const Matrix & Y, int l, int J_cap, const ErrorBudgetInputs & in) {
  const int k = static_cast<int>(Y.rows()) - 1;
  const int j = select_degree(l, J_cap, k, in);
  const int kh = select_window(l, j, k, in);
  const DerivCoefficients c = coefficients(l, j, kh, in.h);
  DerivEstimate out;
  out.l = l;
  out.j_max_used = j;
  out.k_hat_used = kh;
  out.value = Y.topRows(kh + 1).transpose() * c.c;
  return out;
}

HilbertLimit hilbert_limit(int l, int j_max) {
  check_degree(l, j_max);
  // Closed-form inverse of the Hilbert matrix of order n = j_max + 1:
  // [K^{-1}]_{ii} = (2i-1) C(n+i-1, n-i)^2 C(2i-2, i-1)^2, i = l + 1.
  const auto binom = [](int n, int r) {
    long double b = 1.0L;
    for (int t = 1; t <= r; ++t) b = b * (n - r + t) / t;
    return b;
  };
  const int n = j_max + 1;
  const int i = l + 1;
  const long double a = binom(n + i - 1, n - i);
  const long double c = binom(2 * i - 2, i - 1);
  const long double entry = (2 * i - 1) * a * a * c * c;
  return {static_cast<double>(entry), static_cast<double>(std::sqrt(entry))};
}

}  // namespace bda
