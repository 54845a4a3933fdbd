/*
 * (C) Copyright 2026 The bda authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include "bda/common.hpp"

namespace bda {

/// Weights c with Σ_i c_i Y_i ≈ l-th derivative at t = 0 of the degree-j_max
/// least-squares polynomial through Y_0..Y_{k_hat}.
struct DerivCoefficients {
  int l = 0;
  int j_max = 0;
  int k_hat = 0;
  double h = 0.0;
  Vector c;
  double C_M = 0.0;
};

/// Everything the window and degree selection needs besides (l, j_max, k).
struct ErrorBudgetInputs {
  double h = 0.0;
  double sigma_z = 0.0;
  int d_o = 1;
  double C0 = 0.0;
  double C_der = 0.0;
  double H_norm = 1.0;
};

struct DerivEstimate {
  int l = 0;
  Vector value;
  int k_hat_used = 0;
  int j_max_used = 0;
};

struct HilbertLimit {
  double entry;       // [K^{-1}]_{l+1,l+1}
  double sqrt_entry;  // the actual limit of C_M
};

inline constexpr int kMaxDegree = 12;

DerivCoefficients coefficients(int l, int j_max, int k_hat, double h);

/// Bias term plus noise term of the estimator error bound.
double error_budget(int l, int j_max, int k_hat, const ErrorBudgetInputs & in);

/// Real stationary point of the error budget in k_hat (0 when σ_Z = 0).
double window_stationary_point(int l, int j_max, const ErrorBudgetInputs & in);

/// Window minimizing the error budget over {2 j_max + 3, ..., k}.
int select_window(int l, int j_max, int k, const ErrorBudgetInputs & in);

/// Degree in [l, J_cap] minimizing C_M · g at its selected window; smallest on ties.
int select_degree(int l, int J_cap, int k, const ErrorBudgetInputs & in);

/// Estimate of H D^l u from rows Y_0..Y_k of `Y` (rows are observation times).
DerivEstimate estimate_derivative(const Matrix & Y, int l, int J_cap, const ErrorBudgetInputs & in);

HilbertLimit hilbert_limit(int l, int j_max);

}  // namespace bda
