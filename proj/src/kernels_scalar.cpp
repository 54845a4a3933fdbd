/*
 * (C) Copyright 2026 The bda authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "kernels_impl.hpp"

namespace bda::kernels::scalar {

void axpy(double a, const double * x, double * y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scale_add(double a, double * y, const double * x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = a * y[i] + x[i];
}

double dot(const double * x, const double * y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

double squared_distance(const double * x, const double * y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = x[i] - y[i];
    s += e * e;
  }
  return s;
}

void stencil_range(const StencilTerm * terms, std::size_t nterms, double scale,
                   const double * x, const double * y, double * out, std::size_t n,
                   std::size_t begin, std::size_t end) {
  const auto ni = static_cast<std::ptrdiff_t>(n);
  // Offsets are small next to n, so one conditional wrap replaces the modulo.
  auto wrap = [ni](std::ptrdiff_t a) {
    if (a < 0) return a + ni;
    if (a >= ni) return a - ni;
    return a;
  };
  for (std::size_t i = begin; i < end; ++i) {
    double acc = 0.0;
    for (std::size_t t = 0; t < nterms; ++t) {
      const std::ptrdiff_t a = wrap(static_cast<std::ptrdiff_t>(i) + terms[t].x_offset);
      const std::ptrdiff_t b = wrap(static_cast<std::ptrdiff_t>(i) + terms[t].y_offset);
      acc += terms[t].coeff * x[a] * y[b];
    }
    out[i] += scale * acc;
  }
}

void stencil(const StencilTerm * terms, std::size_t nterms, double scale,
             const double * x, const double * y, double * out, std::size_t n) {
  stencil_range(terms, nterms, scale, x, y, out, n, 0, n);
}

}  // namespace bda::kernels::scalar
