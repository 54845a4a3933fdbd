/*
 * (C) Copyright 2026 The bda authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include <immintrin.h>

#include <algorithm>

#include "kernels_impl.hpp"

namespace bda::kernels::avx2 {

void axpy(double a, const double * x, double * y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vy = _mm256_loadu_pd(y + i);
    const __m256d vx = _mm256_loadu_pd(x + i);
    _mm256_storeu_pd(y + i, _mm256_add_pd(vy, _mm256_mul_pd(va, vx)));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void scale_add(double a, double * y, const double * x, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vy = _mm256_loadu_pd(y + i);
    const __m256d vx = _mm256_loadu_pd(x + i);
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_mul_pd(va, vy), vx));
  }
  for (; i < n; ++i) y[i] = a * y[i] + x[i];
}

namespace {
inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}
}  // namespace

double dot(const double * x, const double * y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    acc1 = _mm256_add_pd(acc1,
                         _mm256_mul_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4)));
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

double squared_distance(const double * x, const double * y, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d e = _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    acc = _mm256_add_pd(acc, _mm256_mul_pd(e, e));
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    const double e = x[i] - y[i];
    s += e * e;
  }
  return s;
}

void stencil(const StencilTerm * terms, std::size_t nterms, double scale,
             const double * x, const double * y, double * out, std::size_t n) {
  if (nterms == 0 || n == 0) return;
  int lo = 0;
  int hi = 0;
  for (std::size_t t = 0; t < nterms; ++t) {
    lo = std::min({lo, terms[t].x_offset, terms[t].y_offset});
    hi = std::max({hi, terms[t].x_offset, terms[t].y_offset});
  }
  // Interior [begin, end) never wraps.
  const auto ni = static_cast<std::ptrdiff_t>(n);
  const std::ptrdiff_t begin = -lo;
  const std::ptrdiff_t end = ni - hi;
  if (end - begin < 4) {
    scalar::stencil(terms, nterms, scale, x, y, out, n);
    return;
  }
  scalar::stencil_range(terms, nterms, scale, x, y, out, n, 0, static_cast<std::size_t>(begin));
  const __m256d vs = _mm256_set1_pd(scale);
  std::ptrdiff_t i = begin;
  for (; i + 4 <= end; i += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t t = 0; t < nterms; ++t) {
      const __m256d c = _mm256_set1_pd(terms[t].coeff);
      const __m256d vx = _mm256_loadu_pd(x + i + terms[t].x_offset);
      const __m256d vy = _mm256_loadu_pd(y + i + terms[t].y_offset);
      acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_mul_pd(c, vx), vy));
    }
    const __m256d vo = _mm256_loadu_pd(out + i);
    _mm256_storeu_pd(out + i, _mm256_add_pd(vo, _mm256_mul_pd(vs, acc)));
  }
  scalar::stencil_range(terms, nterms, scale, x, y, out, n, static_cast<std::size_t>(i), n);
}

}  // namespace bda::kernels::avx2
