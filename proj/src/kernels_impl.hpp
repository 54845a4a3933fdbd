/*
 * (C) Copyright 2026 The bda authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <cstddef>

#include "bda/kernels.hpp"

namespace bda::kernels {

namespace scalar {
void axpy(double a, const double * x, double * y, std::size_t n);
void scale_add(double a, double * y, const double * x, std::size_t n);
double dot(const double * x, const double * y, std::size_t n);
double squared_distance(const double * x, const double * y, std::size_t n);
void stencil(const StencilTerm * terms, std::size_t nterms, double scale,
             const double * x, const double * y, double * out, std::size_t n);
// Scalar stencil restricted to output indices [begin, end); used for wrap-around edges.
void stencil_range(const StencilTerm * terms, std::size_t nterms, double scale,
                   const double * x, const double * y, double * out, std::size_t n,
                   std::size_t begin, std::size_t end);
}  // namespace scalar

#if defined(BDA_WITH_AVX2)
namespace avx2 {
void axpy(double a, const double * x, double * y, std::size_t n);
void scale_add(double a, double * y, const double * x, std::size_t n);
double dot(const double * x, const double * y, std::size_t n);
double squared_distance(const double * x, const double * y, std::size_t n);
void stencil(const StencilTerm * terms, std::size_t nterms, double scale,
             const double * x, const double * y, double * out, std::size_t n);
}  // namespace avx2
#endif

}  // namespace bda::kernels
