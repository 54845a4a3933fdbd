/*
 * (C) Copyright 2026 The bda authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <cstddef>
#include <span>
#include <string_view>

namespace bda::kernels {

/// One term of a circulant bilinear stencil:
///   out[i] += coeff * x[(i + x_offset) mod n] * y[(i + y_offset) mod n].
struct StencilTerm {
  int x_offset;
  int y_offset;
  double coeff;
};

enum class Isa { Scalar, Avx2 };

std::string_view to_string(Isa isa);

/// Function table for the data-parallel inner loops. Every entry of every table
/// computes the same mathematical result; element-wise kernels are bit-identical
/// across tables, reductions may differ in the last bits (summation order).
struct KernelTable {
  Isa isa;
  // y += a * x
  void (*axpy)(double a, const double * x, double * y, std::size_t n);
  // y = a * y + x
  void (*scale_add)(double a, double * y, const double * x, std::size_t n);
  double (*dot)(const double * x, const double * y, std::size_t n);
  // sum_i (x_i - y_i)^2
  double (*squared_distance)(const double * x, const double * y, std::size_t n);
  // out += scale * sum_terms coeff * x[i+a] * y[i+b], indices mod n
  void (*stencil)(const StencilTerm * terms, std::size_t nterms, double scale,
                  const double * x, const double * y, double * out, std::size_t n);
};

const KernelTable & scalar_table();
bool isa_available(Isa isa);
/// Table for the requested ISA; throws if the ISA is unavailable on this CPU/build.
const KernelTable & table(Isa isa);

/// Table used by the library. Chosen once from CPU features; BDA_ISA=scalar|avx2
/// in the environment or force_isa() overrides the choice.
const KernelTable & active();
void force_isa(Isa isa);

// Convenience wrappers over the active table.
inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  active().axpy(a, x.data(), y.data(), y.size());
}
inline double dot(std::span<const double> x, std::span<const double> y) {
  return active().dot(x.data(), y.data(), x.size());
}

}  // namespace bda::kernels
