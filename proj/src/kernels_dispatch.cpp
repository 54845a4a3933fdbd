/*
 * (C) Copyright 2026 The bda authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include <atomic>
#include <cstdlib>
#include <string>

#include "bda/common.hpp"
#include "kernels_impl.hpp"

namespace bda::kernels {

std::string_view to_string(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
  }
  return "unknown";
}

namespace {

const KernelTable kScalar{Isa::Scalar, scalar::axpy, scalar::scale_add, scalar::dot,
                          scalar::squared_distance, scalar::stencil};

#if defined(BDA_WITH_AVX2)
const KernelTable kAvx2{Isa::Avx2, avx2::axpy, avx2::scale_add, avx2::dot,
                        avx2::squared_distance, avx2::stencil};
#endif

const KernelTable * detect() {
  if (const char * env = std::getenv("BDA_ISA")) {
    const std::string want(env);
    if (want == "scalar") return &kScalar;
    if (want == "avx2" && isa_available(Isa::Avx2)) return &table(Isa::Avx2);
  }
  if (isa_available(Isa::Avx2)) return &table(Isa::Avx2);
  return &kScalar;
}

std::atomic<const KernelTable *> & active_slot() {
  static std::atomic<const KernelTable *> slot{detect()};
  return slot;
}

}  // namespace

const KernelTable & scalar_table() { return kScalar; }

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return true;
    case Isa::Avx2:
#if defined(BDA_WITH_AVX2)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
  }
  return false;
}

const KernelTable & table(Isa isa) {
  if (!isa_available(isa)) {
    throw Error(ErrorCode::InvalidArgument,
                "kernel ISA " + std::string(to_string(isa)) + " is not available");
  }
#if defined(BDA_WITH_AVX2)
  if (isa == Isa::Avx2) return kAvx2;
#endif
  return kScalar;
}

const KernelTable & active() { return *active_slot().load(std::memory_order_acquire); }

void force_isa(Isa isa) { active_slot().store(&table(isa), std::memory_order_release); }

}  // namespace bda::kernels
