/*
 * (C) Copyright 2026 The bda authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace bda {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class ErrorCode {
  InvalidDimension,
  InvalidArgument,
  OutOfBall,
  StepTooLarge,
  NotInvertible,
  Numerical,
  InsufficientData,
  Configuration,
  DegenerateInput,
  OptimizationFailure,
  InitializationFailure,
  NotPositiveDefinite,
  MatrixFreeUnsupported,
  GridTooSmall,
  Io,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string & what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidDimension: return "invalid-dimension";
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::OutOfBall: return "out-of-ball";
    case ErrorCode::StepTooLarge: return "step-too-large";
    case ErrorCode::NotInvertible: return "not-invertible-this-far";
    case ErrorCode::Numerical: return "numerical-error";
    case ErrorCode::InsufficientData: return "insufficient-data";
    case ErrorCode::Configuration: return "configuration-error";
    case ErrorCode::DegenerateInput: return "degenerate-input";
    case ErrorCode::OptimizationFailure: return "optimization-failure";
    case ErrorCode::InitializationFailure: return "initialization-failure";
    case ErrorCode::NotPositiveDefinite: return "not-positive-definite";
    case ErrorCode::MatrixFreeUnsupported: return "matrix-free-unsupported";
    case ErrorCode::GridTooSmall: return "grid-too-small";
    case ErrorCode::Io: return "io-error";
  }
  return "unknown";
}

/// Relative slack used when checking ‖v‖ ≤ R on points produced by projection.
inline constexpr double kBallSlack = 1e-9;

}  // namespace bda
