/*
 * (C) Copyright 2026 The bda authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bda/dynamics.hpp"

namespace bda {

/// Linear observation operator: either a coordinate selection or a dense matrix.
class ObservationOperator {
 public:
  static ObservationOperator selection(int d, std::vector<int> indices);
  static ObservationOperator dense(Matrix H);
  static ObservationOperator identity(int d);

  int state_dim() const { return d_; }
  int obs_dim() const { return is_selection_ ? static_cast<int>(indices_.size())
                                             : static_cast<int>(dense_.rows()); }
  bool is_selection() const { return is_selection_; }
  const std::vector<int> & indices() const { return indices_; }

  Vector apply(const Vector & v) const;
  /// H' z
  Vector apply_transpose(const Vector & z) const;
  Matrix matrix() const;
  double norm() const;

 private:
  int d_ = 0;
  bool is_selection_ = true;
  std::vector<int> indices_;
  Matrix dense_;
};

/// Observes coordinates 6b, 6b+1, 6b+2 of every block of six.
ObservationOperator scenario_half_blocks(int d);
/// Observes coordinates 0, 1, 2.
ObservationOperator scenario_first3(int d);

struct ObservationSetup {
  ObservationOperator H;
  double sigma_z = 0.0;
  double h = 0.0;
  int k = 0;

  double T() const { return k * h; }
  /// t_j = j·h, never accumulated.
  double time(int j) const { return j * h; }
  void validate(const BilinearSystem & sys) const;
};

struct ObservationRecord {
  Matrix Y;  // (k+1) × d_o
  std::uint64_t seed = 0;
  std::optional<Matrix> truth;  // (k+1) × d, Ψ_{t_j}(u0)

  int rows() const { return static_cast<int>(Y.rows()); }
  Vector y(int j) const { return Y.row(j).transpose(); }
  /// Rows [first, first + count) as a new record without truth.
  ObservationRecord window(int first, int count) const;
};

/// Y_j = H Ψ_{t_j}(u0) + σ_Z Z_j. Noise uses stream 0 of the seed: component m
/// of Z_j is normal number j·d_o + m.
ObservationRecord generate(const BilinearSystem & sys, const ObservationSetup & setup,
                           const Vector & u0, std::uint64_t seed,
                           const IntegratorOptions & opt = {});

/// Φ_t(v) = H Ψ_t(v).
Vector observed_flow(const BilinearSystem & sys, const ObservationSetup & setup, const Vector & v,
                     double t, const IntegratorOptions & opt = {});
Vector observed_tangent(const BilinearSystem & sys, const ObservationSetup & setup,
                        const Vector & v, const Vector & w, double t,
                        const IntegratorOptions & opt = {});
Vector observed_adjoint(const BilinearSystem & sys, const ObservationSetup & setup,
                        const Vector & v, const Vector & z, double t,
                        const IntegratorOptions & opt = {});

/// CSV with header t,y_1,...,y_{d_o}; 17 significant digits.
void write_observations_csv(std::ostream & os, const Matrix & Y, double h);
Matrix read_observations_csv(std::istream & is);

std::string format_double(double x);

}  // namespace bda
