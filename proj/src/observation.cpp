/*
 * (C) Copyright 2026 The bda authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "bda/observation.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "bda/rng.hpp"

namespace bda {

ObservationOperator ObservationOperator::selection(int d, std::vector<int> indices) {
  if (d <= 0) throw Error(ErrorCode::InvalidDimension, "state dimension must be positive");
  if (indices.empty() || static_cast<int>(indices.size()) > d) {
    throw Error(ErrorCode::InvalidDimension, "selection must pick between 1 and d coordinates");
  }
  for (const int i : indices) {
    if (i < 0 || i >= d) throw Error(ErrorCode::InvalidDimension, "selection index out of range");
  }
  ObservationOperator op;
  op.d_ = d;
  op.is_selection_ = true;
  op.indices_ = std::move(indices);
  return op;
}

ObservationOperator ObservationOperator::dense(Matrix H) {
  if (H.rows() == 0 || H.cols() == 0 || H.rows() > H.cols()) {
    throw Error(ErrorCode::InvalidDimension, "observation matrix must be d_o x d with d_o <= d");
  }
  ObservationOperator op;
  op.d_ = static_cast<int>(H.cols());
  op.is_selection_ = false;
  op.dense_ = std::move(H);
  return op;
}

ObservationOperator ObservationOperator::identity(int d) {
  std::vector<int> idx(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) idx[static_cast<std::size_t>(i)] = i;
  return selection(d, std::move(idx));
}

Vector ObservationOperator::apply(const Vector & v) const {
  if (v.size() != d_) throw Error(ErrorCode::InvalidDimension, "H applied to wrong length");
  if (!is_selection_) return dense_ * v;
  Vector out(static_cast<Eigen::Index>(indices_.size()));
  for (std::size_t r = 0; r < indices_.size(); ++r) out[static_cast<Eigen::Index>(r)] = v[indices_[r]];
  return out;
}

Vector ObservationOperator::apply_transpose(const Vector & z) const {
  if (z.size() != obs_dim()) throw Error(ErrorCode::InvalidDimension, "H' applied to wrong length");
  if (!is_selection_) return dense_.transpose() * z;
  Vector out = Vector::Zero(d_);
  for (std::size_t r = 0; r < indices_.size(); ++r) out[indices_[r]] += z[static_cast<Eigen::Index>(r)];
  return out;
}

Matrix ObservationOperator::matrix() const {
  if (!is_selection_) return dense_;
  Matrix M = Matrix::Zero(obs_dim(), d_);
  for (std::size_t r = 0; r < indices_.size(); ++r) M(static_cast<Eigen::Index>(r), indices_[r]) += 1.0;
  return M;
}

double ObservationOperator::norm() const {
  if (is_selection_) {
    // Spectral norm of a selection is sqrt of the largest repeat count.
    std::vector<int> count(static_cast<std::size_t>(d_), 0);
    int worst = 0;
    for (const int i : indices_) worst = std::max(worst, ++count[static_cast<std::size_t>(i)]);
    return std::sqrt(static_cast<double>(worst));
  }
  Eigen::JacobiSVD<Matrix> svd(dense_);
  return svd.singularValues()(0);
}

ObservationOperator scenario_half_blocks(int d) {
  if (d <= 0 || d % 6 != 0) {
    throw Error(ErrorCode::InvalidDimension, "half-block scenario needs d divisible by 6");
  }
  std::vector<int> idx;
  idx.reserve(static_cast<std::size_t>(d / 2));
  for (int b = 0; b < d; b += 6) {
    for (int m = 0; m < 3; ++m) idx.push_back(b + m);
  }
  return ObservationOperator::selection(d, std::move(idx));
}

ObservationOperator scenario_first3(int d) {
  if (d < 4) throw Error(ErrorCode::InvalidDimension, "first-3 scenario needs d >= 4");
  return ObservationOperator::selection(d, {0, 1, 2});
}

void ObservationSetup::validate(const BilinearSystem & sys) const {
  if (H.state_dim() != sys.dim()) {
    throw Error(ErrorCode::InvalidDimension, "observation operator does not match the system");
  }
  if (!(sigma_z >= 0.0) || !std::isfinite(sigma_z)) {
    throw Error(ErrorCode::InvalidArgument, "sigma_z must be finite and non-negative");
  }
  if (!(h > 0.0) || !std::isfinite(h)) throw Error(ErrorCode::InvalidArgument, "h must be positive");
  if (k < 0) throw Error(ErrorCode::InvalidArgument, "k must be non-negative");
}

ObservationRecord ObservationRecord::window(int first, int count) const {
  if (first < 0 || count < 0 || first + count > rows()) {
    throw Error(ErrorCode::InsufficientData, "observation window exceeds the record");
  }
  ObservationRecord out;
  out.Y = Y.middleRows(first, count);
  out.seed = seed;
  return out;
}

ObservationRecord generate(const BilinearSystem & sys, const ObservationSetup & setup,
                           const Vector & u0, std::uint64_t seed, const IntegratorOptions & opt) {
  setup.validate(sys);
  sys.require_in_ball(u0, "generate");
  const Trajectory traj(sys, u0, setup.h, setup.k, opt);
  const int d_o = setup.H.obs_dim();
  const rng::NormalStream noise(seed, 0);

  ObservationRecord rec;
  rec.seed = seed;
  rec.Y.resize(setup.k + 1, d_o);
  Matrix truth(setup.k + 1, sys.dim());
  for (int j = 0; j <= setup.k; ++j) {
    const Vector & x = traj.state(j);
    truth.row(j) = x.transpose();
    const Vector hx = setup.H.apply(x);
    for (int m = 0; m < d_o; ++m) {
      const auto idx = static_cast<std::uint64_t>(j) * static_cast<std::uint64_t>(d_o) +
                       static_cast<std::uint64_t>(m);
      rec.Y(j, m) = hx[m] + (setup.sigma_z > 0.0 ? setup.sigma_z * noise.at(idx) : 0.0);
    }
  }
  rec.truth = std::move(truth);
  return rec;
}

Vector observed_flow(const BilinearSystem & sys, const ObservationSetup & setup, const Vector & v,
                     double t, const IntegratorOptions & opt) {
  return setup.H.apply(flow(sys, v, t, opt));
}

Vector observed_tangent(const BilinearSystem & sys, const ObservationSetup & setup,
                        const Vector & v, const Vector & w, double t,
                        const IntegratorOptions & opt) {
  return setup.H.apply(tangent_flow(sys, v, w, t, resolve_step(sys, t, opt), opt.order));
}

Vector observed_adjoint(const BilinearSystem & sys, const ObservationSetup & setup,
                        const Vector & v, const Vector & z, double t,
                        const IntegratorOptions & opt) {
  return adjoint_flow(sys, v, setup.H.apply_transpose(z), t, resolve_step(sys, t, opt), opt.order);
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_observations_csv(std::ostream & os, const Matrix & Y, double h) {
  os << "t";
  for (Eigen::Index m = 0; m < Y.cols(); ++m) os << ",y_" << (m + 1);
  os << "\n";
  for (Eigen::Index j = 0; j < Y.rows(); ++j) {
    os << format_double(static_cast<double>(j) * h);
    for (Eigen::Index m = 0; m < Y.cols(); ++m) os << ',' << format_double(Y(j, m));
    os << "\n";
  }
}

Matrix read_observations_csv(std::istream & is) {
  std::string line;
  if (!std::getline(is, line)) throw Error(ErrorCode::Io, "empty observation file");
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    bool first = true;
    while (std::getline(ss, cell, ',')) {
      if (first) {
        first = false;
        continue;  // time column
      }
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception &) {
        throw Error(ErrorCode::Io, "malformed number in observation file: " + cell);
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw Error(ErrorCode::Io, "ragged observation file");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty() || rows.front().empty()) throw Error(ErrorCode::Io, "no observations in file");
  Matrix Y(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t j = 0; j < rows.size(); ++j) {
    for (std::size_t m = 0; m < rows[j].size(); ++m) {
      Y(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(m)) = rows[j][m];
    }
  }
  return Y;
}

}  // namespace bda
