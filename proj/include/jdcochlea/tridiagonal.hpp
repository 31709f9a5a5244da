// Copyright 2026 The jdcochlea Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "jdcochlea/errors.hpp"

namespace jdcochlea {

/// Banded storage for a tridiagonal matrix:
///   A(i, i) = diag[i], A(i+1, i) = lower[i], A(i, i+1) = upper[i].
template <class T>
struct Tridiagonal {
  std::vector<T> lower;
  std::vector<T> diag;
  std::vector<T> upper;

  Tridiagonal() = default;
  explicit Tridiagonal(std::size_t n)
      : lower(n > 0 ? n - 1 : 0), diag(n), upper(n > 0 ? n - 1 : 0) {}

  std::size_t size() const { return diag.size(); }

  Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> dense() const {
    const auto n = static_cast<Eigen::Index>(size());
    Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> m =
        Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      m(i, i) = diag[i];
      if (i + 1 < n) {
        m(i + 1, i) = lower[i];
        m(i, i + 1) = upper[i];
      }
    }
    return m;
  }

  void multiply(std::span<const T> x, std::span<T> y) const {
    const std::size_t n = size();
    for (std::size_t i = 0; i < n; ++i) {
      T acc = diag[i] * x[i];
      if (i > 0) acc += lower[i - 1] * x[i - 1];
      if (i + 1 < n) acc += upper[i] * x[i + 1];
      y[i] = acc;
    }
  }
};

/// Thomas-algorithm factorization (no pivoting). Valid for the diagonally
/// dominant systems produced by the cochlear models; a vanishing pivot is
/// reported as SingularMatrix.
template <class T>
class TridiagonalLU {
 public:
  TridiagonalLU() = default;
  explicit TridiagonalLU(const Tridiagonal<T>& a) { factor(a); }

  void factor(const Tridiagonal<T>& a) {
    const std::size_t n = a.size();
    lower_ = a.lower;
    inv_pivot_.resize(n);
    upper_scaled_.resize(n > 0 ? n - 1 : 0);
    double scale = 0;
    for (const auto& d : a.diag) scale = std::max(scale, double(std::abs(d)));
    const double tiny = scale * 1e-14;
    T pivot = a.diag[0];
    for (std::size_t i = 0; i < n; ++i) {
      if (i > 0) pivot = a.diag[i] - a.lower[i - 1] * upper_scaled_[i - 1];
      if (!(std::abs(pivot) > tiny))
        throw SingularMatrix("zero pivot in tridiagonal factorization at row " +
                                 std::to_string(i),
                             double(std::abs(pivot)) / (scale > 0 ? scale : 1.0));
      inv_pivot_[i] = T(1) / pivot;
      if (i + 1 < n) upper_scaled_[i] = a.upper[i] * inv_pivot_[i];
    }
  }

  /// Overwrites `b` with A^{-1} b.
  void solve(std::span<T> b) const {
    const std::size_t n = inv_pivot_.size();
    b[0] *= inv_pivot_[0];
    for (std::size_t i = 1; i < n; ++i)
      b[i] = (b[i] - lower_[i - 1] * b[i - 1]) * inv_pivot_[i];
    for (std::size_t i = n - 1; i-- > 0;) b[i] -= upper_scaled_[i] * b[i + 1];
  }

  std::size_t size() const { return inv_pivot_.size(); }

 private:
  std::vector<T> lower_;
  std::vector<T> inv_pivot_;
  std::vector<T> upper_scaled_;
};

}  // namespace jdcochlea
