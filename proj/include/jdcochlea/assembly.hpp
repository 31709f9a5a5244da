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
#include <span>
#include <vector>

#include "jdcochlea/errors.hpp"
#include "jdcochlea/params.hpp"
#include "jdcochlea/tridiagonal.hpp"

namespace jdcochlea {

/// Coefficients of the time-discretized BM/TM force balance of one element:
///   p_j = alpha1 x1_{j+1} + alpha0 x1_j + alpha_m1 x1_{j-1}
///       + beta1 x2_{j+1} + beta0 x2_j
///   0   = eps1 x1_{j+1} + eps0 x1_j
///       + delta1 x2_{j+1} + delta0 x2_j + delta_m1 x2_{j-1}
/// Velocities use forward differences and stiffness acts on step j.
struct DiscreteCoefficients {
  double alpha1 = 0, alpha0 = 0, alpha_m1 = 0;
  double beta1 = 0, beta0 = 0;
  double eps1 = 0, eps0 = 0;
  double delta1 = 0, delta0 = 0, delta_m1 = 0;
};

/// Mass and coupling constants the discretization needs besides the
/// per-element coefficients.
struct MicroConstants {
  double bm_mass;
  double tm_mass;
  double rl_ratio;

  static MicroConstants from(const PhysicalConstants& c) {
    return {c.bm_mass, c.tm_mass, c.rl_ratio};
  }
};

inline DiscreteCoefficients discrete_coefficients(const ElementCoefficients& e,
                                                  const MicroConstants& mc,
                                                  double gamma, double dt) {
  const double g = mc.rl_ratio;
  const double dt2 = dt * dt;
  const double bm_damp = e.c1 + g * e.c3 - gamma * g * e.c4;
  const double bm_stiff = e.k1 + g * e.k3 - gamma * g * e.k4;
  const double tm_damp = e.c2 + e.c3;
  DiscreteCoefficients d;
  d.alpha1 = mc.bm_mass / dt2 + bm_damp / dt;
  d.alpha0 = -2.0 * mc.bm_mass / dt2 - bm_damp / dt + bm_stiff;
  d.alpha_m1 = mc.bm_mass / dt2;
  d.beta1 = (gamma * e.c4 - e.c3) / dt;
  d.beta0 = -(gamma * e.c4 - e.c3) / dt + (gamma * e.k4 - e.k3);
  d.delta1 = -mc.tm_mass / dt2 - tm_damp / dt;
  d.delta0 = 2.0 * mc.tm_mass / dt2 + tm_damp / dt - (e.k2 + e.k3);
  d.delta_m1 = -mc.tm_mass / dt2;
  d.eps1 = g * e.c3 / dt;
  d.eps0 = -g * e.c3 / dt + e.k3 * g;
  return d;
}

/// All elements at the model's own feedback gain.
inline std::vector<DiscreteCoefficients> discrete_coefficients(
    const CochlearModel& m, double dt) {
  const auto mc = MicroConstants::from(m.constants);
  std::vector<DiscreteCoefficients> out;
  out.reserve(m.elements.size());
  for (const auto& e : m.elements)
    out.push_back(discrete_coefficients(e, mc, m.constants.gamma, dt));
  return out;
}

/// All elements with a per-element effective feedback gain.
inline std::vector<DiscreteCoefficients> discrete_coefficients(
    const CochlearModel& m, double dt, std::span<const double> gamma) {
  const auto mc = MicroConstants::from(m.constants);
  std::vector<DiscreteCoefficients> out;
  out.reserve(m.elements.size());
  for (std::size_t n = 0; n < m.elements.size(); ++n)
    out.push_back(discrete_coefficients(m.elements[n], mc, gamma[n], dt));
  return out;
}

/// Finite-difference matrix of the long-wave macro-mechanics. Row 0 is the
/// stapes boundary, rows 1..N-2 the [1 -2 1] stencil and the last row pins
/// the helicotrema pressure.
inline Tridiagonal<double> build_F(const PhysicalConstants& c, double dl) {
  const int n = c.elements;
  if (n < 3) throw ConfigError("build_F needs N >= 3");
  const double s = c.height / (2.0 * c.density * dl * dl);
  Tridiagonal<double> f(static_cast<std::size_t>(n));
  f.diag[0] = -s * dl / c.height;
  f.upper[0] = s * dl / c.height;
  for (int i = 1; i < n - 1; ++i) {
    f.lower[i - 1] = s;
    f.diag[i] = -2.0 * s;
    f.upper[i] = s;
  }
  f.lower[n - 2] = 0.0;
  f.diag[n - 1] = -1.0;
  return f;
}

/// N x 2N selector of the BM entries of an interleaved [BM, TM] vector.
inline Eigen::MatrixXd build_S2(int n) {
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n, 2 * n);
  for (int i = 0; i < n; ++i) s(i, 2 * i) = 1.0;
  return s;
}

/// Dense F^{-1} built one column at a time from the banded factorization.
inline Eigen::MatrixXd inverse(const Tridiagonal<double>& f) {
  const auto n = static_cast<Eigen::Index>(f.size());
  TridiagonalLU<double> lu(f);
  Eigen::MatrixXd inv(n, n);
  std::vector<double> col(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) {
    std::fill(col.begin(), col.end(), 0.0);
    col[static_cast<std::size_t>(j)] = 1.0;
    lu.solve(col);
    for (Eigen::Index i = 0; i < n; ++i) inv(i, j) = col[static_cast<std::size_t>(i)];
  }
  return inv;
}

inline constexpr double kMinReciprocalCondition = 1e-14;

struct BlockMatrices {
  Eigen::MatrixXd A1, A0, Am1;
};

inline BlockMatrices build_block_matrices(std::span<const DiscreteCoefficients> d) {
  const auto n2 = static_cast<Eigen::Index>(2 * d.size());
  BlockMatrices b{Eigen::MatrixXd::Zero(n2, n2), Eigen::MatrixXd::Zero(n2, n2),
                  Eigen::MatrixXd::Zero(n2, n2)};
  for (std::size_t n = 0; n < d.size(); ++n) {
    const auto i = static_cast<Eigen::Index>(2 * n);
    b.A1(i, i) = d[n].alpha1;
    b.A1(i, i + 1) = d[n].beta1;
    b.A1(i + 1, i) = d[n].eps1;
    b.A1(i + 1, i + 1) = d[n].delta1;
    b.A0(i, i) = d[n].alpha0;
    b.A0(i, i + 1) = d[n].beta0;
    b.A0(i + 1, i) = d[n].eps0;
    b.A0(i + 1, i + 1) = d[n].delta0;
    b.Am1(i, i) = d[n].alpha_m1;
    b.Am1(i + 1, i + 1) = d[n].delta_m1;
  }
  return b;
}

/// Rewrites only the feedback-dependent BM-row entries (alpha1, alpha0,
/// beta1, beta0) of A1 and A0 for a new per-element gain.
inline void apply_feedback_gain(BlockMatrices& b, const CochlearModel& m,
                                double dt, std::span<const double> gamma) {
  const auto mc = MicroConstants::from(m.constants);
  for (std::size_t n = 0; n < m.elements.size(); ++n) {
    const auto d = discrete_coefficients(m.elements[n], mc, gamma[n], dt);
    const auto i = static_cast<Eigen::Index>(2 * n);
    b.A1(i, i) = d.alpha1;
    b.A1(i, i + 1) = d.beta1;
    b.A0(i, i) = d.alpha0;
    b.A0(i, i + 1) = d.beta0;
  }
}

struct SteppingMatrices {
  Eigen::MatrixXd Gamma;  // 2N x 2N fluid coupling
  Eigen::MatrixXd H;      // 2N x 2N
  Eigen::MatrixXd K;      // 2N x 2N
  Eigen::MatrixXd M;      // 2N x N
};

/// Gamma = S2' F^{-1} S2 / dt^2, nonzero only at BM rows and columns.
inline Eigen::MatrixXd coupling_matrix(const Eigen::MatrixXd& f_inverse, double dt) {
  const Eigen::Index n = f_inverse.rows();
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  const double inv_dt2 = 1.0 / (dt * dt);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) g(2 * i, 2 * j) = f_inverse(i, j) * inv_dt2;
  return g;
}

/// Recursion matrices
///   H = (A1 - Gamma)^{-1} (-2 Gamma - A0)
///   K = (A1 - Gamma)^{-1} (Gamma - Am1)
///   M = (A1 - Gamma)^{-1} S2'
inline SteppingMatrices build_stepping(const Eigen::MatrixXd& gamma,
                                       const BlockMatrices& b) {
  const Eigen::Index n = gamma.rows() / 2;
  SteppingMatrices s;
  s.Gamma = gamma;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(b.A1 - gamma);
  const double rc = lu.rcond();
  if (!(rc >= kMinReciprocalCondition))
    throw SingularMatrix("A1 - Gamma is numerically singular", rc);
  s.H = lu.solve(-2.0 * gamma - b.A0);
  s.K = lu.solve(gamma - b.Am1);
  s.M = lu.solve(build_S2(static_cast<int>(n)).transpose());
  return s;
}

/// Reciprocal 1-norm condition number from an explicit inverse.
inline double reciprocal_condition(const Eigen::MatrixXd& a,
                                   const Eigen::MatrixXd& a_inverse) {
  const double na = a.cwiseAbs().colwise().sum().maxCoeff();
  const double ni = a_inverse.cwiseAbs().colwise().sum().maxCoeff();
  return 1.0 / (na * ni);
}

/// Everything the dense form of the joint recursion needs.
struct SystemMatrices {
  Tridiagonal<double> F;
  Eigen::MatrixXd F_inverse;
  Eigen::MatrixXd S2;
  Eigen::MatrixXd Gamma, A1, A0, Am1;
  Eigen::MatrixXd H, K, M;
  double dt = 0;
  double dl = 0;
};

inline SystemMatrices assemble(const CochlearModel& m, double fs,
                               std::span<const double> gamma) {
  if (!(fs > 0)) throw ConfigError("sampling rate must be positive");
  SystemMatrices s;
  s.dt = 1.0 / fs;
  s.dl = m.constants.segment_length();
  s.F = build_F(m.constants, s.dl);
  s.F_inverse = inverse(s.F);
  const double rc = reciprocal_condition(s.F.dense(), s.F_inverse);
  if (!(rc >= kMinReciprocalCondition))
    throw SingularMatrix("finite-difference matrix is numerically singular", rc);
  s.S2 = build_S2(m.size());
  auto blocks = build_block_matrices(discrete_coefficients(m, s.dt, gamma));
  auto step = build_stepping(coupling_matrix(s.F_inverse, s.dt), blocks);
  s.A1 = std::move(blocks.A1);
  s.A0 = std::move(blocks.A0);
  s.Am1 = std::move(blocks.Am1);
  s.Gamma = std::move(step.Gamma);
  s.H = std::move(step.H);
  s.K = std::move(step.K);
  s.M = std::move(step.M);
  return s;
}

inline SystemMatrices assemble(const CochlearModel& m, double fs) {
  const std::vector<double> gamma(m.elements.size(), m.constants.gamma);
  return assemble(m, fs, gamma);
}

}  // namespace jdcochlea
