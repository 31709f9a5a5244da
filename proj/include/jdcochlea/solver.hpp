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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "jdcochlea/assembly.hpp"
#include "jdcochlea/errors.hpp"
#include "jdcochlea/params.hpp"
#include "jdcochlea/tridiagonal.hpp"

namespace jdcochlea {

using Field = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Mode { passive, linear, nonlinear };

inline std::string to_string(Mode m) {
  switch (m) {
    case Mode::passive: return "passive";
    case Mode::linear: return "linear";
    case Mode::nonlinear: return "nonlinear";
  }
  return "unknown";
}

/// Scale from stapes acceleration to the macro-mechanical boundary input.
inline constexpr double kInputGain = 0.01;
inline constexpr double kBlowupThreshold = 1e3;

struct SimulationConfig {
  double fs = 128000.0;
  Mode mode = Mode::nonlinear;
  bool record_tm = false;
  bool record_pressure = false;
  bool record_omega = false;
  int stride = 1;
  double input_gain = kInputGain;
};

/// Second-order middle-ear boundary, discretized like the membrane
/// elements: m (x+ - 2x + x-)/dt^2 + c (x+ - x)/dt + k x = p.
class MiddleEar {
 public:
  MiddleEar(double mass, double stiffness, double damping, double dt)
      : m_(mass), k_(stiffness), c_(damping), dt_(dt) {}
  MiddleEar(const PhysicalConstants& c, double dt)
      : MiddleEar(c.me_mass, c.me_stiffness, c.me_damping, dt) {}

  /// Advances one step under pressure `p` and returns the acceleration.
  double step(double p) {
    const double dt2 = dt_ * dt_;
    const double next = (p + m_ * (2.0 * x_ - xm_) / dt2 + c_ * x_ / dt_ - k_ * x_) /
                        (m_ / dt2 + c_ / dt_);
    const double acc = (next - 2.0 * x_ + xm_) / dt2;
    xm_ = x_;
    x_ = next;
    return acc;
  }

  double displacement() const { return x_; }

 private:
  double m_, k_, c_, dt_;
  double x_ = 0, xm_ = 0;
};

/// Boundary drive q_j for every stimulus sample.
inline std::vector<double> middle_ear_drive(std::span<const double> stimulus,
                                            const PhysicalConstants& c,
                                            double fs,
                                            double gain = kInputGain) {
  MiddleEar me(c, 1.0 / fs);
  std::vector<double> q(stimulus.size());
  for (std::size_t j = 0; j < q.size(); ++j) q[j] = gain * me.step(stimulus[j]);
  return q;
}

/// tanh(z)/z with the removable singularity filled in.
inline double feedback_scale(double z) {
  if (std::abs(z) < 1e-6) return 1.0 - z * z / 3.0;
  return std::tanh(z) / z;
}

/// Lagged active feedback pressure of one element.
inline double active_pressure(const ElementCoefficients& e, double gamma,
                              double g, double x1, double x2, double x1m,
                              double x2m, double dt) {
  const double xf = g * x1 - x2;
  const double xfm = g * x1m - x2m;
  return -gamma * (e.c4 * (xf - xfm) / dt + e.k4 * xf);
}

struct SimulationState {
  Eigen::VectorXd X;    // step j, interleaved [BM, TM]
  Eigen::VectorXd Xm;   // step j-1
  std::vector<double> omega;
  std::size_t j = 0;

  static SimulationState at_rest(int n) {
    return {Eigen::VectorXd::Zero(2 * n), Eigen::VectorXd::Zero(2 * n),
            std::vector<double>(static_cast<std::size_t>(n), 1.0), 0};
  }
};

namespace detail {

inline void guard(const Eigen::VectorXd& x, std::size_t step) {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double v = x[i];
    if (!std::isfinite(v))
      throw NumericalBlowup("non-finite displacement at element " +
                                std::to_string(i / 2),
                            step);
    if (std::abs(v) > kBlowupThreshold)
      throw NumericalBlowup("displacement exceeds 1e3 m at element " +
                                std::to_string(i / 2),
                            step);
  }
}

inline void update_omega(SimulationState& s, const CochlearModel& m, double dt) {
  const auto& c = m.constants;
  for (std::size_t n = 0; n < m.elements.size(); ++n) {
    const auto i = static_cast<Eigen::Index>(2 * n);
    const double pa = active_pressure(m.elements[n], c.gamma, c.rl_ratio,
                                      s.X[i], s.X[i + 1], s.Xm[i], s.Xm[i + 1], dt);
    s.omega[n] = feedback_scale(c.tau * pa);
  }
}

}  // namespace detail

/// X_{j+1} = H X_j + K X_{j-1} + M F^{-1} Q_j with Q_j = [q, 0, ..., 0]'.
inline void step(SimulationState& s, const SystemMatrices& sm, double q) {
  if (!std::isfinite(q)) throw ConfigError("non-finite input sample");
  Eigen::VectorXd next = sm.H * s.X + sm.K * s.Xm + sm.M * (q * sm.F_inverse.col(0));
  s.Xm = std::move(s.X);
  s.X = std::move(next);
  ++s.j;
  detail::guard(s.X, s.j);
}

/// One nonlinear step on the dense formulation: forms omega from the lagged
/// state, rewrites the feedback entries of A1/A0 and re-solves
///   (A1 - Gamma) X+ = (-2 Gamma - A0) X + (Gamma - Am1) X- + S2' U.
inline void nonlinear_step(SimulationState& s, const SystemMatrices& sm,
                           const CochlearModel& m, double q) {
  if (!std::isfinite(q)) throw ConfigError("non-finite input sample");
  detail::update_omega(s, m, sm.dt);
  std::vector<double> gamma(s.omega.size());
  for (std::size_t n = 0; n < gamma.size(); ++n)
    gamma[n] = m.constants.gamma * s.omega[n];
  BlockMatrices b{sm.A1, sm.A0, sm.Am1};
  apply_feedback_gain(b, m, sm.dt, gamma);
  const Eigen::VectorXd u = q * sm.F_inverse.col(0);
  Eigen::VectorXd rhs = (-2.0 * sm.Gamma - b.A0) * s.X + (sm.Gamma - b.Am1) * s.Xm;
  rhs += sm.S2.transpose() * u;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(b.A1 - sm.Gamma);
  Eigen::VectorXd next = lu.solve(rhs);
  s.Xm = std::move(s.X);
  s.X = std::move(next);
  ++s.j;
  detail::guard(s.X, s.j);
}

/// O(N) per step: eliminates the TM row of each element and solves one
/// tridiagonal system for the pressure, which is exactly the recursion above.
class FastStepper {
 public:
  FastStepper(const CochlearModel& m, double fs, bool nonlinear)
      : model_(m), nonlinear_(nonlinear), dt_(1.0 / fs) {
    if (!(fs > 0)) throw ConfigError("sampling rate must be positive");
    const auto n = static_cast<std::size_t>(m.size());
    F_ = build_F(m.constants, m.constants.segment_length());
    coeffs_ = discrete_coefficients(m, dt_);
    x1_.assign(n, 0);
    x2_.assign(n, 0);
    x1m_.assign(n, 0);
    x2m_.assign(n, 0);
    omega_.assign(n, 1.0);
    a_.resize(n);
    r_.resize(n);
    rt_.resize(n);
    p_.resize(n);
    system_ = F_;
    refresh(true);
  }

  /// Advances one step with boundary drive `q`.
  void advance(double q) {
    if (!std::isfinite(q)) throw ConfigError("non-finite input sample");
    const std::size_t n = x1_.size();
    if (nonlinear_) {
      const auto& c = model_.constants;
      for (std::size_t i = 0; i < n; ++i) {
        const double pa = active_pressure(model_.elements[i], c.gamma, c.rl_ratio,
                                          x1_[i], x2_[i], x1m_[i], x2m_[i], dt_);
        omega_[i] = feedback_scale(c.tau * pa);
      }
      refresh(false);
    }
    const double inv_dt2 = 1.0 / (dt_ * dt_);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& d = active_[i];
      const double rb = -(d.alpha0 * x1_[i] + d.beta0 * x2_[i] + d.alpha_m1 * x1m_[i]);
      rt_[i] = -(d.eps0 * x1_[i] + d.delta0 * x2_[i] + d.delta_m1 * x2m_[i]);
      r_[i] = rb - d.beta1 * rt_[i] / d.delta1;
      p_[i] = (r_[i] / a_[i] - 2.0 * x1_[i] + x1m_[i]) * inv_dt2;
    }
    p_[0] += q;
    lu_.solve(p_);
    ++j_;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& d = active_[i];
      const double b1 = (p_[i] + r_[i]) / a_[i];
      const double b2 = (rt_[i] - d.eps1 * b1) / d.delta1;
      x1m_[i] = x1_[i];
      x2m_[i] = x2_[i];
      x1_[i] = b1;
      x2_[i] = b2;
      if (!std::isfinite(b1) || !std::isfinite(b2))
        throw NumericalBlowup("non-finite displacement at element " + std::to_string(i), j_);
      if (std::abs(b1) > kBlowupThreshold || std::abs(b2) > kBlowupThreshold)
        throw NumericalBlowup("displacement exceeds 1e3 m at element " + std::to_string(i), j_);
    }
  }

  std::span<const double> bm() const { return x1_; }
  std::span<const double> tm() const { return x2_; }
  /// Pressure difference that drove the last step.
  std::span<const double> pressure() const { return p_; }
  /// Feedback scaling used by the last step.
  std::span<const double> omega() const { return omega_; }
  std::size_t steps() const { return j_; }
  double dt() const { return dt_; }

 private:
  void refresh(bool initial) {
    const std::size_t n = x1_.size();
    if (initial) active_ = coeffs_;
    const auto mc = MicroConstants::from(model_.constants);
    if (!initial)
      for (std::size_t i = 0; i < n; ++i)
        active_[i] = discrete_coefficients(model_.elements[i], mc,
                                           model_.constants.gamma * omega_[i], dt_);
    const double inv_dt2 = 1.0 / (dt_ * dt_);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& d = active_[i];
      a_[i] = d.alpha1 - d.beta1 * d.eps1 / d.delta1;
      system_.diag[i] = F_.diag[i] - inv_dt2 / a_[i];
    }
    lu_.factor(system_);
  }

  CochlearModel model_;
  bool nonlinear_;
  double dt_;
  Tridiagonal<double> F_, system_;
  TridiagonalLU<double> lu_;
  std::vector<DiscreteCoefficients> coeffs_, active_;
  std::vector<double> x1_, x2_, x1m_, x2m_, omega_, a_, r_, rt_, p_;
  std::size_t j_ = 0;
};

struct CochleaResponse {
  Field bm;
  std::optional<Field> tm;
  std::optional<Field> pressure;
  std::optional<Field> omega;
  std::vector<double> drive;  // boundary input q_j, one per stimulus sample
  std::vector<double> positions;
  double fs = 0;
  int stride = 1;
  std::string mode;

  Eigen::Index frames() const { return bm.rows(); }
  Eigen::Index elements() const { return bm.cols(); }
  double frame_rate() const { return fs / stride; }
};

namespace detail {

inline void check_config(const CochlearModel& m, const SimulationConfig& cfg) {
  if (!(cfg.fs > 0)) throw ConfigError("sampling rate must be positive");
  if (cfg.stride < 1) throw ConfigError("recording stride must be >= 1");
  if (cfg.mode == Mode::passive && m.kind != ModelKind::passive)
    throw ConfigError("passive mode needs a passive parameter set");
  if (cfg.mode != Mode::passive && m.kind != ModelKind::active)
    throw ConfigError("linear and nonlinear modes need the active parameter set");
  if (cfg.mode == Mode::nonlinear && m.constants.tau > 1.0)
    throw ConfigError("tau > 1 makes the nonlinear feedback unstable");
}

inline CochleaResponse allocate(const CochlearModel& m, const SimulationConfig& cfg,
                                std::size_t samples) {
  CochleaResponse r;
  const auto n = static_cast<Eigen::Index>(m.size());
  const auto frames = static_cast<Eigen::Index>((samples + cfg.stride - 1) / cfg.stride);
  r.bm = Field::Zero(frames, n);
  if (cfg.record_tm) r.tm = Field::Zero(frames, n);
  if (cfg.record_pressure) r.pressure = Field::Zero(frames, n);
  if (cfg.record_omega) r.omega = Field::Zero(frames, n);
  r.positions = m.positions();
  r.fs = cfg.fs;
  r.stride = cfg.stride;
  r.mode = to_string(cfg.mode);
  return r;
}

}  // namespace detail

/// Runs the joint model from rest. Row k of every field is the state
/// produced by stimulus sample k * stride.
inline CochleaResponse simulate(std::span<const double> stimulus,
                                const CochlearModel& m,
                                const SimulationConfig& cfg = {}) {
  detail::check_config(m, cfg);
  CochleaResponse r = detail::allocate(m, cfg, stimulus.size());
  r.drive = middle_ear_drive(stimulus, m.constants, cfg.fs, cfg.input_gain);
  FastStepper st(m, cfg.fs, cfg.mode == Mode::nonlinear);
  const auto n = static_cast<std::size_t>(m.size());
  for (std::size_t j = 0; j < stimulus.size(); ++j) {
    st.advance(r.drive[j]);
    if (j % static_cast<std::size_t>(cfg.stride) != 0) continue;
    const auto row = static_cast<Eigen::Index>(j / static_cast<std::size_t>(cfg.stride));
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<Eigen::Index>(i);
      r.bm(row, c) = st.bm()[i];
      if (r.tm) (*r.tm)(row, c) = st.tm()[i];
      if (r.pressure) (*r.pressure)(row, c) = st.pressure()[i];
      if (r.omega) (*r.omega)(row, c) = st.omega()[i];
    }
  }
  return r;
}

/// Same contract as simulate() but advanced with the dense stepping
/// matrices; intended for small N.
inline CochleaResponse simulate_dense(std::span<const double> stimulus,
                                      const CochlearModel& m,
                                      const SimulationConfig& cfg = {}) {
  detail::check_config(m, cfg);
  CochleaResponse r = detail::allocate(m, cfg, stimulus.size());
  r.drive = middle_ear_drive(stimulus, m.constants, cfg.fs, cfg.input_gain);
  const SystemMatrices sm = assemble(m, cfg.fs);
  auto s = SimulationState::at_rest(m.size());
  const auto n = static_cast<Eigen::Index>(m.size());
  for (std::size_t j = 0; j < stimulus.size(); ++j) {
    const Eigen::VectorXd prev = s.X;
    const Eigen::VectorXd prev2 = s.Xm;
    if (cfg.mode == Mode::nonlinear)
      nonlinear_step(s, sm, m, r.drive[j]);
    else
      step(s, sm, r.drive[j]);
    if (j % static_cast<std::size_t>(cfg.stride) != 0) continue;
    const auto row = static_cast<Eigen::Index>(j / static_cast<std::size_t>(cfg.stride));
    for (Eigen::Index i = 0; i < n; ++i) {
      r.bm(row, i) = s.X[2 * i];
      if (r.tm) (*r.tm)(row, i) = s.X[2 * i + 1];
      if (r.omega) (*r.omega)(row, i) = s.omega[static_cast<std::size_t>(i)];
    }
    if (r.pressure) {
      Eigen::VectorXd acc(n);
      for (Eigen::Index i = 0; i < n; ++i)
        acc[i] = (s.X[2 * i] - 2.0 * prev[2 * i] + prev2[2 * i]) / (sm.dt * sm.dt);
      const Eigen::VectorXd p = sm.F_inverse * acc + r.drive[j] * sm.F_inverse.col(0);
      r.pressure->row(row) = p.transpose();
    }
  }
  return r;
}

/// Pressure difference from consecutive BM displacement rows:
///   P_k = F^{-1} (x_{k+1} - 2 x_k + x_{k-1}) / dt^2 + F^{-1} Q_k.
/// `bm` holds T >= 3 consecutive states; `drive` holds the T - 2 inputs of
/// the interior steps. Returns a (T - 2) x N field.
inline Field pressure_field(const Field& bm, std::span<const double> drive,
                            const PhysicalConstants& c, double dt) {
  if (bm.rows() < 3)
    throw InsufficientHistory("pressure needs at least 3 consecutive states");
  if (static_cast<Eigen::Index>(drive.size()) != bm.rows() - 2)
    throw ConfigError("drive length must equal the number of interior steps");
  const auto n = static_cast<std::size_t>(bm.cols());
  if (n != static_cast<std::size_t>(c.elements))
    throw ConfigError("field width does not match the element count");
  TridiagonalLU<double> lu(build_F(c, c.segment_length()));
  Field p(bm.rows() - 2, bm.cols());
  std::vector<double> b(n);
  for (Eigen::Index k = 1; k + 1 < bm.rows(); ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto col = static_cast<Eigen::Index>(i);
      b[i] = (bm(k + 1, col) - 2.0 * bm(k, col) + bm(k - 1, col)) / (dt * dt);
    }
    b[0] += drive[static_cast<std::size_t>(k - 1)];
    lu.solve(b);
    for (std::size_t i = 0; i < n; ++i) p(k - 1, static_cast<Eigen::Index>(i)) = b[i];
  }
  return p;
}

}  // namespace jdcochlea
