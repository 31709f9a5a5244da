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
#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <vector>

#include "jdcochlea/assembly.hpp"
#include "jdcochlea/errors.hpp"
#include "jdcochlea/params.hpp"
#include "jdcochlea/solver.hpp"
#include "jdcochlea/tridiagonal.hpp"

namespace jdcochlea {

/// Continuous-time coefficients of one element, state [v1, x1, v2, x2].
struct ElementDynamics {
  double a1, a0, b1, b0;  // BM row, divided by m1
  double d1, d0, e1, e0;  // TM row, divided by m2
};

inline ElementDynamics element_dynamics(const ElementCoefficients& e,
                                        const PhysicalConstants& c, double gamma) {
  const double g = c.rl_ratio;
  return {-(e.c1 + g * e.c3 - gamma * g * e.c4) / c.bm_mass,
          -(e.k1 + g * e.k3 - gamma * g * e.k4) / c.bm_mass,
          (e.c3 - gamma * e.c4) / c.bm_mass,
          (e.k3 - gamma * e.k4) / c.bm_mass,
          g * e.c3 / c.tm_mass,
          g * e.k3 / c.tm_mass,
          -(e.c2 + e.c3) / c.tm_mass,
          -(e.k2 + e.k3) / c.tm_mass};
}

/// Dense state-space form x' = A x + B u with u = F^{-1} q.
struct SemiDiscreteSystem {
  Eigen::MatrixXd A_E, B_E, C_E;
  Eigen::MatrixXd F_inverse;
  Eigen::MatrixXd A, B;
};

/// The apex row of C_E is zero: the helicotrema pressure is pinned to 0 and
/// the last element's acceleration does not load the fluid.
inline SemiDiscreteSystem build_semi_discrete(const CochlearModel& m) {
  const int n = m.size();
  const auto& c = m.constants;
  SemiDiscreteSystem s;
  s.A_E = Eigen::MatrixXd::Zero(4 * n, 4 * n);
  s.B_E = Eigen::MatrixXd::Zero(4 * n, n);
  s.C_E = Eigen::MatrixXd::Zero(n, 4 * n);
  for (int k = 0; k < n; ++k) {
    const auto d = element_dynamics(m.elements[static_cast<std::size_t>(k)], c, c.gamma);
    const int i = 4 * k;
    s.A_E(i, i) = d.a1;
    s.A_E(i, i + 1) = d.a0;
    s.A_E(i, i + 2) = d.b1;
    s.A_E(i, i + 3) = d.b0;
    s.A_E(i + 1, i) = 1.0;
    s.A_E(i + 2, i) = d.d1;
    s.A_E(i + 2, i + 1) = d.d0;
    s.A_E(i + 2, i + 2) = d.e1;
    s.A_E(i + 2, i + 3) = d.e0;
    s.A_E(i + 3, i + 2) = 1.0;
    s.B_E(i, k) = 1.0 / c.bm_mass;
    if (k < n - 1) s.C_E(k, i) = 1.0;
  }
  s.F_inverse = inverse(build_F(c, c.segment_length()));
  const Eigen::MatrixXd coupling =
      Eigen::MatrixXd::Identity(4 * n, 4 * n) - s.B_E * s.F_inverse * s.C_E;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(coupling);
  const double rc = lu.rcond();
  if (!(rc >= kMinReciprocalCondition))
    throw SingularMatrix("I - B_E F^{-1} C_E is numerically singular", rc);
  s.A = lu.solve(s.A_E);
  s.B = lu.solve(s.B_E);
  return s;
}

struct ReferenceConfig {
  double fs = 128000.0;
  double internal_rate = 512000.0;
  bool nonlinear = false;
  bool record_tm = false;
  int stride = 1;
  double input_gain = kInputGain;
};

/// Structured evaluation of the semi-discrete dynamics. The state holds the
/// 4N membrane states followed by the middle-ear velocity and displacement.
class SemiDiscreteRhs {
 public:
  explicit SemiDiscreteRhs(const CochlearModel& m, bool nonlinear = false,
                           double input_gain = kInputGain)
      : model_(m), nonlinear_(nonlinear), gain_(input_gain) {
    const auto n = static_cast<std::size_t>(m.size());
    const auto& c = m.constants;
    dyn_.reserve(n);
    for (const auto& e : m.elements) dyn_.push_back(element_dynamics(e, c, c.gamma));
    auto sys = build_F(c, c.segment_length());
    for (std::size_t i = 0; i + 1 < n; ++i) sys.diag[i] -= 1.0 / c.bm_mass;
    lu_.factor(sys);
    acc_.resize(n);
  }

  std::size_t size() const { return 4 * dyn_.size() + 2; }

  /// dx/dt at stimulus pressure `stim`.
  void operator()(std::span<const double> x, double stim, std::span<double> dx) {
    const std::size_t n = dyn_.size();
    const auto& c = model_.constants;
    for (std::size_t k = 0; k < n; ++k) {
      const double v1 = x[4 * k], x1 = x[4 * k + 1], v2 = x[4 * k + 2], x2 = x[4 * k + 3];
      ElementDynamics d = dyn_[k];
      if (nonlinear_) {
        const auto& e = model_.elements[k];
        const double g = c.rl_ratio;
        const double pa = -c.gamma * (e.c4 * (g * v1 - v2) + e.k4 * (g * x1 - x2));
        d = element_dynamics(e, c, c.gamma * feedback_scale(c.tau * pa));
      }
      acc_[k] = d.a1 * v1 + d.a0 * x1 + d.b1 * v2 + d.b0 * x2;
      dx[4 * k + 1] = v1;
      dx[4 * k + 2] = d.d1 * v1 + d.d0 * x1 + d.e1 * v2 + d.e0 * x2;
      dx[4 * k + 3] = v2;
    }
    const double vme = x[4 * n], xme = x[4 * n + 1];
    const double ame = (stim - c.me_damping * vme - c.me_stiffness * xme) / c.me_mass;
    dx[4 * n] = ame;
    dx[4 * n + 1] = vme;
    std::vector<double>& p = pressure_;
    p.assign(acc_.begin(), acc_.end());
    p[n - 1] = 0.0;
    p[0] += gain_ * ame;
    lu_.solve(p);
    for (std::size_t k = 0; k < n; ++k) dx[4 * k] = acc_[k] + p[k] / c.bm_mass;
  }

  std::span<const double> pressure() const { return pressure_; }

 private:
  CochlearModel model_;
  bool nonlinear_;
  double gain_;
  std::vector<ElementDynamics> dyn_;
  TridiagonalLU<double> lu_;
  std::vector<double> acc_, pressure_;
};

/// One classical fourth-order Runge-Kutta step of x' = f(x, u) where the
/// input is u0, uh and u1 at the start, middle and end of the step.
template <class Rhs>
void rk4_step(Rhs&& f, std::vector<double>& x, double h, double u0, double uh, double u1,
              std::vector<double>& work) {
  const std::size_t dim = x.size();
  work.resize(5 * dim);
  std::span<double> k1(work.data(), dim), k2(work.data() + dim, dim),
      k3(work.data() + 2 * dim, dim), k4(work.data() + 3 * dim, dim),
      tmp(work.data() + 4 * dim, dim);
  f(std::span<const double>(x), u0, k1);
  for (std::size_t i = 0; i < dim; ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
  f(std::span<const double>(tmp), uh, k2);
  for (std::size_t i = 0; i < dim; ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
  f(std::span<const double>(tmp), uh, k3);
  for (std::size_t i = 0; i < dim; ++i) tmp[i] = x[i] + h * k3[i];
  f(std::span<const double>(tmp), u1, k4);
  for (std::size_t i = 0; i < dim; ++i)
    x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

/// Classical fourth-order Runge-Kutta with the stimulus linearly
/// interpolated between samples. Row k is the state at time (k+1)/fs.
inline CochleaResponse integrate(std::span<const double> stimulus,
                                 const CochlearModel& m,
                                 const ReferenceConfig& cfg = {}) {
  if (!(cfg.fs > 0)) throw ConfigError("sampling rate must be positive");
  if (cfg.stride < 1) throw ConfigError("recording stride must be >= 1");
  const double ratio = cfg.internal_rate / cfg.fs;
  const long sub = std::lround(ratio);
  if (sub < 4 || std::abs(ratio - static_cast<double>(sub)) > 1e-9)
    throw ConfigError("internal rate must be an integer multiple >= 4 of fs");
  SemiDiscreteRhs rhs(m, cfg.nonlinear, cfg.input_gain);
  const std::size_t dim = rhs.size();
  const auto n = static_cast<std::size_t>(m.size());
  std::vector<double> x(dim, 0.0), work;
  const double h = 1.0 / cfg.internal_rate;

  CochleaResponse r;
  const auto frames = static_cast<Eigen::Index>(
      (stimulus.size() + static_cast<std::size_t>(cfg.stride) - 1) /
      static_cast<std::size_t>(cfg.stride));
  r.bm = Field::Zero(frames, static_cast<Eigen::Index>(n));
  if (cfg.record_tm) r.tm = Field::Zero(frames, static_cast<Eigen::Index>(n));
  r.positions = m.positions();
  r.fs = cfg.fs;
  r.stride = cfg.stride;
  r.mode = "semidiscrete";

  for (std::size_t j = 0; j < stimulus.size(); ++j) {
    const double s0 = stimulus[j];
    const double s1 = j + 1 < stimulus.size() ? stimulus[j + 1] : 0.0;
    for (long s = 0; s < sub; ++s) {
      const double f0 = static_cast<double>(s) / static_cast<double>(sub);
      const double fh = (s + 0.5) / static_cast<double>(sub);
      const double f1 = static_cast<double>(s + 1) / static_cast<double>(sub);
      const double u0 = s0 + (s1 - s0) * f0;
      const double uh = s0 + (s1 - s0) * fh;
      const double u1 = s0 + (s1 - s0) * f1;
      rk4_step(rhs, x, h, u0, uh, u1, work);
    }
    for (std::size_t k = 0; k < n; ++k) {
      const double b = x[4 * k + 1], t = x[4 * k + 3];
      if (!std::isfinite(b) || !std::isfinite(t))
        throw NumericalBlowup("non-finite displacement at element " + std::to_string(k), j + 1);
      if (std::abs(b) > kBlowupThreshold || std::abs(t) > kBlowupThreshold)
        throw NumericalBlowup("displacement exceeds 1e3 m at element " + std::to_string(k), j + 1);
    }
    if (j % static_cast<std::size_t>(cfg.stride) != 0) continue;
    const auto row = static_cast<Eigen::Index>(j / static_cast<std::size_t>(cfg.stride));
    for (std::size_t k = 0; k < n; ++k) {
      r.bm(row, static_cast<Eigen::Index>(k)) = x[4 * k + 1];
      if (r.tm) (*r.tm)(row, static_cast<Eigen::Index>(k)) = x[4 * k + 3];
    }
  }
  return r;
}

/// Complex BM displacement per unit boundary acceleration in the sinusoidal
/// steady state of the semi-discrete model at frequency `f`.
inline Eigen::VectorXcd frequency_response(const CochlearModel& m, double f) {
  using C = std::complex<double>;
  const auto& c = m.constants;
  const auto n = static_cast<std::size_t>(m.size());
  const C s(0.0, 2.0 * M_PI * f);
  const double g = c.rl_ratio, gamma = c.gamma;
  Tridiagonal<C> sys(n);
  const auto f_real = build_F(c, c.segment_length());
  std::vector<C> z(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& e = m.elements[i];
    const C t = (g * e.c3 * s + g * e.k3) /
                (c.tm_mass * s * s + (e.c2 + e.c3) * s + e.k2 + e.k3);
    z[i] = c.bm_mass * s * s + (e.c1 + g * e.c3 - gamma * g * e.c4) * s +
           (e.k1 + g * e.k3 - gamma * g * e.k4) +
           ((gamma * e.c4 - e.c3) * s + gamma * e.k4 - e.k3) * t;
    sys.diag[i] = f_real.diag[i] - (i + 1 < n ? s * s / z[i] : C(0));
    if (i + 1 < n) {
      sys.lower[i] = f_real.lower[i];
      sys.upper[i] = f_real.upper[i];
    }
  }
  std::vector<C> p(n, C(0));
  p[0] = 1.0;
  TridiagonalLU<C> lu(sys);
  lu.solve(p);
  Eigen::VectorXcd xi(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) xi[static_cast<Eigen::Index>(i)] = p[i] / z[i];
  return xi;
}

/// Position of maximal steady-state BM response for each frequency, refined
/// by a parabola through the log magnitudes around the peak element.
inline std::vector<double> characteristic_places(const CochlearModel& m,
                                                 std::span<const double> freqs) {
  const double dl = m.constants.segment_length();
  std::vector<double> out;
  out.reserve(freqs.size());
  for (double f : freqs) {
    const Eigen::VectorXd mag = frequency_response(m, f).cwiseAbs();
    Eigen::Index k = 0;
    mag.maxCoeff(&k);
    double pos = static_cast<double>(k);
    if (k > 0 && k + 1 < mag.size()) {
      const double a = std::log(mag[k - 1]), b = std::log(mag[k]), cc = std::log(mag[k + 1]);
      const double den = a - 2.0 * b + cc;
      const double shift = 0.5 * (a - cc) / den;
      if (den < 0 && std::isfinite(shift)) pos += shift;
    }
    out.push_back(pos * dl);
  }
  return out;
}

/// Characteristic frequency of every element, obtained by inverting the
/// measured place map of `m` (normally the linear active model). The map is
/// walked from high to low frequency and kept while the place moves apically
/// and the peak lies inside the duct; beyond that log-frequency is
/// extrapolated along the secant of the outermost millimetre.
inline std::vector<double> characteristic_frequencies(const CochlearModel& m,
                                                      int grid = 400,
                                                      double f_lo = 20.0,
                                                      double f_hi = 80000.0) {
  std::vector<double> freqs(static_cast<std::size_t>(grid));
  for (int k = 0; k < grid; ++k)
    freqs[static_cast<std::size_t>(k)] =
        f_hi * std::pow(f_lo / f_hi, static_cast<double>(k) / (grid - 1));
  const auto places = characteristic_places(m, freqs);
  const double dl = m.constants.segment_length();
  const double x_last = dl * (m.size() - 1);
  std::vector<double> px, lf;
  for (std::size_t k = 0; k < places.size(); ++k) {
    if (!std::isfinite(places[k])) break;
    if (places[k] <= 0.5 * dl) continue;
    if (!px.empty() && places[k] < px.back()) break;
    if (places[k] >= x_last - 0.5 * dl) break;
    if (!px.empty() && places[k] == px.back()) continue;
    px.push_back(places[k]);
    lf.push_back(std::log(freqs[k]));
  }
  if (px.size() < 2)
    throw ConfigError("place map of the " + std::to_string(m.size()) +
                      "-element model has fewer than two interior peaks; use a finer grid");
  auto secant = [&](bool apical) {
    const double span = 1e-3;
    std::size_t a = apical ? px.size() - 1 : 0, b = a;
    if (apical)
      while (b > 0 && px[a] - px[b] < span) --b;
    else
      while (b + 1 < px.size() && px[b] - px[a] < span) ++b;
    return (lf[a] - lf[b]) / (px[a] - px[b]);
  };
  const double slope_base = secant(false), slope_apex = secant(true);
  const auto positions = m.positions();
  std::vector<double> cf(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const double x = positions[i];
    double l;
    if (x <= px.front()) {
      l = lf.front() + slope_base * (x - px.front());
    } else if (x >= px.back()) {
      l = lf.back() + slope_apex * (x - px.back());
    } else {
      const std::size_t hi = static_cast<std::size_t>(
          std::upper_bound(px.begin(), px.end(), x) - px.begin());
      const std::size_t lo = hi - 1;
      const double t = (x - px[lo]) / (px[hi] - px[lo]);
      l = lf[lo] + t * (lf[hi] - lf[lo]);
    }
    cf[i] = std::exp(l);
  }
  return cf;
}

/// Passive model tonotopically matched to the active model built from the
/// same constants.
inline CochlearModel make_matched_passive_model(const PhysicalConstants& c,
                                                const PassiveParams& p = {}) {
  const auto active = make_active_model(c);
  return make_passive_model(c, p, characteristic_frequencies(active));
}

}  // namespace jdcochlea
