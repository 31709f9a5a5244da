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
#include <gtest/gtest.h>

#include <Eigen/SVD>
#include <algorithm>
#include <complex>
#include <sstream>

#include "jdcochlea/stability.hpp"
#include "jdcochlea/reference.hpp"
#include "jdcochlea/stimuli.hpp"

using namespace jdcochlea;

namespace {

CochlearModel model(int n) {
  PhysicalConstants c;
  c.elements = n;
  return make_active_model(c);
}

std::vector<double> sorted_magnitudes(const Eigen::VectorXcd& ev) {
  std::vector<double> m(ev.size());
  for (Eigen::Index k = 0; k < ev.size(); ++k) m[k] = std::abs(ev[k]);
  std::sort(m.begin(), m.end());
  return m;
}

}  // namespace

TEST(BuildE, BlockLayout) {
  Eigen::MatrixXd h = Eigen::MatrixXd::Constant(2, 2, 3.0), k = Eigen::MatrixXd::Constant(2, 2, 5.0);
  const auto e = build_E(h, k);
  ASSERT_EQ(e.rows(), 4);
  EXPECT_EQ(e.topLeftCorner(2, 2), h);
  EXPECT_EQ(e.topRightCorner(2, 2), k);
  EXPECT_EQ(e.bottomLeftCorner(2, 2), Eigen::MatrixXd::Identity(2, 2));
  EXPECT_EQ(e.bottomRightCorner(2, 2), Eigen::MatrixXd::Zero(2, 2));
}

TEST(BuildE, ToySpectrum) {
  const Eigen::MatrixXd h = 0.5 * Eigen::MatrixXd::Identity(2, 2);
  const Eigen::MatrixXd k = Eigen::MatrixXd::Zero(2, 2);
  const auto m = sorted_magnitudes(eigenvalues(build_E(h, k)));
  EXPECT_NEAR(m[0], 0.0, 1e-15);
  EXPECT_NEAR(m[1], 0.0, 1e-15);
  EXPECT_NEAR(m[2], 0.5, 1e-15);
  EXPECT_NEAR(m[3], 0.5, 1e-15);
}

TEST(BuildE, ScalarDampedOscillator) {
  // x+ = 2r cos(t) x - r^2 x-  has roots r e^{±it}
  const double r = 0.9, t = 0.3;
  Eigen::MatrixXd h(1, 1), k(1, 1);
  h << 2 * r * std::cos(t);
  k << -r * r;
  const auto ev = eigenvalues(build_E(h, k));
  EXPECT_NEAR(std::abs(ev[0]), r, 1e-14);
  EXPECT_NEAR(std::abs(ev[1]), r, 1e-14);
  EXPECT_NEAR(std::abs(std::arg(ev[0])), t, 1e-14);
}

TEST(Eigenvalues, RejectsNonFinite) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(3, 3);
  a(1, 2) = std::nan("");
  EXPECT_THROW(eigenvalues(a), ConfigError);
}

TEST(Companion, EigenvaluesSolveQuadraticPencil) {
  for (int n : {3, 4, 5}) {
    const auto sm = assemble(model(n), 128000);
    const auto ev = eigenvalues(build_E(sm.H, sm.K));
    const Eigen::Index d = sm.H.rows();
    ASSERT_EQ(ev.size(), 2 * d);
    for (Eigen::Index k = 0; k < ev.size(); ++k) {
      const std::complex<double> l = ev[k];
      const Eigen::MatrixXcd pencil = l * l * Eigen::MatrixXcd::Identity(d, d) -
                                      l * sm.H.cast<std::complex<double>>() -
                                      sm.K.cast<std::complex<double>>();
      const double scale = std::abs(l) * std::abs(l) + std::abs(l) * sm.H.norm() + sm.K.norm();
      Eigen::JacobiSVD<Eigen::MatrixXcd> svd(pencil);
      EXPECT_LT(svd.singularValues()(d - 1) / scale, 1e-10) << "N=" << n << " k=" << k;
    }
  }
}

TEST(Companion, SpectrumInvariantUnderStatePermutation) {
  const auto sm = assemble(model(4), 96000);
  const Eigen::Index d = sm.H.rows();
  Eigen::VectorXi idx(d);
  for (Eigen::Index k = 0; k < d; ++k) idx[k] = static_cast<int>((3 * k + 1) % d);
  Eigen::PermutationMatrix<Eigen::Dynamic> p(idx);
  const Eigen::MatrixXd hp = p * sm.H * p.transpose(), kp = p * sm.K * p.transpose();
  const auto a = sorted_magnitudes(eigenvalues(build_E(sm.H, sm.K)));
  const auto b = sorted_magnitudes(eigenvalues(build_E(hp, kp)));
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a[k], b[k], 1e-10);
}

TEST(StabilityReport, LowRateIsUnstable) {
  const auto r = stability_report(model(40), 1000);
  EXPECT_FALSE(r.error);
  EXPECT_FALSE(r.stable);
  EXPECT_GT(r.max_eig_magnitude, 1.5);
  EXPECT_GT(r.eig_count_outside_unit, 0);
}

TEST(StabilityReport, PassiveModelIsStable) {
  PhysicalConstants c;
  c.elements = 40;
  std::vector<double> cf(40);
  for (std::size_t k = 0; k < cf.size(); ++k) cf[k] = 20000.0 * std::pow(0.85, k);
  const auto pm = make_passive_model(c, PassiveParams{}, cf);
  const auto r = stability_report(pm, 128000);
  EXPECT_TRUE(r.stable);
  EXPECT_LT(r.max_eig_magnitude, 1.0 + 1e-6);
  EXPECT_EQ(r.eig_count_outside_unit, 0);
  // uncoupled TM masses contribute a double root at 1 per element
  const auto sm = assemble(pm, 128000);
  const auto mag = sorted_magnitudes(eigenvalues(build_E(sm.H, sm.K)));
  const std::size_t free_modes = 2 * 40;
  EXPECT_NEAR(mag[mag.size() - free_modes], 1.0, 1e-6);
  EXPECT_LT(mag[mag.size() - free_modes - 1], 1.0 - 1e-6);
}

TEST(StabilityReport, ToleranceDecidesBorderline) {
  const auto r = stability_report(model(60), 128000);
  ASSERT_FALSE(r.error);
  const double excess = r.max_eig_magnitude - 1.0;
  ASSERT_GT(excess, 0.0);
  EXPECT_TRUE(stability_report(model(60), 128000, 2 * excess).stable);
  EXPECT_FALSE(stability_report(model(60), 128000, 0.5 * excess).stable);
}

TEST(StabilitySweep, RecordsFailuresPerRate) {
  const std::vector<double> rates{-1.0, 128000.0};
  const auto out = stability_sweep(rates, model(10));
  ASSERT_EQ(out.size(), 2u);
  EXPECT_TRUE(out[0].error.has_value());
  EXPECT_FALSE(out[0].stable);
  EXPECT_FALSE(out[1].error.has_value());
  EXPECT_GT(out[1].max_eig_magnitude, 0.0);
}

TEST(StabilitySweep, RadiusFallsWithSamplingRate) {
  const auto grid = default_stability_grid();
  ASSERT_EQ(grid.size(), 10u);
  EXPECT_EQ(grid.front(), 48000.0);
  EXPECT_EQ(grid.back(), 192000.0);
  const auto out = stability_sweep(grid, model(100));
  for (std::size_t k = 1; k < out.size(); ++k)
    EXPECT_LT(out[k].max_eig_magnitude, out[k - 1].max_eig_magnitude) << grid[k];
}

TEST(StabilitySweep, ParallelMatchesSerial) {
  const std::vector<double> rates{64000.0, 96000.0, 128000.0};
  const auto a = stability_sweep(rates, model(12), 1);
  const auto b = stability_sweep(rates, model(12), 3);
  for (std::size_t k = 0; k < rates.size(); ++k)
    EXPECT_EQ(a[k].max_eig_magnitude, b[k].max_eig_magnitude);
}

TEST(StabilityCsv, Format) {
  std::vector<StabilityReport> rows(2);
  rows[0] = {48000, 1.89, false, 3, std::nullopt};
  rows[1] = {128000, 0.999, true, 0, std::nullopt};
  std::ostringstream os;
  write_stability_csv(os, rows);
  const std::string s = os.str();
  EXPECT_EQ(s.rfind("fs_hz,max_eig_magnitude,stable\n", 0), 0u);
  EXPECT_NE(s.find("48000,1.8"), std::string::npos);
  EXPECT_NE(s.find("128000,0.999"), std::string::npos);
  EXPECT_NE(s.find(",false\n"), std::string::npos);
  EXPECT_NE(s.find(",true\n"), std::string::npos);
}

TEST(NonlinearTrace, RequiresRecordedOmega) {
  const auto m = model(8);
  SimulationConfig cfg;
  const auto r = simulate(std::vector<double>(50, 0.0), m, cfg);
  EXPECT_THROW(nonlinear_stability_trace(r, m), ConfigError);
}

TEST(NonlinearTrace, SilenceReproducesLinearRadius) {
  const auto m = model(15);
  SimulationConfig cfg;
  cfg.record_omega = true;
  const auto r = simulate(std::vector<double>(250, 0.0), m, cfg);
  const auto trace = nonlinear_stability_trace(r, m, 100);
  ASSERT_EQ(trace.size(), 3u);
  EXPECT_EQ(trace[1].step, 100u);
  const double linear = stability_report(m, 128000).max_eig_magnitude;
  for (const auto& t : trace) EXPECT_NEAR(t.radius, linear, 1e-12);
}

TEST(NonlinearTrace, SaturationDoesNotRaiseRadius) {
  const auto m = model(60);
  SimulationConfig cfg;
  cfg.record_omega = true;
  const auto tone = make_tone(128000, 0.01, 3700, 140);
  const auto r = simulate(tone.samples, m, cfg);
  ASSERT_LT(r.omega->minCoeff(), 0.9);
  const double linear = stability_report(m, 128000).max_eig_magnitude;
  for (const auto& t : nonlinear_stability_trace(r, m, 160)) EXPECT_LE(t.radius, linear + 1e-12);
}
