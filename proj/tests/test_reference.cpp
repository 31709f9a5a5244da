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

#include <cmath>

#include "jdcochlea/reference.hpp"
#include "jdcochlea/stimuli.hpp"

using namespace jdcochlea;

namespace {

CochlearModel model(int n) {
  PhysicalConstants c;
  c.elements = n;
  return make_active_model(c);
}

double rel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff() / b.cwiseAbs().maxCoeff();
}

}  // namespace

TEST(SemiDiscrete, ElementBlockStructure) {
  const auto s = build_semi_discrete(model(6));
  for (int k = 0; k < 6; ++k) {
    const int i = 4 * k;
    for (int j = 0; j < 24; ++j) {
      EXPECT_EQ(s.A_E(i + 1, j), j == i ? 1.0 : 0.0);
      EXPECT_EQ(s.A_E(i + 3, j), j == i + 2 ? 1.0 : 0.0);
      if (j < i || j >= i + 4) {
        EXPECT_EQ(s.A_E(i, j), 0.0);
        EXPECT_EQ(s.A_E(i + 2, j), 0.0);
      }
    }
  }
}

TEST(SemiDiscrete, InputAndSelectionMatrices) {
  const auto m = model(5);
  const auto s = build_semi_discrete(m);
  ASSERT_EQ(s.B_E.rows(), 20);
  ASSERT_EQ(s.B_E.cols(), 5);
  ASSERT_EQ(s.C_E.rows(), 5);
  for (int k = 0; k < 5; ++k) {
    EXPECT_DOUBLE_EQ(s.B_E(4 * k, k), 1.0 / m.constants.bm_mass);
    EXPECT_DOUBLE_EQ(s.B_E.col(k).cwiseAbs().sum(), 1.0 / m.constants.bm_mass);
    EXPECT_EQ(s.C_E.row(k).sum(), k < 4 ? 1.0 : 0.0);
    if (k < 4) {
      EXPECT_EQ(s.C_E(k, 4 * k), 1.0);
    }
  }
}

TEST(SemiDiscrete, NoFeedbackDropsActiveTerms) {
  const auto m = model(4);
  for (const auto& e : m.elements) {
    const auto d = element_dynamics(e, m.constants, 0.0);
    const double g = m.constants.rl_ratio, m1 = m.constants.bm_mass;
    EXPECT_DOUBLE_EQ(d.a1, -(e.c1 + g * e.c3) / m1);
    EXPECT_DOUBLE_EQ(d.a0, -(e.k1 + g * e.k3) / m1);
    EXPECT_DOUBLE_EQ(d.b1, e.c3 / m1);
    EXPECT_DOUBLE_EQ(d.b0, e.k3 / m1);
  }
}

TEST(SemiDiscrete, HandAssembledThreeElements) {
  const auto m = model(3);
  const auto& c = m.constants;
  const double g = c.rl_ratio, gm = c.gamma, m1 = c.bm_mass, m2 = c.tm_mass;
  Eigen::MatrixXd ae = Eigen::MatrixXd::Zero(12, 12), be = Eigen::MatrixXd::Zero(12, 3),
                  ce = Eigen::MatrixXd::Zero(3, 12);
  for (int n = 0; n < 3; ++n) {
    const auto& e = m.elements[n];
    Eigen::Matrix4d blk;
    blk << -(e.c1 + g * e.c3 - gm * g * e.c4) / m1, -(e.k1 + g * e.k3 - gm * g * e.k4) / m1,
        (e.c3 - gm * e.c4) / m1, (e.k3 - gm * e.k4) / m1,  //
        1, 0, 0, 0,                                        //
        g * e.c3 / m2, g * e.k3 / m2, -(e.c2 + e.c3) / m2, -(e.k2 + e.k3) / m2,  //
        0, 0, 1, 0;
    ae.block<4, 4>(4 * n, 4 * n) = blk;
    be(4 * n, n) = 1 / m1;
  }
  ce(0, 0) = 1;
  ce(1, 4) = 1;
  const double dl = c.segment_length(), s = c.height / (2 * c.density * dl * dl);
  Eigen::Matrix3d f;
  f << -s * dl / c.height, s * dl / c.height, 0,  //
      s, -2 * s, s,                               //
      0, 0, -1;
  const Eigen::MatrixXd coupling = Eigen::MatrixXd::Identity(12, 12) - be * f.inverse() * ce;
  const Eigen::MatrixXd a = coupling.inverse() * ae, b = coupling.inverse() * be;
  const auto sys = build_semi_discrete(m);
  EXPECT_LT(rel(sys.A_E, ae), 1e-14);
  EXPECT_LT(rel(sys.A, a), 1e-10);
  EXPECT_LT(rel(sys.B, b), 1e-10);
}

TEST(SemiDiscreteRhs, MatchesDenseClosedLoop) {
  const auto m = model(8);
  const auto sys = build_semi_discrete(m);
  SemiDiscreteRhs rhs(m);
  ASSERT_EQ(rhs.size(), 34u);
  std::vector<double> x(34), dx(34);
  for (std::size_t i = 0; i < 32; ++i) x[i] = 1e-9 * std::sin(1.3 * i + 0.2);
  const double stim = 0.4;
  rhs(x, stim, dx);
  const double ame = stim / m.constants.me_mass;
  Eigen::VectorXd q = Eigen::VectorXd::Zero(8);
  q[0] = kInputGain * ame;
  const Eigen::VectorXd xs = Eigen::Map<const Eigen::VectorXd>(x.data(), 32);
  const Eigen::VectorXd expect = sys.A * xs + sys.B * sys.F_inverse * q;
  const Eigen::VectorXd got = Eigen::Map<const Eigen::VectorXd>(dx.data(), 32);
  EXPECT_LT((got - expect).cwiseAbs().maxCoeff() / expect.cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_DOUBLE_EQ(dx[32], ame);
  EXPECT_EQ(dx[33], 0.0);
}

namespace {

// Two uncoupled damped oscillators x'' + 2 z w x' + w^2 x = 0.
struct Toy {
  double w[2] = {3.0, 7.0}, z[2] = {0.1, 0.3};
  void operator()(std::span<const double> s, double, std::span<double> d) const {
    for (int i = 0; i < 2; ++i) {
      d[2 * i] = -2 * z[i] * w[i] * s[2 * i] - w[i] * w[i] * s[2 * i + 1];
      d[2 * i + 1] = s[2 * i];
    }
  }
  double exact(int i, double t) const {  // x(0) = 1, v(0) = 0
    const double wd = w[i] * std::sqrt(1 - z[i] * z[i]);
    return std::exp(-z[i] * w[i] * t) *
           (std::cos(wd * t) + z[i] * w[i] / wd * std::sin(wd * t));
  }
};

double toy_error(int steps) {
  Toy f;
  std::vector<double> x{0, 1, 0, 1}, work;
  const double h = 2.0 / steps;
  for (int k = 0; k < steps; ++k) rk4_step(f, x, h, 0.0, 0.0, 0.0, work);
  return std::max(std::abs(x[1] - f.exact(0, 2.0)), std::abs(x[3] - f.exact(1, 2.0)));
}

}  // namespace

TEST(Rk4, FourthOrderConvergence) {
  const double e1 = toy_error(100), e2 = toy_error(200), e3 = toy_error(400);
  EXPECT_NEAR(std::log2(e1 / e2), 4.0, 0.15);
  EXPECT_NEAR(std::log2(e2 / e3), 4.0, 0.15);
}

TEST(Integrate, ZeroInputStaysAtRest) {
  const auto r = integrate(std::vector<double>(200, 0.0), model(20));
  EXPECT_EQ(r.bm.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(r.mode, "semidiscrete");
}

TEST(Integrate, RejectsCoarseInternalRate) {
  ReferenceConfig cfg;
  const std::vector<double> x(10, 0.0);
  cfg.internal_rate = 256000;
  EXPECT_THROW(integrate(x, model(5), cfg), ConfigError);
  cfg.internal_rate = 600000;
  EXPECT_THROW(integrate(x, model(5), cfg), ConfigError);
  cfg.internal_rate = 512000;
  cfg.stride = 0;
  EXPECT_THROW(integrate(x, model(5), cfg), ConfigError);
}

TEST(Integrate, StrideAndTmRecording) {
  ReferenceConfig cfg;
  cfg.record_tm = true;
  cfg.stride = 3;
  const auto tone = make_tone(128000, 0.002, 3700, 60);
  const auto r = integrate(tone.samples, model(10), cfg);
  EXPECT_EQ(r.frames(), (256 + 2) / 3);
  ASSERT_TRUE(r.tm.has_value());
  EXPECT_GT(r.tm->cwiseAbs().maxCoeff(), 0.0);
}

TEST(Integrate, StepHalvingConverges) {
  const auto m = model(500);
  const auto tone = make_tone(128000, 0.1, 3700, 0);
  ReferenceConfig a, b;
  b.internal_rate = 1024000;
  const auto pa = steady_state_profile(integrate(tone.samples, m, a), 3700);
  const auto pb = steady_state_profile(integrate(tone.samples, m, b), 3700);
  double num = 0, den = 0;
  for (std::size_t k = 0; k < pa.size(); ++k) {
    num += (pa[k] - pb[k]) * (pa[k] - pb[k]);
    den += pb[k] * pb[k];
  }
  EXPECT_LT(std::sqrt(num / den), 1e-3);
}

TEST(Integrate, NonlinearMatchesLinearAtLowLevel) {
  const auto m = model(40);
  const auto tone = make_tone(128000, 0.01, 3700, 0);
  ReferenceConfig lin, nl;
  nl.nonlinear = true;
  const auto a = integrate(tone.samples, m, lin);
  const auto b = integrate(tone.samples, m, nl);
  EXPECT_LT(rel(b.bm, a.bm), 1e-4);
}

TEST(FrequencyResponse, AgreesWithTimeDomainSteadyState) {
  const auto m = model(500);
  const auto tone = make_tone(128000, 0.1, 3700, 0);
  const auto td = steady_state_profile(integrate(tone.samples, m), 3700);
  const Eigen::VectorXd fd = frequency_response(m, 3700).cwiseAbs();
  Eigen::Index kf = 0;
  fd.maxCoeff(&kf);
  EXPECT_LE(std::abs(static_cast<long>(argmax(td)) - static_cast<long>(kf)), 1);
  const Eigen::VectorXd t = Eigen::Map<const Eigen::VectorXd>(td.data(), 500) / td[argmax(td)];
  const Eigen::VectorXd fn = fd / fd.maxCoeff();
  EXPECT_LT((t - fn).norm() / fn.norm(), 0.02);
}

TEST(CharacteristicFrequencies, DecreaseFromBaseToApex) {
  const auto cf = characteristic_frequencies(model(500));
  ASSERT_EQ(cf.size(), 500u);
  for (std::size_t k = 1; k < cf.size(); ++k) EXPECT_LT(cf[k], cf[k - 1]) << k;
  EXPECT_GT(cf.front(), 15000.0);
  EXPECT_LT(cf.back(), 200.0);
  EXPECT_GT(cf.back(), 20.0);
}

TEST(CharacteristicFrequencies, PlacesOfReferenceTones) {
  const auto m = model(500);
  const std::vector<double> f{300, 3700, 15000};
  const auto x = characteristic_places(m, f);
  EXPECT_NEAR(x[1], 0.012, 0.001);
  EXPECT_GT(x[0], x[1]);
  EXPECT_LT(x[2], x[1]);
}

TEST(MatchedPassiveModel, IsPassive) {
  PhysicalConstants c;
  c.elements = 100;
  const auto pm = make_matched_passive_model(c);
  EXPECT_EQ(pm.kind, ModelKind::passive);
  EXPECT_EQ(pm.constants.gamma, 0.0);
  for (const auto& e : pm.elements) {
    EXPECT_EQ(e.k2 + e.k3 + e.k4 + e.c2 + e.c3 + e.c4, 0.0);
    EXPECT_GT(e.k1, 0.0);
  }
}
