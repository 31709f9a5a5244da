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
#include <limits>
#include <sstream>

#include "jdcochlea/params.hpp"
#include "jdcochlea/reference.hpp"

using namespace jdcochlea;

TEST(ElementPositions, UniformGridFromZero) {
  PhysicalConstants c;
  const auto x = element_positions(c);
  ASSERT_EQ(x.size(), 500u);
  EXPECT_DOUBLE_EQ(c.segment_length(), 7e-5);
  EXPECT_EQ(x[0], 0.0);
  EXPECT_DOUBLE_EQ(x[1], 7e-5);
  EXPECT_DOUBLE_EQ(x[499], 499 * 7e-5);
}

TEST(ElementPositions, SmallGrid) {
  PhysicalConstants c;
  c.length = 1.0;
  c.elements = 4;
  const auto x = element_positions(c);
  EXPECT_EQ(x, (std::vector<double>{0, 0.25, 0.5, 0.75}));
}

TEST(ElementPositions, RejectsTooFewElements) {
  PhysicalConstants c;
  c.elements = 2;
  EXPECT_THROW(element_positions(c), ConfigError);
}

TEST(PhysicalConstants, Defaults) {
  PhysicalConstants c;
  EXPECT_EQ(c.length, 0.035);
  EXPECT_EQ(c.height, 0.001);
  EXPECT_EQ(c.density, 1000.0);
  EXPECT_EQ(c.elements, 500);
  EXPECT_EQ(c.gamma, 1.0);
  EXPECT_EQ(c.rl_ratio, 1.0);
  EXPECT_EQ(c.tau, 1.0);
  EXPECT_EQ(c.bm_mass, 1.35e-2);
  EXPECT_EQ(c.tm_mass, 2.3e-3);
  EXPECT_EQ(c.me_mass, 2.96e-2);
  EXPECT_EQ(c.me_stiffness, 2.63e8);
  EXPECT_EQ(c.me_damping, 2.8e4);
  EXPECT_NO_THROW(c.validate());
}

TEST(PhysicalConstants, ValidationRejectsNonPositive) {
  for (auto mutate : {+[](PhysicalConstants& c) { c.length = 0; },
                      +[](PhysicalConstants& c) { c.height = -1; },
                      +[](PhysicalConstants& c) { c.density = 0; },
                      +[](PhysicalConstants& c) { c.elements = 1; }}) {
    PhysicalConstants c;
    mutate(c);
    EXPECT_THROW(c.validate(), ConfigError);
  }
}

// Values from tests/oracles/frozen_values.py (50-digit evaluation).
TEST(ActiveCoefficients, BaseElementMatchesOracle) {
  const auto e = active_coefficients_at(0.0);
  EXPECT_NEAR(e.k1, 1490911348.9654004, 1490911348.9654004 * 1e-14);
  EXPECT_NEAR(e.k2, 8414762.0119242867, 8414762.0119242867 * 1e-14);
  EXPECT_NEAR(e.k3, 13553739.536049094, 13553739.536049094 * 1e-14);
  EXPECT_NEAR(e.k4, 849367677.59240991, 849367677.59240991 * 1e-14);
  EXPECT_NEAR(e.c1, 10069.066030901284, 10069.066030901284 * 1e-14);
  EXPECT_NEAR(e.c2, 58.404200797562014, 58.404200797562014 * 1e-14);
  EXPECT_NEAR(e.c3, 17.699126873997452, 17.699126873997452 * 1e-14);
  EXPECT_NEAR(e.c4, 5217.1846397349049, 5217.1846397349049 * 1e-14);
}

TEST(ActiveCoefficients, PositiveFiniteAndMonotone) {
  PhysicalConstants c;
  const auto x = element_positions(c);
  const auto e = active_coefficients(x);
  for (std::size_t n = 0; n < e.size(); ++n) {
    for (double v : {e[n].k1, e[n].k2, e[n].k3, e[n].k4, e[n].c1, e[n].c2, e[n].c3, e[n].c4}) {
      EXPECT_TRUE(std::isfinite(v));
      EXPECT_GT(v, 0.0);
    }
    EXPECT_GT(e[n].c1, 1.0);
    if (n > 0) {
      EXPECT_LT(e[n].k1, e[n - 1].k1);
    }
  }
}

TEST(ActiveCoefficients, ExponentialRatio) {
  PhysicalConstants c;
  const auto x = element_positions(c);
  const auto e = active_coefficients(x);
  const double expected = std::exp(320.0 * c.segment_length());
  for (std::size_t n = 0; n + 1 < e.size(); ++n)
    EXPECT_NEAR(e[n].k1 / e[n + 1].k1, expected, 1e-12);
}

TEST(PassiveCoefficients, UnitStiffnessDamping) {
  PassiveParams p;
  const double f = 1.0 / (2.0 * M_PI * std::sqrt(p.bm_mass));
  const std::vector<double> x{0.0}, cf{f};
  const auto e = passive_coefficients(p, x, cf);
  EXPECT_NEAR(e[0].k1, 1.0, 1e-14);
  EXPECT_NEAR(e[0].c1, 0.10583005244258362, 1e-15);
  EXPECT_EQ(e[0].k2, 0.0);
  EXPECT_EQ(e[0].k3, 0.0);
  EXPECT_EQ(e[0].k4, 0.0);
  EXPECT_EQ(e[0].c2, 0.0);
  EXPECT_EQ(e[0].c3, 0.0);
  EXPECT_EQ(e[0].c4, 0.0);
}

TEST(PassiveCoefficients, InfiniteQualityHasNoDamping) {
  PassiveParams p;
  p.quality = std::numeric_limits<double>::infinity();
  const std::vector<double> x{0.0}, cf{1000.0};
  EXPECT_EQ(passive_coefficients(p, x, cf)[0].c1, 0.0);
}

TEST(PassiveCoefficients, TableDefaults) {
  PassiveParams p;
  EXPECT_EQ(p.bm_mass, 0.28);
  EXPECT_EQ(p.quality, 5.0);
}

TEST(PassiveCoefficients, RejectsBadInputs) {
  PassiveParams p;
  const std::vector<double> x{0.0};
  EXPECT_THROW(passive_coefficients(p, x, std::vector<double>{0.0}), ConfigError);
  EXPECT_THROW(passive_coefficients(p, x, std::vector<double>{-5.0}), ConfigError);
  p.quality = 0;
  EXPECT_THROW(passive_coefficients(p, x, std::vector<double>{100.0}), ConfigError);
  p.quality = -1;
  EXPECT_THROW(passive_coefficients(p, x, std::vector<double>{100.0}), ConfigError);
}

TEST(PassiveCoefficients, QualityIdentityHoldsEverywhere) {
  PhysicalConstants c;
  PassiveParams p;
  const auto model = make_matched_passive_model(c, p);
  EXPECT_EQ(model.constants.gamma, 0.0);
  EXPECT_EQ(model.constants.bm_mass, p.bm_mass);
  for (const auto& e : model.elements) {
    const double lhs = e.c1 * e.c1 * p.quality * p.quality;
    EXPECT_NEAR(lhs, e.k1 * p.bm_mass, 1e-12 * e.k1 * p.bm_mass);
  }
}

TEST(ParseConstants, KeysCommentsAndDefaults) {
  std::istringstream in(
      "# comment\n"
      "H = 0.002  # chamber\n"
      "\n"
      "N=64\n"
      "gamma=0.5\n"
      "m_ME = 0.01\n");
  const auto c = parse_constants(in);
  EXPECT_EQ(c.height, 0.002);
  EXPECT_EQ(c.elements, 64);
  EXPECT_EQ(c.gamma, 0.5);
  EXPECT_EQ(c.me_mass, 0.01);
  EXPECT_EQ(c.length, 0.035);
}

TEST(ParseConstants, RejectsMalformedInput) {
  for (const char* text : {"bogus = 1\n", "H 0.1\n", "H = abc\n", "N = 2.5\n", "N = 2\n", "L = -1\n"}) {
    std::istringstream in(text);
    EXPECT_THROW(parse_constants(in), ConfigError) << text;
  }
}

TEST(LoadConstants, MissingFile) {
  EXPECT_THROW(load_constants("/nonexistent/params.cfg"), ConfigError);
}

TEST(LocalResonance, MatchesStiffnessOverMass) {
  const auto e = active_coefficients_at(0.0);
  const std::vector<ElementCoefficients> v{e};
  const auto f = local_resonance_frequencies(v, 1.35e-2);
  EXPECT_NEAR(f[0], std::sqrt(e.k1 / 1.35e-2) / (2 * M_PI), 1e-9);
}
