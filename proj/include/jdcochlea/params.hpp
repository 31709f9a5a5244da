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

#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "jdcochlea/errors.hpp"

namespace jdcochlea {

/// Physical constants of the active model. Defaults reproduce the published
/// parameter table, except `height` (see README, "Chamber height").
struct PhysicalConstants {
  double length = 0.035;        // cochlear length [m]
  double height = 0.001;        // chamber height [m]
  double density = 1000.0;      // fluid density [kg m^-3]
  int elements = 500;           // number of BM segments
  double gamma = 1.0;           // feedback gain
  double rl_ratio = 1.0;        // RL/BM displacement ratio
  double tau = 1.0;             // tanh saturation scale
  double bm_mass = 1.35e-2;     // [kg m^-2]
  double tm_mass = 2.3e-3;      // [kg m^-2]
  double me_mass = 2.96e-2;     // middle ear [kg m^-2]
  double me_stiffness = 2.63e8; // [N m^-3]
  double me_damping = 2.8e4;    // [N s m^-3]

  double segment_length() const { return length / elements; }

  void validate() const {
    if (!(length > 0) || !(height > 0) || !(density > 0))
      throw ConfigError("length, height and density must be positive");
    if (elements < 3)
      throw ConfigError("at least 3 elements are required, got " +
                        std::to_string(elements));
    if (!(bm_mass > 0) || !(tm_mass > 0))
      throw ConfigError("membrane masses must be positive");
  }
};

/// Per-element mechanical coefficients; stiffness in N m^-3, damping in
/// N s m^-3, position in m.
struct ElementCoefficients {
  double x = 0;
  double k1 = 0, k2 = 0, k3 = 0, k4 = 0;
  double c1 = 0, c2 = 0, c3 = 0, c4 = 0;
};

/// Passive variant: heavier BM with a fixed quality factor and its own
/// middle-ear loading.
struct PassiveParams {
  double bm_mass = 0.28;
  double quality = 5.0;
  double me_mass = 1.4080;
  double me_stiffness = 2.592e8;
  double me_damping = 32000.0;
};

/// Element start coordinates x_n = n * L / N, n = 0..N-1.
inline std::vector<double> element_positions(const PhysicalConstants& c) {
  if (c.elements < 3)
    throw ConfigError("finite-difference stencil needs N >= 3, got " +
                      std::to_string(c.elements));
  const double dl = c.segment_length();
  std::vector<double> x(static_cast<std::size_t>(c.elements));
  for (std::size_t n = 0; n < x.size(); ++n) x[n] = static_cast<double>(n) * dl;
  return x;
}

inline ElementCoefficients active_coefficients_at(double x) {
  const double o = x + 0.00375;
  ElementCoefficients e;
  e.x = x;
  e.k1 = 4.95e9 * std::exp(-320.0 * o);
  e.k2 = 3.15e7 * std::exp(-352.0 * o);
  e.k3 = 4.5e7 * std::exp(-320.0 * o);
  e.k4 = 2.82e9 * std::exp(-320.0 * o);
  e.c1 = 1.0 + 19700.0 * std::exp(-179.0 * o);
  e.c2 = 113.0 * std::exp(-176.0 * o);
  e.c3 = 22.5 * std::exp(-64.0 * o);
  e.c4 = 9650.0 * std::exp(-164.0 * o);
  return e;
}

inline std::vector<ElementCoefficients> active_coefficients(
    std::span<const double> positions) {
  std::vector<ElementCoefficients> out;
  out.reserve(positions.size());
  for (double x : positions) out.push_back(active_coefficients_at(x));
  return out;
}

/// Undamped local BM resonance f = sqrt(k1/m1) / 2pi of each element.
inline std::vector<double> local_resonance_frequencies(
    std::span<const ElementCoefficients> elems, double bm_mass) {
  std::vector<double> f;
  f.reserve(elems.size());
  for (const auto& e : elems)
    f.push_back(std::sqrt(e.k1 / bm_mass) / (2.0 * M_PI));
  return f;
}

/// BM-only coefficients of the passive model: k1 = (2 pi f)^2 m1 and
/// c1 = sqrt(k1 m1) / Q; every coupling and feedback term is zero.
inline std::vector<ElementCoefficients> passive_coefficients(
    const PassiveParams& p, std::span<const double> positions,
    std::span<const double> cf_hz) {
  if (positions.size() != cf_hz.size())
    throw ConfigError("characteristic-frequency map size mismatch");
  if (!(p.quality > 0)) throw ConfigError("quality factor must be positive");
  if (!(p.bm_mass > 0)) throw ConfigError("passive BM mass must be positive");
  std::vector<ElementCoefficients> out(positions.size());
  for (std::size_t n = 0; n < positions.size(); ++n) {
    if (!(cf_hz[n] > 0))
      throw ConfigError("characteristic frequency must be positive");
    const double w = 2.0 * M_PI * cf_hz[n];
    auto& e = out[n];
    e.x = positions[n];
    e.k1 = w * w * p.bm_mass;
    e.c1 = std::isinf(p.quality) ? 0.0 : std::sqrt(e.k1 * p.bm_mass) / p.quality;
  }
  return out;
}

enum class ModelKind { passive, active };

/// A complete parameter set for one model variant. For the passive variant
/// the constants already carry the passive BM mass, middle-ear values and
/// gamma = 0.
struct CochlearModel {
  ModelKind kind = ModelKind::active;
  PhysicalConstants constants;
  std::vector<ElementCoefficients> elements;

  int size() const { return static_cast<int>(elements.size()); }
  std::vector<double> positions() const {
    std::vector<double> x;
    x.reserve(elements.size());
    for (const auto& e : elements) x.push_back(e.x);
    return x;
  }
};

inline CochlearModel make_active_model(const PhysicalConstants& c) {
  c.validate();
  const auto x = element_positions(c);
  return CochlearModel{ModelKind::active, c, active_coefficients(x)};
}

inline CochlearModel make_passive_model(const PhysicalConstants& c,
                                        const PassiveParams& p,
                                        std::span<const double> cf_hz) {
  c.validate();
  const auto x = element_positions(c);
  CochlearModel m{ModelKind::passive, c, passive_coefficients(p, x, cf_hz)};
  m.constants.bm_mass = p.bm_mass;
  m.constants.gamma = 0.0;
  m.constants.me_mass = p.me_mass;
  m.constants.me_stiffness = p.me_stiffness;
  m.constants.me_damping = p.me_damping;
  return m;
}

// key=value config files ----------------------------------------------------

/// Reads `key = value` lines ('#' starts a comment) on top of the defaults.
/// Unknown keys are rejected so typos do not silently fall back.
inline PhysicalConstants parse_constants(std::istream& in,
                                         PhysicalConstants c = {}) {
  const std::map<std::string, double*> keys = {
      {"L", &c.length},          {"length", &c.length},
      {"H", &c.height},          {"height", &c.height},
      {"rho", &c.density},       {"density", &c.density},
      {"gamma", &c.gamma},       {"g", &c.rl_ratio},
      {"rl_ratio", &c.rl_ratio}, {"tau", &c.tau},
      {"m1", &c.bm_mass},        {"m2", &c.tm_mass},
      {"m_ME", &c.me_mass},      {"k_ME", &c.me_stiffness},
      {"c_ME", &c.me_damping},
  };
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    if (trim(line).empty()) continue;
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    double v = 0;
    try {
      std::size_t used = 0;
      v = std::stod(val, &used);
      if (used != val.size()) throw std::invalid_argument(val);
    } catch (const std::exception&) {
      throw ConfigError("line " + std::to_string(lineno) + ": bad number '" + val + "'");
    }
    if (key == "N" || key == "elements") {
      if (v != std::floor(v)) throw ConfigError("N must be an integer");
      c.elements = static_cast<int>(v);
      continue;
    }
    auto it = keys.find(key);
    if (it == keys.end())
      throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    *it->second = v;
  }
  c.validate();
  return c;
}

inline PhysicalConstants load_constants(const std::string& path,
                                        PhysicalConstants defaults = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  return parse_constants(in, defaults);
}

}  // namespace jdcochlea
