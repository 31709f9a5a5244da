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
#include <string>
#include <vector>

#include "jdcochlea/errors.hpp"
#include "jdcochlea/params.hpp"
#include "jdcochlea/solver.hpp"

namespace jdcochlea {

struct Stimulus {
  std::vector<double> samples;  // Pa
  double fs = 0;
  double spl_db = 0;
  std::string kind;
};

inline double peak_abs(std::span<const double> x) {
  double m = 0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

/// Gain that brings `x` to `spl` dB with the sine (RMS) reference
/// s = 10^((SPL - 96)/20) / (max|x| / sqrt 2).
inline double spl_scale(std::span<const double> x, double spl) {
  const double peak = peak_abs(x);
  if (!(peak > 0)) return 0.0;
  return std::pow(10.0, (spl - 96.0) / 20.0) / (peak / std::sqrt(2.0));
}

/// SPL = 20 log10(max|x|) + 96.
inline double peak_spl(std::span<const double> x) {
  return 20.0 * std::log10(peak_abs(x)) + 96.0;
}

/// SPL of the sine whose peak equals max|x|; exact inverse of spl_scale().
inline double sine_spl(std::span<const double> x) {
  return 20.0 * std::log10(peak_abs(x) / std::sqrt(2.0)) + 96.0;
}

inline void scale_to_spl(std::vector<double>& x, double spl) {
  const double s = spl_scale(x, spl);
  for (double& v : x) v *= s;
}

namespace detail {

inline std::size_t sample_count(double fs, double duration) {
  if (!(fs > 0)) throw ConfigError("sampling rate must be positive");
  if (!(duration > 0)) throw ConfigError("duration must be positive");
  const auto n = static_cast<std::size_t>(std::llround(duration * fs));
  if (n == 0) throw ConfigError("duration shorter than one sample");
  return n;
}

inline void check_frequency(double f, double fs) {
  if (!(f > 0)) throw ConfigError("frequency must be positive");
  if (!(f < fs / 2.0))
    throw ConfigError("frequency " + std::to_string(f) + " Hz is not below Nyquist (" +
                      std::to_string(fs / 2.0) + " Hz)");
}

}  // namespace detail

/// Single-sample pulse whose peak level 20 log10(max|x|) + 96 equals `spl`.
inline Stimulus make_impulse(double fs, double duration, double spl) {
  Stimulus s{std::vector<double>(detail::sample_count(fs, duration), 0.0), fs, spl, "impulse"};
  s.samples[0] = std::pow(10.0, (spl - 96.0) / 20.0);
  return s;
}

inline Stimulus make_tone(double fs, double duration, double f, double spl) {
  detail::check_frequency(f, fs);
  Stimulus s{std::vector<double>(detail::sample_count(fs, duration)), fs, spl, "tone"};
  for (std::size_t k = 0; k < s.samples.size(); ++k)
    s.samples[k] = std::sin(2.0 * M_PI * f * static_cast<double>(k) / fs);
  scale_to_spl(s.samples, spl);
  return s;
}

/// Linear-frequency sweep from f_start at t = 0 to f_end at t = duration.
inline Stimulus make_chirp(double fs, double duration, double f_start, double f_end,
                           double spl) {
  detail::check_frequency(f_start, fs);
  detail::check_frequency(f_end, fs);
  Stimulus s{std::vector<double>(detail::sample_count(fs, duration)), fs, spl, "chirp"};
  const double rate = (f_end - f_start) / duration;
  for (std::size_t k = 0; k < s.samples.size(); ++k) {
    const double t = static_cast<double>(k) / fs;
    s.samples[k] = std::sin(2.0 * M_PI * (f_start * t + 0.5 * rate * t * t));
  }
  scale_to_spl(s.samples, spl);
  return s;
}

inline void pad_silence(Stimulus& s, double seconds) {
  if (seconds < 0) throw ConfigError("padding must be non-negative");
  s.samples.resize(s.samples.size() + static_cast<std::size_t>(std::llround(seconds * s.fs)), 0.0);
}

/// |DFT| of x at bin b (length of x as transform size).
inline double bin_magnitude(std::span<const double> x, long b) {
  const double w = -2.0 * M_PI * static_cast<double>(b) / static_cast<double>(x.size());
  std::complex<double> acc = 0, rot(std::cos(w), std::sin(w)), ph = 1.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    acc += x[k] * ph;
    ph *= rot;
    if ((k & 1023) == 1023) ph /= std::abs(ph);
  }
  return std::abs(acc);
}

inline constexpr double kSettleTime = 0.06;

/// Nearest-bin DFT magnitude of the last `window` seconds of each element.
inline std::vector<double> steady_state_profile(const CochleaResponse& r, double f,
                                                double window = 0.03,
                                                double settle = kSettleTime) {
  const double rate = r.frame_rate();
  const double duration = static_cast<double>(r.frames()) / rate;
  if (!(window > 0)) throw ConfigError("window must be positive");
  if (!(duration > window + settle))
    throw WindowTooLong("response of " + std::to_string(duration * 1e3) +
                        " ms is too short for a " + std::to_string(window * 1e3) +
                        " ms window after " + std::to_string(settle * 1e3) + " ms settling");
  const auto w = static_cast<Eigen::Index>(std::llround(window * rate));
  const long b = std::lround(f * static_cast<double>(w) / rate);
  std::vector<double> prof(static_cast<std::size_t>(r.elements()));
  std::vector<double> col(static_cast<std::size_t>(w));
  for (Eigen::Index n = 0; n < r.elements(); ++n) {
    for (Eigen::Index k = 0; k < w; ++k)
      col[static_cast<std::size_t>(k)] = r.bm(r.frames() - w + k, n);
    prof[static_cast<std::size_t>(n)] = bin_magnitude(col, b);
  }
  return prof;
}

inline std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

/// Width in metres of the region around the peak where the profile stays
/// within 3 dB of its maximum, with linear interpolation at the edges.
inline double positional_bandwidth(std::span<const double> profile,
                                   std::span<const double> positions) {
  const std::size_t k = argmax(profile);
  const double level = profile[k] / std::sqrt(2.0);
  auto crossing = [&](std::size_t inside, std::size_t outside) {
    const double a = profile[inside], b = profile[outside];
    const double t = (a - level) / (a - b);
    return positions[inside] + t * (positions[outside] - positions[inside]);
  };
  std::size_t lo = k, hi = k;
  while (lo > 0 && profile[lo - 1] >= level) --lo;
  while (hi + 1 < profile.size() && profile[hi + 1] >= level) ++hi;
  const double left = lo > 0 ? crossing(lo, lo - 1) : positions[0];
  const double right = hi + 1 < profile.size() ? crossing(hi, hi + 1) : positions[hi];
  return right - left;
}

enum class TransitCriterion { onset, peak };

struct TransitTime {
  double seconds = 0;
  double base_time = 0;
  double apex_time = 0;
  std::size_t apex_element = 0;
};

/// Base-to-apex travel time of an impulse response. `onset` uses the first
/// crossing of `threshold` times each element's own peak; `peak` uses the
/// time of each element's maximum displacement.
inline TransitTime transit_time(const CochleaResponse& r,
                                TransitCriterion how = TransitCriterion::onset,
                                double threshold = 0.01, double apex_fraction = 0.95) {
  if (r.elements() < 2 || r.frames() < 1) throw NoResponse("empty response");
  const auto apex = static_cast<Eigen::Index>(std::floor(apex_fraction * static_cast<double>(r.elements())));
  const Eigen::Index a = std::min(apex, r.elements() - 1);
  auto when = [&](Eigen::Index n) -> double {
    const Eigen::VectorXd col = r.bm.col(n).cwiseAbs();
    Eigen::Index at = 0;
    const double peak = col.maxCoeff(&at);
    if (!(peak > 0)) throw NoResponse("element " + std::to_string(n) + " never moves");
    if (how == TransitCriterion::peak) return static_cast<double>(at) / r.frame_rate();
    for (Eigen::Index k = 0; k < col.size(); ++k)
      if (col[k] >= threshold * peak) return static_cast<double>(k) / r.frame_rate();
    throw NoResponse("element " + std::to_string(n) + " never crosses threshold");
  };
  TransitTime t;
  t.base_time = when(0);
  t.apex_time = when(a);
  t.seconds = t.apex_time - t.base_time;
  t.apex_element = static_cast<std::size_t>(a);
  return t;
}

/// For each frequency, the position where the full-record DFT magnitude at
/// the nearest bin is largest.
inline std::vector<double> chirp_place_map(const CochleaResponse& r,
                                           std::span<const double> freqs) {
  const auto t = static_cast<std::size_t>(r.frames());
  std::vector<double> out;
  std::vector<double> col(t);
  for (double f : freqs) {
    const long b = std::lround(f * static_cast<double>(t) / r.frame_rate());
    std::vector<double> prof(static_cast<std::size_t>(r.elements()));
    for (Eigen::Index n = 0; n < r.elements(); ++n) {
      for (std::size_t k = 0; k < t; ++k) col[k] = r.bm(static_cast<Eigen::Index>(k), n);
      prof[static_cast<std::size_t>(n)] = bin_magnitude(col, b);
    }
    out.push_back(r.positions[argmax(prof)]);
  }
  return out;
}

struct IoPoint {
  double spl_db = 0;
  double output_db = 0;  // 20 log10 of the peak steady-state magnitude
  double place_m = 0;
  std::size_t element = 0;
};

inline IoPoint io_point(const CochlearModel& m, const SimulationConfig& cfg,
                        double f, double spl, double duration = 0.1) {
  if (spl < 0 || spl > 140) throw ConfigError("input level must lie in [0, 140] dB SPL");
  const auto stim = make_tone(cfg.fs, duration, f, spl);
  const auto r = simulate(stim.samples, m, cfg);
  const auto prof = steady_state_profile(r, f);
  const std::size_t k = argmax(prof);
  return {spl, 20.0 * std::log10(prof[k]), r.positions[k], k};
}

inline std::vector<IoPoint> io_curve(const CochlearModel& m, const SimulationConfig& cfg,
                                     double f, std::span<const double> spls,
                                     double duration = 0.1) {
  std::vector<IoPoint> out;
  for (double spl : spls) out.push_back(io_point(m, cfg, f, spl, duration));
  return out;
}

/// Least-squares slope of output versus input level over [lo, hi].
inline double io_slope(std::span<const IoPoint> pts, double lo, double hi) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0, n = 0;
  for (const auto& p : pts) {
    if (p.spl_db < lo || p.spl_db > hi) continue;
    sx += p.spl_db;
    sy += p.output_db;
    sxx += p.spl_db * p.spl_db;
    sxy += p.spl_db * p.output_db;
    n += 1;
  }
  if (n < 2) throw ConfigError("need two levels to fit a slope");
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace jdcochlea
