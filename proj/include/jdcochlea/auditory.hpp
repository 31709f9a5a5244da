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

#include <fftw3.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "jdcochlea/errors.hpp"
#include "jdcochlea/params.hpp"
#include "jdcochlea/solver.hpp"
#include "jdcochlea/stimuli.hpp"

namespace jdcochlea {

/// Outer/middle-ear transfer in dB; `f_hz` is converted to kHz internally.
inline double outer_middle_gain(double f_hz) {
  if (!(f_hz > 0)) throw ConfigError("frequency must be positive");
  const double f = f_hz / 1000.0;
  return -3.64 * std::pow(f, -0.8) + 6.5 * std::exp(-0.6 * (f - 3.3) * (f - 3.3)) -
         1e-3 * std::pow(f, 4.0);
}

inline double ihc_pole(double fs, double cutoff = 30.0) {
  return std::exp(-2.0 * M_PI * cutoff / fs);
}

/// y[n] = (1 - c0) |x[n]| + c0 y[n-1], starting from rest.
inline std::vector<double> ihc_lowpass(std::span<const double> x, double fs,
                                       double cutoff = 30.0) {
  const double c0 = ihc_pole(fs, cutoff);
  std::vector<double> y(x.size());
  double s = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    s = (1.0 - c0) * std::abs(x[k]) + c0 * s;
    y[k] = s;
  }
  return y;
}

inline std::vector<double> ihc_envelope(std::span<const double> x, double fs,
                                        double cutoff = 30.0,
                                        double exponent = 1.0 / 3.0) {
  auto y = ihc_lowpass(x, fs, cutoff);
  for (double& v : y) v = std::pow(v, exponent);
  return y;
}

/// Band-limited rational resampler: Kaiser-windowed sinc, polyphase form.
/// Passband edge 0.9 and stopband edge 1.1 of the lower Nyquist rate.
class Resampler {
 public:
  Resampler(double from_rate, double to_rate, double attenuation_db = 80.0) {
    if (!(from_rate > 0) || !(to_rate > 0)) throw ConfigError("rates must be positive");
    if (from_rate != std::floor(from_rate) || to_rate != std::floor(to_rate) ||
        from_rate > 1e9 || to_rate > 1e9)
      throw UnsupportedRatio("only integer sample rates are supported");
    const auto a = static_cast<long long>(from_rate), b = static_cast<long long>(to_rate);
    const long long g = std::gcd(a, b);
    up_ = b / g;
    down_ = a / g;
    if (up_ > 4096 || down_ > 4096)
      throw UnsupportedRatio("rate ratio " + std::to_string(b / g) + "/" +
                             std::to_string(a / g) + " is too fine");
    if (up_ == 1 && down_ == 1) return;
    const double nyq = 0.5 / static_cast<double>(std::max(up_, down_));
    const double width = 0.2 * nyq;
    const double beta = attenuation_db > 50 ? 0.1102 * (attenuation_db - 8.7)
                                            : 0.5842 * std::pow(attenuation_db - 21, 0.4) +
                                                  0.07886 * (attenuation_db - 21);
    long taps = static_cast<long>(
        std::ceil((attenuation_db - 8.0) / (2.285 * 2.0 * M_PI * width))) + 1;
    taps += (taps % 2 == 0);
    taps_ = taps;
    h_.resize(static_cast<std::size_t>(taps));
    const double mid = 0.5 * static_cast<double>(taps - 1);
    const double i0b = std::cyl_bessel_i(0.0, beta);
    for (long k = 0; k < taps; ++k) {
      const double t = static_cast<double>(k) - mid;
      const double sinc = t == 0 ? 2.0 * nyq : std::sin(2.0 * M_PI * nyq * t) / (M_PI * t);
      const double r = t / mid;
      h_[static_cast<std::size_t>(k)] =
          sinc * std::cyl_bessel_i(0.0, beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0b;
    }
    for (long p = 0; p < up_; ++p) {
      double s = 0;
      for (long k = p; k < taps; k += up_) s += h_[static_cast<std::size_t>(k)];
      for (long k = p; k < taps; k += up_) h_[static_cast<std::size_t>(k)] /= s;
    }
  }

  long up() const { return up_; }
  long down() const { return down_; }

  std::vector<double> operator()(std::span<const double> x) const {
    if (up_ == 1 && down_ == 1) return {x.begin(), x.end()};
    const auto n = static_cast<long long>(x.size());
    const long long out_len = (n * up_ + down_ - 1) / down_;
    const long long delay = (taps_ - 1) / 2;
    std::vector<double> y(static_cast<std::size_t>(out_len));
    for (long long m = 0; m < out_len; ++m) {
      const long long pos = m * down_ + delay;
      long long k0 = pos % up_;
      long long i = pos / up_;
      double acc = 0;
      for (long long k = k0; k < taps_ && i >= 0; k += up_, --i)
        if (i < n) acc += h_[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(i)];
      y[static_cast<std::size_t>(m)] = acc;
    }
    return y;
  }

 private:
  long up_ = 1, down_ = 1, taps_ = 0;
  std::vector<double> h_;
};

inline std::vector<double> resample(std::span<const double> x, double from_rate,
                                    double to_rate) {
  return Resampler(from_rate, to_rate)(x);
}

struct Spectrogram {
  Field db;  // frames x bins, dB re 20 uPa amplitude, floored at 0
  double frame_rate = 0;
  double bin_hz = 0;
};

/// Hann-window STFT with amplitude normalisation; level 20 log10(A) + 96.
inline Spectrogram log_spectrogram(std::span<const double> x, double fs,
                                   double window = 0.01, int hop = 16,
                                   double floor_db = 0.0) {
  if (hop < 1) throw ConfigError("hop must be >= 1");
  const auto w = static_cast<int>(std::llround(window * fs));
  if (w < 2) throw ConfigError("window shorter than two samples");
  const int bins = w / 2 + 1;
  const long frames =
      x.size() < static_cast<std::size_t>(w) ? 0 : (static_cast<long>(x.size()) - w) / hop + 1;
  Spectrogram s;
  s.db = Field::Constant(frames, bins, floor_db);
  s.frame_rate = fs / hop;
  s.bin_hz = fs / w;
  std::vector<double> win(static_cast<std::size_t>(w));
  double wsum = 0;
  for (int k = 0; k < w; ++k) {
    win[static_cast<std::size_t>(k)] = 0.5 - 0.5 * std::cos(2.0 * M_PI * k / w);
    wsum += win[static_cast<std::size_t>(k)];
  }
  if (frames == 0) return s;
  double* in = fftw_alloc_real(static_cast<std::size_t>(w));
  fftw_complex* out = fftw_alloc_complex(static_cast<std::size_t>(bins));
  fftw_plan plan = fftw_plan_dft_r2c_1d(w, in, out, FFTW_ESTIMATE);
  for (long f = 0; f < frames; ++f) {
    for (int k = 0; k < w; ++k)
      in[k] = x[static_cast<std::size_t>(f * hop + k)] * win[static_cast<std::size_t>(k)];
    fftw_execute(plan);
    for (int b = 0; b < bins; ++b) {
      const double amp = 2.0 * std::hypot(out[b][0], out[b][1]) / wsum;
      const double db = amp > 0 ? 20.0 * std::log10(amp) + 96.0 : floor_db;
      s.db(f, b) = std::max(db, floor_db);
    }
  }
  fftw_destroy_plan(plan);
  fftw_free(in);
  fftw_free(out);
  return s;
}

struct PipelineConfig {
  double fs_model = 128000.0;
  double ihc_cutoff = 30.0;
  double compression_exponent = 1.0 / 3.0;
  bool apply_outer_middle = true;
  Mode mode = Mode::nonlinear;
  int output_stride = 64;
  double input_gain = kInputGain;

  void validate() const {
    if (!(fs_model > 0)) throw ConfigError("model rate must be positive");
    if (!(ihc_cutoff > 0) || !(ihc_cutoff < fs_model / 2))
      throw ConfigError("IHC cutoff must lie in (0, fs/2)");
    if (!(compression_exponent > 0) || compression_exponent > 1)
      throw ConfigError("compression exponent must lie in (0, 1]");
    if (output_stride < 1) throw ConfigError("output stride must be >= 1");
  }
};

struct Cochleagram {
  Field data;  // frames x elements, non-negative
  double frame_rate = 0;
  double spl_db = 0;
  std::vector<double> channel_gain_db;
  long resample_up = 1, resample_down = 1;
};

/// Resample, scale to `spl`, run the cochlea, weight each element by the
/// outer/middle-ear gain at its characteristic frequency, then rectify,
/// low-pass and compress. Every `output_stride`-th envelope sample is kept.
inline Cochleagram cochleagram(std::span<const double> audio, double audio_fs, double spl,
                               const CochlearModel& m, std::span<const double> cf_hz,
                               const PipelineConfig& cfg = {}) {
  cfg.validate();
  if (cf_hz.size() != m.elements.size())
    throw ConfigError("characteristic-frequency map size mismatch");
  const Resampler rs(audio_fs, cfg.fs_model);
  auto x = rs(audio);
  scale_to_spl(x, spl);

  SimulationConfig sc;
  sc.fs = cfg.fs_model;
  sc.mode = cfg.mode;
  sc.input_gain = cfg.input_gain;
  detail::check_config(m, sc);
  const auto drive = middle_ear_drive(x, m.constants, cfg.fs_model, cfg.input_gain);
  FastStepper st(m, cfg.fs_model, cfg.mode == Mode::nonlinear);

  const std::size_t n = m.elements.size();
  Cochleagram c;
  c.spl_db = spl;
  c.frame_rate = cfg.fs_model / cfg.output_stride;
  c.resample_up = rs.up();
  c.resample_down = rs.down();
  std::vector<double> gain(n, 1.0);
  c.channel_gain_db.assign(n, 0.0);
  if (cfg.apply_outer_middle)
    for (std::size_t i = 0; i < n; ++i) {
      c.channel_gain_db[i] = outer_middle_gain(cf_hz[i]);
      gain[i] = std::pow(10.0, c.channel_gain_db[i] / 20.0);
    }
  const auto stride = static_cast<std::size_t>(cfg.output_stride);
  c.data = Field::Zero(static_cast<Eigen::Index>((x.size() + stride - 1) / stride),
                       static_cast<Eigen::Index>(n));
  const double c0 = ihc_pole(cfg.fs_model, cfg.ihc_cutoff);
  std::vector<double> lp(n, 0.0);
  for (std::size_t j = 0; j < x.size(); ++j) {
    st.advance(drive[j]);
    const auto bm = st.bm();
    for (std::size_t i = 0; i < n; ++i)
      lp[i] = (1.0 - c0) * std::abs(gain[i] * bm[i]) + c0 * lp[i];
    if (j % stride != 0) continue;
    const auto row = static_cast<Eigen::Index>(j / stride);
    for (std::size_t i = 0; i < n; ++i)
      c.data(row, static_cast<Eigen::Index>(i)) = std::pow(lp[i], cfg.compression_exponent);
  }
  return c;
}

/// Cosine similarity of two equally shaped fields.
inline double similarity(const Field& a, const Field& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ConfigError("similarity needs equally shaped fields");
  const double na = a.norm(), nb = b.norm();
  if (na == 0 && nb == 0) return 1.0;
  if (na == 0 || nb == 0) return 0.0;
  return (a.array() * b.array()).sum() / (na * nb);
}

/// Mean similarity over all distinct pairs.
inline double mean_pairwise_similarity(std::span<const Field> fields) {
  double sum = 0;
  int count = 0;
  for (std::size_t i = 0; i < fields.size(); ++i)
    for (std::size_t j = i + 1; j < fields.size(); ++j) {
      sum += similarity(fields[i], fields[j]);
      ++count;
    }
  if (count == 0) throw ConfigError("need at least two fields");
  return sum / count;
}

inline std::vector<double> spl_ladder() { return {0, 20, 40, 60, 80, 100, 120}; }

/// Mean pairwise similarity of dB spectrograms of `audio` scaled to each level.
inline double spectrogram_ladder_similarity(std::span<const double> audio, double fs,
                                            std::span<const double> levels, int hop = 16) {
  std::vector<Field> fields;
  for (double spl : levels) {
    std::vector<double> x(audio.begin(), audio.end());
    scale_to_spl(x, spl);
    fields.push_back(log_spectrogram(x, fs, 0.01, hop).db);
  }
  return mean_pairwise_similarity(fields);
}

}  // namespace jdcochlea
