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
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "jdcochlea/errors.hpp"
#include "jdcochlea/solver.hpp"

namespace jdcochlea {

inline std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// One row per line, comma separated, full precision.
template <class Derived>
void write_matrix_csv(std::ostream& os, const Eigen::MatrixBase<Derived>& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) os << ',';
      os << fmt17(m(i, j));
    }
    os << '\n';
  }
}

/// Long format: step, element, position_m, bm_m[, tm_m][, p_Pa].
inline void write_response_csv(std::ostream& os, const CochleaResponse& r) {
  os << "step,element,position_m,bm_m";
  if (r.tm) os << ",tm_m";
  if (r.pressure) os << ",p_Pa";
  os << '\n';
  for (Eigen::Index k = 0; k < r.frames(); ++k)
    for (Eigen::Index n = 0; n < r.elements(); ++n) {
      os << k * r.stride << ',' << n << ',' << fmt17(r.positions[static_cast<std::size_t>(n)])
         << ',' << fmt17(r.bm(k, n));
      if (r.tm) os << ',' << fmt17((*r.tm)(k, n));
      if (r.pressure) os << ',' << fmt17((*r.pressure)(k, n));
      os << '\n';
    }
}

inline void write_profile_csv(std::ostream& os, std::span<const double> positions,
                              std::span<const double> magnitude) {
  os << "element,position_m,magnitude\n";
  for (std::size_t n = 0; n < positions.size(); ++n)
    os << n << ',' << fmt17(positions[n]) << ',' << fmt17(magnitude[n]) << '\n';
}

/// Binary 16-bit PGM of |field| scaled so the largest magnitude maps to
/// 65535. Rows of the image are elements (apex at the top), columns frames.
/// Returns the magnitude that maps to full scale.
inline double write_pgm16(std::ostream& os, const Field& field) {
  const double peak = field.size() ? field.cwiseAbs().maxCoeff() : 0.0;
  const auto w = field.rows(), h = field.cols();
  os << "P5\n" << w << ' ' << h << "\n65535\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(2 * w));
  for (Eigen::Index y = 0; y < h; ++y) {
    const Eigen::Index n = h - 1 - y;
    for (Eigen::Index x = 0; x < w; ++x) {
      const double v = peak > 0 ? std::abs(field(x, n)) / peak : 0.0;
      const auto q = static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * 65535.0));
      row[static_cast<std::size_t>(2 * x)] = static_cast<unsigned char>(q >> 8);
      row[static_cast<std::size_t>(2 * x + 1)] = static_cast<unsigned char>(q & 0xff);
    }
    os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  return peak;
}

struct Audio {
  std::vector<double> samples;
  double fs = 0;
};

enum class WavFormat { pcm16, float32 };

namespace detail {

inline std::uint32_t le32(const unsigned char* p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline void put32(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}
inline void put16(std::ostream& os, std::uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

}  // namespace detail

/// Mono PCM16 or float32 WAV. PCM samples are scaled to [-1, 1).
inline Audio read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::vector<unsigned char> d((std::istreambuf_iterator<char>(in)), {});
  if (d.size() < 12 || std::memcmp(d.data(), "RIFF", 4) || std::memcmp(d.data() + 8, "WAVE", 4))
    throw ConfigError(path + " is not a RIFF/WAVE file");
  int format = -1, channels = 0, bits = 0;
  double fs = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;
  std::size_t pos = 12;
  while (pos + 8 <= d.size()) {
    const std::uint32_t len = detail::le32(d.data() + pos + 4);
    const unsigned char* body = d.data() + pos + 8;
    const std::size_t avail = d.size() - pos - 8;
    if (!std::memcmp(d.data() + pos, "fmt ", 4)) {
      if (len < 16 || avail < 16) throw ConfigError(path + ": truncated fmt chunk");
      format = detail::le16(body);
      channels = detail::le16(body + 2);
      fs = detail::le32(body + 4);
      bits = detail::le16(body + 14);
      if (format == 0xFFFE && len >= 26) format = detail::le16(body + 24);
    } else if (!std::memcmp(d.data() + pos, "data", 4)) {
      data = body;
      data_len = std::min<std::size_t>(len, avail);
    }
    pos += 8 + len + (len & 1);
  }
  if (format < 0 || !data) throw ConfigError(path + ": missing fmt or data chunk");
  if (channels != 1)
    throw ConfigError(path + ": " + std::to_string(channels) +
                      "-channel audio is not supported; supply a mono file");
  Audio a;
  a.fs = fs;
  if (format == 1 && bits == 16) {
    a.samples.resize(data_len / 2);
    for (std::size_t k = 0; k < a.samples.size(); ++k)
      a.samples[k] = static_cast<std::int16_t>(detail::le16(data + 2 * k)) / 32768.0;
  } else if (format == 3 && bits == 32) {
    a.samples.resize(data_len / 4);
    for (std::size_t k = 0; k < a.samples.size(); ++k) {
      const std::uint32_t u = detail::le32(data + 4 * k);
      float f;
      std::memcpy(&f, &u, 4);
      a.samples[k] = f;
    }
  } else {
    throw ConfigError(path + ": only 16-bit PCM and 32-bit float WAV are supported");
  }
  return a;
}

inline void write_wav(const std::string& path, std::span<const double> x, double fs,
                      WavFormat fmt = WavFormat::float32) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + path);
  const std::uint16_t bits = fmt == WavFormat::pcm16 ? 16 : 32;
  const std::uint32_t bytes = static_cast<std::uint32_t>(x.size() * bits / 8);
  const auto rate = static_cast<std::uint32_t>(std::lround(fs));
  os.write("RIFF", 4);
  detail::put32(os, 36 + bytes);
  os.write("WAVEfmt ", 8);
  detail::put32(os, 16);
  detail::put16(os, fmt == WavFormat::pcm16 ? 1 : 3);
  detail::put16(os, 1);
  detail::put32(os, rate);
  detail::put32(os, rate * bits / 8);
  detail::put16(os, bits / 8);
  detail::put16(os, bits);
  os.write("data", 4);
  detail::put32(os, bytes);
  for (double v : x) {
    if (fmt == WavFormat::pcm16) {
      const long q = std::lround(std::clamp(v, -1.0, 32767.0 / 32768.0) * 32768.0);
      detail::put16(os, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
    } else {
      const float f = static_cast<float>(v);
      std::uint32_t u;
      std::memcpy(&u, &f, 4);
      detail::put32(os, u);
    }
  }
}

}  // namespace jdcochlea
