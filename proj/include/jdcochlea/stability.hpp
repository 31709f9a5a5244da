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
#include <Eigen/Eigenvalues>
#include <complex>
#include <cstdio>
#include <future>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "jdcochlea/assembly.hpp"
#include "jdcochlea/errors.hpp"
#include "jdcochlea/params.hpp"
#include "jdcochlea/solver.hpp"

namespace jdcochlea {

inline constexpr double kStabilityTolerance = 5e-3;

/// Companion form [[H, K], [I, 0]] of the two-step recursion.
inline Eigen::MatrixXd build_E(const Eigen::MatrixXd& H, const Eigen::MatrixXd& K) {
  const Eigen::Index n = H.rows();
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  e.topLeftCorner(n, n) = H;
  e.topRightCorner(n, n) = K;
  e.bottomLeftCorner(n, n).setIdentity();
  return e;
}

inline Eigen::VectorXcd eigenvalues(const Eigen::MatrixXd& a) {
  if (!a.allFinite()) throw ConfigError("matrix has non-finite entries");
  Eigen::EigenSolver<Eigen::MatrixXd> es(a, false);
  if (es.info() != Eigen::Success)
    throw NoConvergence("eigenvalue iteration did not converge");
  return es.eigenvalues();
}

inline double max_eigenvalue_magnitude(const Eigen::MatrixXd& a) {
  return eigenvalues(a).cwiseAbs().maxCoeff();
}

struct StabilityReport {
  double fs = 0;
  double max_eig_magnitude = 0;
  bool stable = false;
  int eig_count_outside_unit = 0;
  std::optional<std::string> error;
};

inline StabilityReport stability_report(const CochlearModel& m, double fs,
                                        double tol = kStabilityTolerance) {
  StabilityReport r;
  r.fs = fs;
  try {
    const auto sm = assemble(m, fs);
    const auto ev = eigenvalues(build_E(sm.H, sm.K));
    const Eigen::VectorXd mag = ev.cwiseAbs();
    r.max_eig_magnitude = mag.maxCoeff();
    r.eig_count_outside_unit = static_cast<int>((mag.array() > 1.0 + tol).count());
    r.stable = r.max_eig_magnitude < 1.0 + tol;
  } catch (const Error& e) {
    r.error = e.what();
    r.stable = false;
  }
  return r;
}

inline std::vector<double> default_stability_grid() {
  std::vector<double> fs;
  for (int k = 48; k <= 192; k += 16) fs.push_back(k * 1000.0);
  return fs;
}

/// Spectral radius per sampling rate. Failures are recorded in the report of
/// the affected rate and do not stop the sweep.
inline std::vector<StabilityReport> stability_sweep(std::span<const double> rates,
                                                    const CochlearModel& m,
                                                    int jobs = 1,
                                                    double tol = kStabilityTolerance) {
  std::vector<StabilityReport> out(rates.size());
  const std::size_t width = static_cast<std::size_t>(std::max(jobs, 1));
  for (std::size_t start = 0; start < rates.size(); start += width) {
    std::vector<std::future<StabilityReport>> batch;
    for (std::size_t k = start; k < std::min(rates.size(), start + width); ++k) {
      const double fs = rates[k];
      if (width == 1)
        out[k] = stability_report(m, fs, tol);
      else
        batch.push_back(std::async(std::launch::async,
                                   [&m, fs, tol] { return stability_report(m, fs, tol); }));
    }
    for (std::size_t k = 0; k < batch.size(); ++k) out[start + k] = batch[k].get();
  }
  return out;
}

struct TracePoint {
  std::size_t step = 0;
  double radius = 0;
};

/// Spectral radius of the time-varying companion matrix at every
/// `every`-th recorded frame of a nonlinear run made with record_omega.
inline std::vector<TracePoint> nonlinear_stability_trace(const CochleaResponse& r,
                                                         const CochlearModel& m,
                                                         int every = 100) {
  if (!r.omega) throw ConfigError("the run did not record feedback scaling");
  if (every < 1) throw ConfigError("trace stride must be >= 1");
  std::vector<TracePoint> out;
  std::vector<double> gamma(static_cast<std::size_t>(m.size()));
  for (Eigen::Index k = 0; k < r.omega->rows(); k += every) {
    for (std::size_t n = 0; n < gamma.size(); ++n)
      gamma[n] = m.constants.gamma * (*r.omega)(k, static_cast<Eigen::Index>(n));
    const auto sm = assemble(m, r.fs, gamma);
    out.push_back({static_cast<std::size_t>(k) * static_cast<std::size_t>(r.stride),
                   max_eigenvalue_magnitude(build_E(sm.H, sm.K))});
  }
  return out;
}

inline void write_stability_csv(std::ostream& os, std::span<const StabilityReport> rows) {
  os << "fs_hz,max_eig_magnitude,stable\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g", r.fs);
    os << buf << ',';
    if (r.error) {
      os << "nan,error\n";
      continue;
    }
    std::snprintf(buf, sizeof buf, "%.17g", r.max_eig_magnitude);
    os << buf << ',' << (r.stable ? "true" : "false") << '\n';
  }
}

}  // namespace jdcochlea
