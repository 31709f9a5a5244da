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
#include <openssl/evp.h>

#include <CLI11.hpp>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "jdcochlea.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace jdcochlea;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr const char* kOutDirEnv = "JDCOCHLEA_OUT_DIR";

struct Common {
  int elements = 0;
  double fs = 128000.0;
  std::string model = "nonlinear";
  std::string out_dir;
  std::string config;
  bool seedless = false;
  bool full = false;
  int jobs = 1;
  int csv_stride = 16;
  double internal_rate = 0;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--N", c.elements, "number of BM elements (default 500 or the config file)")
      ->check(CLI::PositiveNumber);
  app->add_option("--fs", c.fs, "sampling rate in Hz");
  app->add_option("--model", c.model, "passive | linear | nonlinear | semidiscrete")
      ->check(CLI::IsMember({"passive", "linear", "nonlinear", "semidiscrete"}));
  app->add_option("--out-dir", c.out_dir, std::string("output directory (env ") + kOutDirEnv + ")");
  app->add_option("--config", c.config, "key=value parameter file");
  app->add_flag("--seedless", c.seedless, "assert the run is free of randomness");
  app->add_flag("--full", c.full, "force the full-scale model (N = 500)");
  app->add_option("--jobs", c.jobs, "parallel independent runs")->check(CLI::PositiveNumber);
  app->add_option("--csv-stride", c.csv_stride, "keep every k-th frame in response CSVs")
      ->check(CLI::PositiveNumber);
  app->add_option("--internal-rate", c.internal_rate,
                  "semidiscrete integration rate in Hz (default 4 x fs)");
}

std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return os.str();
}

std::string sha256_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return "";
  std::ostringstream buf;
  buf << in.rdbuf();
  return sha256_hex(buf.str());
}

class Run {
 public:
  Run(std::string command, const Common& c) : command_(std::move(command)), common_(c) {
    std::string dir = c.out_dir;
    if (dir.empty())
      if (const char* env = std::getenv(kOutDirEnv)) dir = env;
    if (dir.empty()) dir = "out";
    dir_ = dir;
    fs::create_directories(dir_);
    start_ = std::chrono::steady_clock::now();
  }

  const fs::path& dir() const { return dir_; }
  json& config() { return config_; }
  json& results() { return results_; }

  fs::path output(const std::string& name) {
    outputs_.push_back(name);
    return dir_ / name;
  }
  void input(const fs::path& p) { inputs_.push_back(p); }

  void finish() {
    json m;
    m["command"] = command_;
    m["version"] = kVersion;
    m["config"] = config_;
    json in = json::array();
    for (const auto& p : inputs_) in.push_back({{"path", p.string()}, {"sha256", sha256_file(p)}});
    m["inputs"] = in;
    json out = json::array();
    for (const auto& n : outputs_) out.push_back({{"path", n}, {"sha256", sha256_file(dir_ / n)}});
    m["outputs"] = out;
    m["results"] = results_;
    m["seedless"] = true;
    m["wall_clock_s"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    std::ofstream(dir_ / "manifest.json") << std::setw(2) << m << '\n';
    if (common_.seedless) {
      std::cout << "seedless: no random number generation; output hashes\n";
      for (const auto& o : out) std::cout << "  " << o["sha256"].get<std::string>() << "  " << o["path"].get<std::string>() << '\n';
    }
  }

 private:
  std::string command_;
  Common common_;
  fs::path dir_;
  json config_ = json::object();
  json results_ = json::object();
  std::vector<std::string> outputs_;
  std::vector<fs::path> inputs_;
  std::chrono::steady_clock::time_point start_;
};

PhysicalConstants constants_for(const Common& c, Run& run) {
  PhysicalConstants k;
  if (!c.config.empty()) {
    k = load_constants(c.config, k);
    run.input(c.config);
  }
  if (c.full)
    k.elements = 500;
  else if (c.elements > 0)
    k.elements = c.elements;
  k.validate();
  json j;
  j["L"] = k.length;
  j["H"] = k.height;
  j["rho"] = k.density;
  j["N"] = k.elements;
  j["gamma"] = k.gamma;
  j["g"] = k.rl_ratio;
  j["tau"] = k.tau;
  j["m1"] = k.bm_mass;
  j["m2"] = k.tm_mass;
  j["m_ME"] = k.me_mass;
  j["k_ME"] = k.me_stiffness;
  j["c_ME"] = k.me_damping;
  run.config()["constants"] = j;
  run.config()["fs"] = c.fs;
  run.config()["model"] = c.model;
  return k;
}

CochlearModel model_for(const Common& c, const PhysicalConstants& k) {
  if (c.model == "passive") return make_matched_passive_model(k);
  return make_active_model(k);
}

/// Runs the selected model on a stimulus at full rate.
CochleaResponse run_model(const Common& c, const CochlearModel& m, std::span<const double> x,
                          Run& run) {
  if (c.model == "semidiscrete") {
    ReferenceConfig rc;
    rc.fs = c.fs;
    rc.internal_rate = c.internal_rate > 0 ? c.internal_rate : 4.0 * c.fs;
    run.config()["internal_rate"] = rc.internal_rate;
    return integrate(x, m, rc);
  }
  SimulationConfig sc;
  sc.fs = c.fs;
  sc.mode = c.model == "passive" ? Mode::passive
            : c.model == "linear" ? Mode::linear
                                  : Mode::nonlinear;
  return simulate(x, m, sc);
}

CochleaResponse decimate(const CochleaResponse& r, int stride) {
  CochleaResponse d = r;
  if (stride == 1) return d;
  const Eigen::Index rows = (r.frames() + stride - 1) / stride;
  d.bm.resize(rows, r.elements());
  for (Eigen::Index k = 0; k < rows; ++k) d.bm.row(k) = r.bm.row(k * stride);
  d.tm.reset();
  d.pressure.reset();
  d.omega.reset();
  d.stride = r.stride * stride;
  return d;
}

void write_response(Run& run, const CochleaResponse& r, int stride, const std::string& stem) {
  const auto d = decimate(r, stride);
  {
    std::ofstream os(run.output(stem + ".csv"));
    write_response_csv(os, d);
  }
  std::ofstream os(run.output(stem + ".pgm"), std::ios::binary);
  run.results()[stem + "_pgm_full_scale_m"] = write_pgm16(os, d.bm);
}

void write_json(Run& run, const std::string& name, const json& j) {
  std::ofstream(run.output(name)) << std::setw(2) << j << '\n';
}

int cmd_impulse(const Common& c, double dur_ms, double spl) {
  Run run("impulse", c);
  const auto k = constants_for(c, run);
  run.config()["dur_ms"] = dur_ms;
  run.config()["spl_db"] = spl;
  const auto m = model_for(c, k);
  const auto stim = make_impulse(c.fs, dur_ms * 1e-3, spl);
  const auto r = run_model(c, m, stim.samples, run);
  write_response(run, r, c.csv_stride, "response");
  const auto onset = transit_time(r, TransitCriterion::onset);
  const auto peak = transit_time(r, TransitCriterion::peak);
  run.results()["transit_onset_ms"] = onset.seconds * 1e3;
  run.results()["transit_peak_ms"] = peak.seconds * 1e3;
  run.results()["apex_element"] = peak.apex_element;
  std::cout << "transit time (peak arrival): " << peak.seconds * 1e3 << " ms\n"
            << "transit time (1% onset):     " << onset.seconds * 1e3 << " ms\n";
  run.finish();
  return 0;
}

int cmd_tone(const Common& c, double f, double dur_ms, double spl) {
  Run run("tone", c);
  const auto k = constants_for(c, run);
  run.config()["f_hz"] = f;
  run.config()["dur_ms"] = dur_ms;
  run.config()["spl_db"] = spl;
  const auto stim = make_tone(c.fs, dur_ms * 1e-3, f, spl);
  const auto m = model_for(c, k);
  const auto r = run_model(c, m, stim.samples, run);
  write_response(run, r, c.csv_stride, "response");
  const auto prof = steady_state_profile(r, f);
  {
    std::ofstream os(run.output("profile.csv"));
    write_profile_csv(os, r.positions, prof);
  }
  const auto at = argmax(prof);
  run.results()["peak_element"] = at;
  run.results()["peak_position_mm"] = r.positions[at] * 1e3;
  run.results()["peak_magnitude_db"] = 20.0 * std::log10(prof[at]);
  run.results()["bandwidth_3db_mm"] = positional_bandwidth(prof, r.positions) * 1e3;
  std::cout << "peak at element " << at << " (" << r.positions[at] * 1e3 << " mm)\n";
  run.finish();
  return 0;
}

int cmd_chirp(const Common& c, double f0, double f1, double dur_ms, double tail_ms, double spl) {
  Run run("chirp", c);
  const auto k = constants_for(c, run);
  run.config()["f_start_hz"] = f0;
  run.config()["f_end_hz"] = f1;
  run.config()["dur_ms"] = dur_ms;
  run.config()["tail_ms"] = tail_ms;
  run.config()["spl_db"] = spl;
  auto stim = make_chirp(c.fs, dur_ms * 1e-3, f0, f1, spl);
  pad_silence(stim, tail_ms * 1e-3);
  const auto m = model_for(c, k);
  const auto r = run_model(c, m, stim.samples, run);
  write_response(run, r, c.csv_stride, "response");
  std::vector<double> freqs;
  const int steps = 15;
  for (int i = 0; i < steps; ++i) freqs.push_back(f0 + (f1 - f0) * i / (steps - 1));
  const auto places = chirp_place_map(r, freqs);
  std::ofstream os(run.output("place_map.csv"));
  os << "f_hz,position_m\n";
  for (std::size_t i = 0; i < freqs.size(); ++i) os << fmt17(freqs[i]) << ',' << fmt17(places[i]) << '\n';
  run.results()["start_position_mm"] = places.front() * 1e3;
  run.results()["end_position_mm"] = places.back() * 1e3;
  std::cout << f0 << " Hz at " << places.front() * 1e3 << " mm, " << f1 << " Hz at "
            << places.back() * 1e3 << " mm\n";
  run.finish();
  return 0;
}

int cmd_stability(const Common& c, const std::vector<double>& rates_in) {
  Run run("stability", c);
  const auto k = constants_for(c, run);
  if (c.model == "semidiscrete" || c.model == "nonlinear")
    std::cerr << "note: stability uses the linearised (omega = 1) joint model\n";
  const auto m = model_for(c, k);
  const auto rates = rates_in.empty() ? default_stability_grid() : rates_in;
  run.config()["rates_hz"] = rates;
  const auto reports = stability_sweep(rates, m, c.jobs);
  {
    std::ofstream os(run.output("stability.csv"));
    write_stability_csv(os, reports);
  }
  write_stability_csv(std::cout, reports);
  json rows = json::array();
  bool failed = false;
  for (const auto& r : reports) {
    rows.push_back({{"fs_hz", r.fs}, {"max_eig_magnitude", r.max_eig_magnitude}, {"stable", r.stable}});
    if (r.error) {
      std::cerr << "fs " << r.fs << ": " << *r.error << '\n';
      failed = true;
    }
  }
  run.results()["sweep"] = rows;
  run.finish();
  return failed ? 3 : 0;
}

int cmd_iocurve(const Common& c, double f, const std::vector<double>& spls_in, double dur_ms) {
  Run run("iocurve", c);
  const auto k = constants_for(c, run);
  if (c.model == "semidiscrete") throw ConfigError("iocurve runs the joint model only");
  std::vector<double> spls = spls_in;
  if (spls.empty())
    for (int s = 0; s <= 140; s += 20) spls.push_back(s);
  run.config()["f_hz"] = f;
  run.config()["spl_db"] = spls;
  run.config()["dur_ms"] = dur_ms;
  const auto m = model_for(c, k);
  SimulationConfig sc;
  sc.fs = c.fs;
  sc.mode = c.model == "passive" ? Mode::passive : c.model == "linear" ? Mode::linear : Mode::nonlinear;
  std::vector<IoPoint> pts(spls.size());
  const std::size_t width = static_cast<std::size_t>(c.jobs);
  for (std::size_t s = 0; s < spls.size(); s += width) {
    std::vector<std::future<IoPoint>> batch;
    for (std::size_t i = s; i < std::min(spls.size(), s + width); ++i)
      batch.push_back(std::async(std::launch::async, [&, i] { return io_point(m, sc, f, spls[i], dur_ms * 1e-3); }));
    for (std::size_t i = 0; i < batch.size(); ++i) pts[s + i] = batch[i].get();
  }
  std::ofstream os(run.output("iocurve.csv"));
  os << "spl_db,output_db,position_m\n";
  for (const auto& p : pts) {
    os << fmt17(p.spl_db) << ',' << fmt17(p.output_db) << ',' << fmt17(p.place_m) << '\n';
    std::cout << p.spl_db << " dB SPL -> " << p.output_db << " dB at " << p.place_m * 1e3 << " mm\n";
  }
  if (pts.size() >= 2) run.results()["slope_db_per_db"] = io_slope(pts, spls.front(), spls.back());
  run.finish();
  return 0;
}

void write_cochleagram(Run& run, const Cochleagram& cg, const std::string& stem, const json& meta) {
  {
    std::ofstream os(run.output(stem + ".csv"));
    os << "frame,element,value\n";
    for (Eigen::Index f = 0; f < cg.data.rows(); ++f)
      for (Eigen::Index n = 0; n < cg.data.cols(); ++n)
        os << f << ',' << n << ',' << fmt17(cg.data(f, n)) << '\n';
  }
  double scale = 0;
  {
    std::ofstream os(run.output(stem + ".pgm"), std::ios::binary);
    scale = write_pgm16(os, cg.data);
  }
  json side = meta;
  side["spl_db"] = cg.spl_db;
  side["frame_rate_hz"] = cg.frame_rate;
  side["pgm_full_scale"] = scale;
  write_json(run, stem + ".json", side);
}

int cmd_cochleagram(const Common& c, const std::string& wav, double spl, bool ladder,
                    bool no_outer_middle, int out_stride, int hop) {
  Run run("cochleagram", c);
  const auto k = constants_for(c, run);
  if (c.model == "semidiscrete") throw ConfigError("cochleagram runs the joint model only");
  const Audio audio = read_wav(wav);
  run.input(wav);
  const auto m = model_for(c, k);
  const auto cf = characteristic_frequencies(c.model == "passive" ? make_active_model(k) : m);
  PipelineConfig pc;
  pc.fs_model = c.fs;
  pc.mode = c.model == "passive" ? Mode::passive : c.model == "linear" ? Mode::linear : Mode::nonlinear;
  pc.apply_outer_middle = !no_outer_middle;
  pc.output_stride = out_stride;
  const Resampler rs(audio.fs, c.fs);
  run.config()["input_rate_hz"] = audio.fs;
  run.config()["resample"] = {{"from", audio.fs}, {"to", c.fs}, {"up", rs.up()}, {"down", rs.down()}};
  run.config()["outer_middle"] = pc.apply_outer_middle;
  run.config()["output_stride"] = out_stride;
  json meta = {{"fs", c.fs}, {"N", k.elements}, {"mode", c.model}};
  meta["config_sha256"] = sha256_hex(run.config().dump());

  const std::vector<double> levels = ladder ? spl_ladder() : std::vector<double>{spl};
  run.config()["spl_db"] = levels;
  std::vector<Cochleagram> cgs(levels.size());
  const std::size_t width = static_cast<std::size_t>(c.jobs);
  for (std::size_t s = 0; s < levels.size(); s += width) {
    std::vector<std::future<Cochleagram>> batch;
    for (std::size_t i = s; i < std::min(levels.size(), s + width); ++i)
      batch.push_back(std::async(std::launch::async, [&, i] {
        return cochleagram(audio.samples, audio.fs, levels[i], m, cf, pc);
      }));
    for (std::size_t i = 0; i < batch.size(); ++i) cgs[s + i] = batch[i].get();
  }
  for (std::size_t i = 0; i < levels.size(); ++i) {
    std::ostringstream stem;
    stem << "cochleagram_" << static_cast<int>(std::lround(levels[i])) << "dB";
    write_cochleagram(run, cgs[i], ladder ? stem.str() : "cochleagram", meta);
  }
  if (ladder) {
    std::vector<Field> cfields;
    for (const auto& g : cgs) cfields.push_back(g.data);
    const double sc = mean_pairwise_similarity(cfields);
    const double ss = spectrogram_ladder_similarity(audio.samples, audio.fs, levels, hop);
    json sim = {{"levels_db", levels},
                {"metric", "cosine"},
                {"cochleagram_mean_similarity", sc},
                {"spectrogram_mean_similarity", ss},
                {"spectrogram_hop", hop}};
    write_json(run, "similarity.json", sim);
    run.results()["cochleagram_mean_similarity"] = sc;
    run.results()["spectrogram_mean_similarity"] = ss;
    std::cout << "mean similarity: cochleagram " << sc << ", spectrogram " << ss << '\n';
  }
  run.finish();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Jointly discretised nonlinear cochlear model"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  Common ci, ct, cc, cs, cio, ccg;
  double imp_dur = 100, imp_spl = 0;
  auto* impulse = app.add_subcommand("impulse", "impulse response and transit time");
  add_common(impulse, ci);
  impulse->add_option("--dur-ms", imp_dur, "duration in ms");
  impulse->add_option("--spl", imp_spl, "level in dB SPL");

  double tone_f = 3700, tone_dur = 100, tone_spl = 0;
  auto* tone = app.add_subcommand("tone", "single tone and steady-state profile");
  add_common(tone, ct);
  tone->add_option("--f", tone_f, "frequency in Hz");
  tone->add_option("--dur-ms", tone_dur, "duration in ms");
  tone->add_option("--spl", tone_spl, "level in dB SPL");

  double ch_f0 = 16000, ch_f1 = 2000, ch_dur = 100, ch_tail = 30, ch_spl = 0;
  auto* chirp = app.add_subcommand("chirp", "linear chirp and place map");
  add_common(chirp, cc);
  chirp->add_option("--f-start", ch_f0, "start frequency in Hz");
  chirp->add_option("--f-end", ch_f1, "end frequency in Hz");
  chirp->add_option("--dur-ms", ch_dur, "sweep duration in ms");
  chirp->add_option("--tail-ms", ch_tail, "silence appended after the sweep in ms");
  chirp->add_option("--spl", ch_spl, "level in dB SPL");

  std::vector<double> rates;
  auto* stability = app.add_subcommand("stability", "spectral radius sweep over sampling rates");
  add_common(stability, cs);
  stability->remove_option(stability->get_option("--fs"));
  stability->add_option("--fs", rates, "sampling rate(s) in Hz (default 48k:16k:192k)");

  double io_f = 3700, io_dur = 100;
  std::vector<double> io_spl;
  auto* iocurve = app.add_subcommand("iocurve", "input level versus peak output");
  add_common(iocurve, cio);
  iocurve->add_option("--f", io_f, "frequency in Hz");
  iocurve->add_option("--spl", io_spl, "input levels in dB SPL (default 0:20:140)");
  iocurve->add_option("--dur-ms", io_dur, "duration in ms");

  std::string wav;
  double cg_spl = 60;
  bool cg_ladder = false, cg_no_om = false;
  int cg_stride = 64, cg_hop = 16;
  auto* cgram = app.add_subcommand("cochleagram", "cochleagram of a mono WAV file");
  add_common(cgram, ccg);
  cgram->add_option("wav", wav, "input WAV (mono, PCM16 or float32)")->required();
  cgram->add_option("--spl", cg_spl, "presentation level in dB SPL");
  cgram->add_flag("--spl-ladder", cg_ladder, "run 0:20:120 dB SPL and report similarity");
  cgram->add_flag("--no-outer-middle", cg_no_om, "skip the outer/middle-ear channel gains");
  cgram->add_option("--out-stride", cg_stride, "keep every k-th envelope sample")->check(CLI::PositiveNumber);
  cgram->add_option("--hop", cg_hop, "spectrogram hop in samples for the similarity baseline")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*impulse) return cmd_impulse(ci, imp_dur, imp_spl);
    if (*tone) return cmd_tone(ct, tone_f, tone_dur, tone_spl);
    if (*chirp) return cmd_chirp(cc, ch_f0, ch_f1, ch_dur, ch_tail, ch_spl);
    if (*stability) return cmd_stability(cs, rates);
    if (*iocurve) return cmd_iocurve(cio, io_f, io_spl, io_dur);
    if (*cgram) return cmd_cochleagram(ccg, wav, cg_spl, cg_ladder, cg_no_om, cg_stride, cg_hop);
  } catch (const NumericalBlowup& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const UnsupportedRatio& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const WindowTooLong& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
