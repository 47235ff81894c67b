#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <limits>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "rydloss/correlator.hpp"
#include "rydloss/fgr.hpp"
#include "rydloss/interactions.hpp"
#include "rydloss/io.hpp"
#include "rydloss/medium.hpp"
#include "rydloss/polaritons.hpp"
#include "rydloss/propagation.hpp"

#ifndef RYDLOSS_VERSION
#define RYDLOSS_VERSION "0.0.0"
#endif

using namespace rydloss;
using json = nlohmann::json;

namespace {

// Simulation defaults (presets/paper.toml); --config and --set layer on top.
constexpr const char* kDefaultConfig = R"(
omega_c_MHz = 25.0
gamma_MHz = 7.0
gamma_s_MHz = 0.3
delta_MHz = 22.5
delta_s_MHz = 2.0
OD = 37.0
sigma_z_um = 40.0
C6 = 1.07e7
profile = "gaussian"
)";

struct Globals {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir = ".";
  unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  std::uint64_t seed = 1;
  std::string log_level = "info";
};

/// Shared state of one invocation; filled progressively so failures can report it.
struct Run {
  Globals g;
  std::string command;
  Config config;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  std::string path(const std::string& name) const {
    const std::filesystem::path p(name);
    return p.is_absolute() ? name : (std::filesystem::path(g.out_dir) / p).string();
  }

  MediumParams medium() const {
    return from_experiment_units(config.medium_values(),
                                 profile_from_string(config.string_or("profile", "gaussian")));
  }

  json metadata(const MediumParams* p = nullptr) const {
    json m;
    m["command"] = command;
    m["version"] = RYDLOSS_VERSION;
    m["config"] = config.to_json();
    m["seed"] = g.seed;
    m["workers"] = g.workers;
    if (p) m["medium_MHz"] = to_experiment_units(*p);
    m["wall_time_s"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return m;
  }
};

std::string fmt_num(double v) {
  if (std::isnan(v)) return "NaN";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void write_json(const std::string& path, const json& j) { atomic_write(path, j.dump(2) + "\n"); }

void emit_json(Run& run, const std::string& path, json body) {
  write_json(path, body);
  std::cout << body.dump(2) << "\n";
  spdlog::info("wrote {}", path);
}

json to_json_c(cplx z) { return json{{"re", z.real()}, {"im", z.imag()}}; }

// ---------------------------------------------------------------------------

void cmd_scales(Run& run) {
  const auto p = run.medium();
  const cplx chi0 = chi_bar(0.0, p);
  const auto s = derive_scales(p, chi0);
  const auto closed = resonance_detunings(p, ResonanceMethod::ClosedForm);
  json out = run.metadata(&p);
  out["phi"] = s.phi;
  out["r_b_um"] = s.r_b;
  out["OD_b"] = s.od_b;
  out["delta0_MHz"] = angular_to_mhz(closed.delta0);
  out["deltaPlus_MHz"] = angular_to_mhz(closed.delta_plus);
  try {
    const auto numeric = resonance_detunings(p, ResonanceMethod::NumericRoot);
    out["delta0_numeric_MHz"] = angular_to_mhz(numeric.delta0);
    out["deltaPlus_numeric_MHz"] = angular_to_mhz(numeric.delta_plus);
  } catch (const WindowError& e) {
    out["numeric_resonances_note"] = e.what();
  }
  out["omega_plus_MHz"] = to_json_c(omega_plus(p) / kTwoPi);
  out["omega_c_scale_MHz"] = angular_to_mhz(s.omega_c_scale);
  out["k_c_per_um"] = s.k_c;
  out["mass_us_per_um2"] = to_json_c(s.mass);
  out["g_MHz"] = angular_to_mhz(p.g_peak);
  out["inv_chi0_MHz"] = to_json_c(1.0 / chi0 / kTwoPi);
  out["incoming_momentum_per_um"] = incoming_momentum(p);
  emit_json(run, run.path("scales.json"), out);
}

struct DispersionOpts {
  double qmin = -0.5, qmax = 0.5;
  int points = 401;
  bool lossless = false;
  std::string out = "dispersion.csv";
};

void cmd_dispersion(Run& run, const DispersionOpts& o) {
  auto p = run.medium();
  if (o.lossless) p = p.lossless();
  if (!(o.qmax > o.qmin) || o.points < 3) throw ValidationError("q", "need qmax > qmin and >= 3 points");
  const double q0 = incoming_momentum(p);
  std::vector<double> grid;
  for (int i = 0; i < o.points; ++i) grid.push_back(o.qmin + (o.qmax - o.qmin) * i / (o.points - 1));
  if (q0 > o.qmin && q0 < o.qmax) {
    grid.push_back(q0);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  }
  const auto spec = branch_spectrum(grid, p, q0);
  std::ostringstream os;
  os << "q_per_um,L_re_MHz,L_im_MHz,D_re_MHz,D_im_MHz,U_re_MHz,U_im_MHz,L_S2,D_S2,U_S2\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    os << fmt_num(grid[i]);
    for (int b = 0; b < 3; ++b)
      os << ',' << fmt_num(angular_to_mhz(spec.omega[b][i].real())) << ','
         << fmt_num(angular_to_mhz(spec.omega[b][i].imag()));
    for (int b = 0; b < 3; ++b) os << ',' << fmt_num(std::norm(spec.rydberg_overlap[b][i]));
    os << '\n';
  }
  const auto path = run.path(o.out);
  atomic_write(path, os.str());
  json meta = run.metadata(&p);
  meta["incoming_momentum_per_um"] = q0;
  meta["lossless"] = o.lossless;
  write_json(path + ".json", meta);
  spdlog::info("wrote {} ({} momenta)", path, grid.size());
}

struct PotentialOpts {
  double rmin = 0.5, rmax = 30.0, omega = 0.0;
  int points = 300;
  std::string out = "potential.csv";
};

void cmd_potential(Run& run, const PotentialOpts& o) {
  const auto p = run.medium();
  if (!(o.rmin > 0.0) || !(o.rmax > o.rmin) || o.points < 2)
    throw ValidationError("r", "need 0 < rmin < rmax and >= 2 points");
  const cplx w = mhz_to_angular(o.omega);
  std::ostringstream os;
  os << "r_um,re_Ve_MHz,im_Ve_MHz\n";
  for (int i = 0; i < o.points; ++i) {
    const double r = o.rmin + (o.rmax - o.rmin) * i / (o.points - 1);
    const auto s = effective_potential(w, r, p);
    os << fmt_num(r) << ',' << fmt_num(angular_to_mhz(s.value.real())) << ','
       << fmt_num(angular_to_mhz(s.value.imag())) << '\n';
  }
  const auto path = run.path(o.out);
  atomic_write(path, os.str());
  json meta = run.metadata(&p);
  meta["omega_MHz"] = o.omega;
  meta["r_b_um"] = blockade_radius(w, p);
  write_json(path + ".json", meta);
  spdlog::info("wrote {}", path);
}

void cmd_resonances(Run& run, const std::string& method, const std::string& out) {
  const auto p = run.medium();
  ResonanceMethod m;
  if (method == "closed_form") m = ResonanceMethod::ClosedForm;
  else if (method == "numeric_root") m = ResonanceMethod::NumericRoot;
  else throw ValidationError("--method", "expected closed_form or numeric_root");
  const auto r = resonance_detunings(p, m);
  json body = run.metadata(&p);
  body["delta0_MHz"] = angular_to_mhz(r.delta0);
  body["deltaPlus_MHz"] = angular_to_mhz(r.delta_plus);
  body["method"] = to_string(r.method);
  // finite-linewidth minima of |χ̄| over 0..2Ω_c
  const auto b = broadened_resonances(p, 0.01 * p.omega_c, 2.0 * p.omega_c, 801);
  json c0 = json::array(), cp = json::array();
  for (double x : b.chi0_minima) c0.push_back(angular_to_mhz(x));
  for (double x : b.chi_plus_minima) cp.push_back(angular_to_mhz(x));
  body["broadened"] = {{"chi0_minima_MHz", c0}, {"chi_plus_minima_MHz", cp}};
  emit_json(run, run.path(out), body);
}

struct MapOpts {
  std::string delta = "10:30:0.5", deltas = "-3:3:0.25", method = "simplified";
  std::string checkpoint, out = "beta_map.csv";
};

void cmd_beta_map(Run& run, const MapOpts& o) {
  const auto p = run.medium();
  const auto dg_mhz = parse_grid(o.delta, "--delta"), sg_mhz = parse_grid(o.deltas, "--deltas");
  std::vector<double> dg, sg;
  for (double x : dg_mhz) dg.push_back(mhz_to_angular(x));
  for (double x : sg_mhz) sg.push_back(mhz_to_angular(x));
  const auto method = rate_method_from_string(o.method);
  MapOptions mo;
  mo.workers = run.g.workers;
  if (!o.checkpoint.empty()) mo.checkpoint_path = run.path(o.checkpoint);
  const std::size_t total = dg.size() * sg.size();
  mo.progress = [total](std::size_t done, std::size_t) {
    if (done == total || done % std::max<std::size_t>(1, total / 20) == 0)
      spdlog::info("beta-map {}/{}", done, total);
  };
  const auto map = beta_map(dg, sg, p, method, mo);

  std::ostringstream os;
  os << "delta_MHz,deltas_MHz,abs_beta,re_beta,im_beta,method\n";
  json worst = nullptr;
  double worst_rel = 0.0;
  for (std::size_t i = 0; i < dg.size(); ++i)
    for (std::size_t j = 0; j < sg.size(); ++j) {
      const auto& r = map.values[i][j];
      os << fmt_num(dg_mhz[i]) << ',' << fmt_num(sg_mhz[j]) << ',' << fmt_num(r.magnitude) << ','
         << fmt_num(r.beta.real()) << ',' << fmt_num(r.beta.imag()) << ',' << to_string(method)
         << '\n';
      if (r.magnitude > 0.0 && std::isfinite(r.magnitude)) {
        const double rel = r.diagnostics.error_estimate / r.magnitude;
        if (rel > worst_rel) {
          worst_rel = rel;
          worst = {{"delta_MHz", dg_mhz[i]}, {"deltas_MHz", sg_mhz[j]}, {"relative_error", rel}};
        }
      }
    }
  const auto path = run.path(o.out);
  atomic_write(path, os.str());
  json meta = run.metadata(&p);
  json holes = json::array();
  for (const auto& [idx, why] : map.holes)
    holes.push_back({{"delta_MHz", dg_mhz[idx / sg.size()]},
                     {"deltas_MHz", sg_mhz[idx % sg.size()]},
                     {"reason", why}});
  meta["holes"] = holes;
  meta["worst_relative_error"] = worst;
  meta["units"] = "beta in the natural units of the rate integral; compare ratios only";
  if (method == RateMethod::Full)
    meta["incoming_state"] = "delta_s != 0 uses incoming momentum q0 legs with shifted conservation";
  write_json(path + ".json", meta);
  spdlog::info("wrote {} ({} points, {} holes)", path, total, map.holes.size());
}

struct LocusOpts {
  std::string deltas = "-3:3:0.5", method = "simplified", out = "locus.json";
  double lo = 8.0, hi = 30.0;
  int coarse = 41;
};

void cmd_locus(Run& run, const LocusOpts& o) {
  const auto p = run.medium();
  const auto sg_mhz = parse_grid(o.deltas, "--deltas");
  std::vector<double> sg;
  for (double x : sg_mhz) sg.push_back(mhz_to_angular(x));
  const auto locus = beta_max_locus(sg, p, mhz_to_angular(o.lo), mhz_to_angular(o.hi),
                                    rate_method_from_string(o.method), o.coarse);
  json arr = json::array();
  for (const auto& pt : locus) {
    auto q = p;
    q.delta_s = pt.delta_s;
    const auto res = resonance_detunings(q, ResonanceMethod::ClosedForm);
    json maxima = json::array();
    for (double x : pt.local_maxima) maxima.push_back(angular_to_mhz(x));
    arr.push_back({{"deltas_MHz", angular_to_mhz(pt.delta_s)},
                   {"delta_star_MHz", angular_to_mhz(pt.delta_star)},
                   {"local_maxima_MHz", maxima},
                   {"multimodal", pt.multimodal},
                   {"delta0_MHz", angular_to_mhz(res.delta0)},
                   {"deltaPlus_MHz", angular_to_mhz(res.delta_plus)}});
  }
  const auto path = run.path(o.out);
  write_json(path, arr);
  write_json(path + ".meta.json", run.metadata(&p));
  std::cout << arr.dump(2) << "\n";
}

struct SimOpts {
  int n = 3;
  int grid = 96;
  double extent = 3.5, cap = 1e3;
  std::string tau, delta_grid, deltas_grid, out = "simulate.json";
  double memory_gb = 2.0;
};

void cmd_simulate(Run& run, const SimOpts& o) {
  if (o.n != 2 && o.n != 3) throw ValidationError("--n", "must be 2 or 3");
  const auto p = run.medium();
  SimulationGrid g;
  g.points = o.grid;
  g.extent_sigma = o.extent;
  g.potential_cap = o.cap;
  g.workers = run.g.workers;
  g.memory_budget_bytes = o.memory_gb * 1e9;
  const auto prof = make_profile(p);

  if (!o.delta_grid.empty() || !o.deltas_grid.empty()) {
    if (o.delta_grid.empty() || o.deltas_grid.empty())
      throw ValidationError("--delta-grid", "map mode needs both --delta-grid and --deltas-grid");
    const auto dg_mhz = parse_grid(o.delta_grid, "--delta-grid");
    const auto sg_mhz = parse_grid(o.deltas_grid, "--deltas-grid");
    std::vector<double> dg, sg;
    for (double x : dg_mhz) dg.push_back(mhz_to_angular(x));
    for (double x : sg_mhz) sg.push_back(mhz_to_angular(x));
    const std::size_t total = dg.size() * sg.size();
    auto point_grid = g;
    point_grid.workers = 1;
    const auto map = correlation_map(dg, sg, p, point_grid, run.g.workers,
                                     [total](std::size_t done, std::size_t) {
                                       spdlog::info("simulate map {}/{}", done, total);
                                     });
    auto matrix = [&](const std::vector<std::vector<double>>& m) {
      std::ostringstream os;
      os << "delta_MHz\\deltas_MHz";
      for (double s : sg_mhz) os << ',' << fmt_num(s);
      os << '\n';
      for (std::size_t i = 0; i < dg.size(); ++i) {
        os << fmt_num(dg_mhz[i]);
        for (std::size_t j = 0; j < sg.size(); ++j) os << ',' << fmt_num(m[i][j]);
        os << '\n';
      }
      return os.str();
    };
    const auto stem = run.path(std::filesystem::path(o.out).replace_extension("").string());
    atomic_write(stem + "_g2.csv", matrix(map.g2));
    atomic_write(stem + "_g3.csv", matrix(map.g3));
    atomic_write(stem + "_eta3.csv", matrix(map.eta3));
    json meta = run.metadata(&p);
    json holes = json::array();
    for (const auto& [idx, why] : map.holes)
      holes.push_back({{"delta_MHz", dg_mhz[idx / sg.size()]},
                       {"deltas_MHz", sg_mhz[idx % sg.size()]},
                       {"reason", why}});
    meta["holes"] = holes;
    meta["grid_points"] = o.grid;
    meta["files"] = {stem + "_g2.csv", stem + "_g3.csv", stem + "_eta3.csv"};
    write_json(stem + ".json", meta);
    spdlog::info("wrote {}_{{g2,g3,eta3}}.csv", stem);
    return;
  }

  json body = run.metadata(&p);
  std::vector<double> tau;
  if (!o.tau.empty()) tau = parse_grid(o.tau, "--tau");
  std::ostringstream tau_csv;
  if (o.n == 2) {
    const auto sol = solve_two(p, prof, g);
    const auto& c = sol.correlation;
    body["g2_0"] = c.g2_0;
    body["transmission_abs2"] = std::norm(c.transmission);
    body["convergence"] = {{"grid_points", c.grid_points}, {"asymmetry", c.asymmetry}};
    if (!tau.empty()) {
      const auto g2 = g2_tau_profile(sol, p, prof, tau);
      tau_csv << "tau_us,g2\n";
      for (std::size_t i = 0; i < tau.size(); ++i) tau_csv << fmt_num(tau[i]) << ',' << fmt_num(g2[i]) << '\n';
    }
  } else {
    const double need = three_body_memory_bytes(o.grid);
    spdlog::info("three-body solve on {}^3 nodes, ~{:.1f} MB", o.grid + 1, need / 1e6);
    const auto sol = solve_three(p, prof, g);
    const auto& c = sol.correlation;
    body["g2_0"] = c.g2_0;
    body["g3_00"] = c.g3_00;
    body["eta3_00"] = c.eta3_00;
    body["transmission_abs2"] = std::norm(c.transmission);
    body["convergence"] = {{"grid_points", c.grid_points},
                           {"asymmetry", c.asymmetry},
                           {"memory_bytes", need}};
    if (!tau.empty()) {
      const auto g2 = g2_tau_profile(sol.two, p, prof, tau);
      const auto g3 = g3_tau_profile(sol, p, prof, tau);
      tau_csv << "tau_us,g2,g3_0tau\n";
      for (std::size_t i = 0; i < tau.size(); ++i)
        tau_csv << fmt_num(tau[i]) << ',' << fmt_num(g2[i]) << ',' << fmt_num(g3[i]) << '\n';
    }
  }
  const auto path = run.path(o.out);
  if (!tau.empty()) {
    const auto tpath = std::filesystem::path(path).replace_extension("").string() + "_tau.csv";
    atomic_write(tpath, tau_csv.str());
    body["tau_profile"] = tpath;
  }
  body["wall_time_s"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - run.start).count();
  emit_json(run, path, body);
}

struct CorrelateOpts {
  std::string input, out = "correlate";
  std::int64_t bin_ns = 20, window_ns = 1000, duration_ns = 0;
  double block_us = 100.0;
};

void cmd_correlate(Run& run, const CorrelateOpts& o) {
  CorrelatorConfig c;
  c.bin = o.bin_ns;
  c.window = o.window_ns;
  c.block = static_cast<std::int64_t>(std::llround(o.block_us * 1000.0));
  c.validate();
  const auto streams = read_tags(o.input, o.duration_ns);
  const std::int64_t duration = streams.front().duration;
  CoincidenceCounter counter(c, true);
  counter.push_streams(streams);
  counter.finish(duration);

  const auto g12 = g2_from_histogram(counter.pairs(1, 2));
  const auto g13 = g2_from_histogram(counter.pairs(1, 3));
  const auto g23 = g2_from_histogram(counter.pairs(2, 3));
  const auto g3 = g3_from_histogram(counter.triples());

  std::ostringstream os;
  os << "tau_ns,g2_12,stderr_12,flagged_12,g2_13,stderr_13,g2_23,stderr_23,shifted_den_12,analytic_den_12\n";
  for (std::size_t i = 0; i < g12.bins.size(); ++i)
    os << fmt_num(g12.bins[i].tau) << ',' << fmt_num(g12.bins[i].value) << ','
       << fmt_num(g12.bins[i].stderr_) << ',' << (g12.bins[i].flagged ? 1 : 0) << ','
       << fmt_num(g13.bins[i].value) << ',' << fmt_num(g13.bins[i].stderr_) << ','
       << fmt_num(g23.bins[i].value) << ',' << fmt_num(g23.bins[i].stderr_) << ','
       << fmt_num(g12.shifted_denominator[i]) << ',' << fmt_num(g12.analytic_denominator[i]) << '\n';
  const auto stem = run.path(o.out);
  atomic_write(stem + "_g2.csv", os.str());

  std::ostringstream os3;
  os3 << "tau1_ns,tau2_ns,g3,stderr,flagged\n";
  const int K = g3.half_bins;
  for (int k1 = -K; k1 < K; ++k1)
    for (int k2 = -K; k2 < K; ++k2) {
      const auto& v = g3.at(k1, k2);
      os3 << k1 * c.bin << ',' << k2 * c.bin << ',' << fmt_num(v.value) << ',' << fmt_num(v.stderr_)
          << ',' << (v.flagged ? 1 : 0) << '\n';
    }
  atomic_write(stem + "_g3.csv", os3.str());

  const int z = g12.zero_index();
  const auto &a = g12.bins[z], &b = g13.bins[z], &d = g23.bins[z], &t = g3.at(0, 0);
  json body = run.metadata();
  body["input"] = o.input;
  body["duration_ns"] = duration;
  body["counts"] = {streams[0].timestamps.size(), streams[1].timestamps.size(),
                    streams[2].timestamps.size()};
  body["bin_ns"] = c.bin;
  body["window_ns"] = c.window;
  body["block_ns"] = c.block;
  body["normalization_terms_g3"] = g3.normalization_terms;
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  body["g2_0"] = num(a.value);
  body["g2_0_stderr"] = num(a.stderr_);
  body["g2_0_pairs"] = {{"12", num(a.value)}, {"13", num(b.value)}, {"23", num(d.value)}};
  body["g3_00"] = num(t.value);
  body["g3_00_stderr"] = num(t.stderr_);
  const double eta = eta3_combine(a.value, b.value, d.value, t.value);
  body["eta3_00"] = num(eta);
  body["eta3_00_stderr"] = num(std::sqrt(a.stderr_ * a.stderr_ + b.stderr_ * b.stderr_ +
                                         d.stderr_ * d.stderr_ + t.stderr_ * t.stderr_));
  body["flagged_bins"] = {{"g2_12", std::count_if(g12.bins.begin(), g12.bins.end(), [](auto& v) { return v.flagged; })},
                          {"g3", std::count_if(g3.bins.begin(), g3.bins.end(), [](auto& v) { return v.flagged; })}};
  emit_json(run, stem + "_summary.json", body);
}

struct SynthOpts {
  std::string model = "poisson", out = "tags.csv", format;
  double rate = 3.0, group_rate = 0.0, jitter_ns = 0.0, duration_ms = 100.0;
};

void cmd_synth(Run& run, const SynthOpts& o) {
  SynthConfig s;
  s.model = synth_model_from_string(o.model);
  s.rate_per_us = o.rate;
  s.group_rate_per_us = o.group_rate;
  s.jitter_ns = o.jitter_ns;
  s.seed = run.g.seed;
  if (!(o.duration_ms > 0.0)) throw ValidationError("--duration-ms", "must be positive");
  const auto streams = synth_tags(s, static_cast<std::int64_t>(std::llround(o.duration_ms * 1e6)));
  const auto path = run.path(o.out);
  std::string format = o.format;
  if (format.empty()) format = std::filesystem::path(path).extension() == ".csv" ? "csv" : "ttag";
  if (format == "csv") write_tags_csv(path, streams);
  else if (format == "ttag") write_tags_binary(path, streams);
  else throw ValidationError("--format", "expected csv or ttag");
  json meta = run.metadata();
  meta["model"] = to_string(s.model);
  meta["rate_per_us"] = s.rate_per_us;
  meta["group_rate_per_us"] = s.group_rate_per_us;
  meta["jitter_ns"] = s.jitter_ns;
  meta["duration_ms"] = o.duration_ms;
  meta["counts"] = {streams[0].timestamps.size(), streams[1].timestamps.size(),
                    streams[2].timestamps.size()};
  meta["format"] = format;
  write_json(path + ".json", meta);
  spdlog::info("wrote {} ({} format)", path, format);
}

const char* error_kind(const std::exception& e) {
  if (dynamic_cast<const PoleError*>(&e)) return "PoleError";
  if (dynamic_cast<const ResonanceError*>(&e)) return "ResonanceError";
  if (dynamic_cast<const WindowError*>(&e)) return "WindowError";
  if (dynamic_cast<const ConvergenceError*>(&e)) return "ConvergenceError";
  if (dynamic_cast<const TrackingError*>(&e)) return "TrackingError";
  if (dynamic_cast<const BudgetError*>(&e)) return "BudgetError";
  if (dynamic_cast<const NumericalError*>(&e)) return "NumericalError";
  return "Error";
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("rydloss");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");

  Run run;
  CLI::App app{"Rydberg-polariton three-body loss toolkit.\n"
               "Frequencies are nu = omega/2pi in MHz, lengths in um, times in us unless noted.\n"
               "Defaults are the simulation preset: Omega_c 25, Gamma 7, gamma_s 0.3 MHz,\n"
               "OD 37, sigma_z 40 um, C6/2pi 1.07e7 MHz um^6.",
               "rydloss"};
  app.set_version_flag("--version", RYDLOSS_VERSION);
  app.require_subcommand(1);
  app.fallthrough();
  auto& g = run.g;
  app.add_option("--config", g.config_path, "key = value preset (see presets/)")->check(CLI::ExistingFile);
  app.add_option("--set", g.overrides, "override a config key, e.g. --set omega_c_MHz=23.5 (repeatable)");
  app.add_option("--out-dir", g.out_dir, "directory for all outputs")->capture_default_str();
  app.add_option("--workers", g.workers, "upper bound on worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--seed", g.seed, "seed for synthetic data")->capture_default_str();
  app.add_option("--log-level", g.log_level, "error|warn|info|debug")
      ->capture_default_str()
      ->check(CLI::IsMember({"error", "warn", "info", "debug"}));

  // point-of-operation overrides shared by the physics subcommands
  std::optional<double> delta, deltas;
  std::optional<std::string> profile;
  auto add_point = [&](CLI::App* sub) {
    sub->add_option("--delta", delta, "single-photon detuning delta/2pi, MHz (default 22.5)");
    sub->add_option("--deltas", deltas, "two-photon detuning delta_s/2pi, MHz (default 2)");
    sub->add_option("--profile", profile, "gaussian|homogeneous (homogeneous length 4.2 sigma_z)")
        ->check(CLI::IsMember({"gaussian", "homogeneous"}));
  };

  auto* scales = app.add_subcommand("scales", "derived scales: phi, r_b, OD_b, resonances (JSON)");
  add_point(scales);

  DispersionOpts disp;
  auto* dispersion = app.add_subcommand("dispersion", "L/D/U branches vs momentum (CSV, MHz and 1/um)");
  add_point(dispersion);
  dispersion->add_option("--qmin", disp.qmin, "lowest momentum, 1/um")->capture_default_str();
  dispersion->add_option("--qmax", disp.qmax, "highest momentum, 1/um")->capture_default_str();
  dispersion->add_option("--points", disp.points, "samples")->capture_default_str();
  dispersion->add_flag("--lossless", disp.lossless, "drop Gamma and gamma_s");
  dispersion->add_option("--out", disp.out, "CSV path")->capture_default_str();

  PotentialOpts pot;
  auto* potential = app.add_subcommand("potential", "saturated potential V_e(omega, r) (CSV, MHz)");
  add_point(potential);
  potential->add_option("--omega", pot.omega, "energy argument omega/2pi, MHz")->capture_default_str();
  potential->add_option("--rmin", pot.rmin, "um")->capture_default_str();
  potential->add_option("--rmax", pot.rmax, "um")->capture_default_str();
  potential->add_option("--points", pot.points, "samples")->capture_default_str();
  potential->add_option("--out", pot.out, "CSV path")->capture_default_str();

  std::string res_method = "numeric_root", res_out = "resonances.json";
  auto* resonances = app.add_subcommand("resonances", "delta_0 and delta_+ (JSON, MHz)");
  add_point(resonances);
  resonances->add_option("--method", res_method, "closed_form|numeric_root")->capture_default_str();
  resonances->add_option("--out", res_out, "JSON path")->capture_default_str();

  MapOpts mapo;
  auto* bmap = app.add_subcommand("beta-map", "three-body rate |beta| over (delta, delta_s) (CSV + JSON)");
  bmap->add_option("--delta", mapo.delta, "delta/2pi grid lo:hi:step or list, MHz")->capture_default_str();
  bmap->add_option("--deltas", mapo.deltas, "delta_s/2pi grid lo:hi:step or list, MHz")->capture_default_str();
  bmap->add_option("--method", mapo.method, "full|simplified|asymptotic")->capture_default_str();
  bmap->add_option("--checkpoint", mapo.checkpoint, "resumable checkpoint file");
  bmap->add_option("--out", mapo.out, "CSV path")->capture_default_str();
  bmap->add_option("--profile", profile, "gaussian|homogeneous");

  LocusOpts loc;
  auto* locus = app.add_subcommand("locus", "delta*(delta_s) maximizing |beta| (JSON array, MHz)");
  locus->add_option("--deltas", loc.deltas, "delta_s/2pi grid, MHz")->capture_default_str();
  locus->add_option("--lo", loc.lo, "scan start delta/2pi, MHz")->capture_default_str();
  locus->add_option("--hi", loc.hi, "scan end delta/2pi, MHz")->capture_default_str();
  locus->add_option("--coarse", loc.coarse, "coarse scan points")->capture_default_str();
  locus->add_option("--method", loc.method, "full|simplified|asymptotic")->capture_default_str();
  locus->add_option("--out", loc.out, "JSON path")->capture_default_str();

  SimOpts sim;
  auto* simulate = app.add_subcommand("simulate", "steady-state 2/3-photon propagation: g2(0), g3(0,0), eta3(0,0)");
  add_point(simulate);
  simulate->add_option("--n", sim.n, "excitation number, 2 or 3")->capture_default_str();
  simulate->add_option("--grid", sim.grid, "intervals M per axis (M+1 nodes)")->capture_default_str();
  simulate->add_option("--extent", sim.extent, "half-width of the grid in sigma_z")->capture_default_str();
  simulate->add_option("--cap", sim.cap, "potential cap in units of |1/chi(0)|")->capture_default_str();
  simulate->add_option("--tau", sim.tau, "delays for g2(tau)/g3(0,tau), us, grid lo:hi:step or list");
  simulate->add_option("--delta-grid", sim.delta_grid, "map mode: delta/2pi grid, MHz");
  simulate->add_option("--deltas-grid", sim.deltas_grid, "map mode: delta_s/2pi grid, MHz");
  simulate->add_option("--memory-gb", sim.memory_gb, "refuse three-body grids above this")->capture_default_str();
  simulate->add_option("--out", sim.out, "JSON path")->capture_default_str();

  CorrelateOpts corr;
  auto* correlate = app.add_subcommand("correlate", "g2(tau), g3(tau1,tau2), eta3 from time tags");
  correlate->add_option("--input", corr.input, "CSV channel,timestamp_ns or TTAG1 binary")->required()->check(CLI::ExistingFile);
  correlate->add_option("--bin-ns", corr.bin_ns, "bin width, ns")->capture_default_str();
  correlate->add_option("--window-ns", corr.window_ns, "tau_max, ns (multiple of the bin)")->capture_default_str();
  correlate->add_option("--block-us", corr.block_us, "block period T, us")->capture_default_str();
  correlate->add_option("--duration-ns", corr.duration_ns, "T_exp override, ns");
  correlate->add_option("--out", corr.out, "output prefix")->capture_default_str();

  SynthOpts syn;
  auto* synth = app.add_subcommand("synth", "synthetic three-channel time tags");
  synth->add_option("--model", syn.model, "poisson|bunched_pairs|triplets")->capture_default_str();
  synth->add_option("--rate", syn.rate, "background rate R_in, 1/us")->capture_default_str();
  synth->add_option("--group-rate", syn.group_rate, "pairs or triplets per us")->capture_default_str();
  synth->add_option("--jitter-ns", syn.jitter_ns, "rms spread within a group, ns")->capture_default_str();
  synth->add_option("--duration-ms", syn.duration_ms, "T_exp, ms")->capture_default_str();
  synth->add_option("--format", syn.format, "csv|ttag (default from extension)");
  synth->add_option("--out", syn.out, "output path")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  spdlog::set_level(spdlog::level::from_str(g.log_level));
  CLI::App* sub = app.get_subcommands().front();
  run.command = sub->get_name();

  try {
    run.config = Config::parse(kDefaultConfig, "<defaults>");
    if (!g.config_path.empty()) run.config.merge(Config::load(g.config_path));
    for (const auto& s : g.overrides) run.config.set(s);
    if (delta) run.config.set("delta_MHz", *delta);
    if (deltas) run.config.set("delta_s_MHz", *deltas);
    if (profile) run.config.set("profile", *profile);
    std::filesystem::create_directories(g.out_dir);

    if (run.command == "scales") cmd_scales(run);
    else if (run.command == "dispersion") cmd_dispersion(run, disp);
    else if (run.command == "potential") cmd_potential(run, pot);
    else if (run.command == "resonances") cmd_resonances(run, res_method, res_out);
    else if (run.command == "beta-map") cmd_beta_map(run, mapo);
    else if (run.command == "locus") cmd_locus(run, loc);
    else if (run.command == "simulate") cmd_simulate(run, sim);
    else if (run.command == "correlate") cmd_correlate(run, corr);
    else if (run.command == "synth") cmd_synth(run, syn);
    return 0;
  } catch (const ValidationError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}: {}", error_kind(e), e.what());
    try {
      json diag = run.metadata();
      diag["error_type"] = error_kind(e);
      diag["message"] = e.what();
      const auto path = run.path("rydloss-diagnostic.json");
      write_json(path, diag);
      spdlog::error("diagnostic written to {}", path);
    } catch (const std::exception& inner) {
      spdlog::error("could not write diagnostic: {}", inner.what());
    }
    return 3;
  }
}
