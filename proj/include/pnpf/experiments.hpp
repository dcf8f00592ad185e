#pragma once

/// @file experiments.hpp
/// Orchestration of the three experiments (manufactured-solution accuracy,
/// constant-voltage charging, cyclic voltammetry) and their output layout:
///
///   <out>/manifest.ini            resolved configuration
///   <out>/convergence.csv         accuracy
///   <out>/timeseries.csv          charging diagnostics, one row per step
///   <out>/mesh.csv, snapshots/    charging geometry and field snapshots
///   <out>/rate_<k>/{timeseries,iv}.csv and cv_summary.csv, cv_fit.csv

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <numeric>
#include <string>
#include <vector>

#include "pnpf/config.hpp"
#include "pnpf/diagnostics.hpp"
#include "pnpf/error.hpp"
#include "pnpf/mesh.hpp"
#include "pnpf/mms.hpp"
#include "pnpf/model.hpp"
#include "pnpf/scheme1.hpp"
#include "pnpf/scheme2.hpp"

namespace pnpf {

namespace fs = std::filesystem;

/// Triangle wave rising at rate nu from 0 to v_max over t0 = v_max/nu, then
/// falling back to 0 over the next t0.
struct CvProtocol {
  double nu = 1.0;
  double v_max = 1.0;
  int cycles = 1;

  double t0() const { return v_max / nu; }
};

inline double cv_voltage(double t, const CvProtocol& p) {
  const double t0 = p.t0();
  const double phase = t - 2.0 * t0 * std::floor(t / (2.0 * t0));
  return phase <= t0 ? p.nu * phase : p.v_max - p.nu * (phase - t0);
}

/// Dirichlet data holding the high electrode at `v` and every other
/// Dirichlet edge at 0; Neumann edges carry zero surface charge.
inline BoundaryData electrode_potential(const Mesh& mesh, double v) {
  return BoundaryData::from(mesh, [v](const Edge& ed) {
    if (ed.kind != EdgeKind::Dirichlet) return 0.0;
    return ed.group == group::electrode_high || ed.group == group::right ? v : 0.0;
  });
}

/// Vertical grid line closest to the middle of the box, used for the current.
inline double current_section(const GeometrySpec& g) {
  const double dx = (g.x_max - g.x_min) / g.nx;
  return g.x_min + std::round(0.5 * g.nx) * dx;
}

inline Problem make_problem(const RunConfig& cfg, const Mesh& mesh, std::function<double(double)> voltage) {
  Problem pb;
  pb.mesh = &mesh;
  pb.params = cfg.model;
  if (cfg.fixed_charge != 0.0) pb.params.fixed_charge.assign(mesh.num_volumes(), cfg.fixed_charge);
  pb.potential_bc = [&mesh, voltage = std::move(voltage)](double t) { return electrode_potential(mesh, voltage(t)); };
  return pb;
}

/// Advances one state with either scheme, keeping the second-order history.
class Integrator {
 public:
  Integrator(const Problem& pb, const RunConfig& cfg)
      : pb_(pb), scheme_(cfg.scheme), newton_(cfg.newton), ctl_(cfg.step), cn_(pb, cfg.newton, cfg.step) {}

  StepResult step(const State& s, double dt) {
    StepResult r = scheme_ == 1 ? step_scheme1(pb_, s, dt, newton_, ctl_) : cn_.step(s, dt);
    if (r.report.substeps > 1) ++halved_steps_;
    if (r.report.fallback) ++fallbacks_;
    return r;
  }

  int halved_steps() const { return halved_steps_; }
  int fallbacks() const { return fallbacks_; }

 private:
  const Problem& pb_;
  int scheme_;
  NewtonConfig newton_;
  StepControl ctl_;
  Scheme2Stepper cn_;
  int halved_steps_ = 0;
  int fallbacks_ = 0;
};

/// Number of steps of size close to `dt` that exactly cover `span`.
inline int step_count(double span, double dt) {
  return std::max(1, static_cast<int>(std::ceil(span / dt - 1e-9)));
}

inline std::ofstream open_output(const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) fail(Errc::ConfigError, "cannot write " + path.string());
  return os;
}

inline void write_manifest_file(const RunConfig& cfg, const fs::path& dir) {
  std::ofstream os = open_output(dir / "manifest.ini");
  write_manifest(os, cfg);
}

// ---------------------------------------------------------------- charging

struct ChargingResult {
  std::vector<DiagnosticsRecord> records;  ///< records[0] is the initial state
  State final_state;
  int halved_steps = 0;
  int fallbacks = 0;
};

/// Constant voltage psi_star applied from a neutral state at rest
/// (c = 1, psi = 0, T = 1). Writes when `out` is not empty.
inline ChargingResult run_charging(const RunConfig& cfg, const fs::path& out = {}) {
  cfg.validate();
  const Mesh mesh = build_mesh(cfg.geometry);
  const double psi_star = cfg.psi_star;
  const Problem pb = make_problem(cfg, mesh, [psi_star](double) { return psi_star; });
  const int steps = step_count(cfg.t_end, cfg.dt);
  const double dt = cfg.t_end / steps;
  const double x_cut = current_section(cfg.geometry);

  std::ofstream ts;
  std::ofstream index;
  if (!out.empty()) {
    write_manifest_file(cfg, out);
    std::ofstream mesh_os = open_output(out / "mesh.csv");
    write_mesh_csv(mesh, mesh_os);
    ts = open_output(out / "timeseries.csv");
    write_timeseries_header(ts, pb.params.species());
    index = open_output(out / "snapshots" / "index.csv");
    index << "file,t\n";
  }

  std::vector<double> pending = cfg.snapshots;
  std::sort(pending.begin(), pending.end());
  auto snapshot = [&](const State& s, int k) {
    while (!pending.empty() && pending.front() <= s.t + 0.5 * dt) {
      pending.erase(pending.begin());
      if (out.empty()) continue;
      const std::string name = fmt::format("snapshot_{:06d}.csv", k);
      std::ofstream os = open_output(out / "snapshots" / name);
      write_snapshot(os, s);
      index << fmt::format("{},{}\n", name, s.t);
    }
  };

  ChargingResult res;
  State s = uniform_state(mesh, pb.params.species(), 1.0, 0.0, 1.0);
  res.records.push_back(make_record(s, pb.params));
  if (ts) write_timeseries_row(ts, res.records.back());
  snapshot(s, 0);

  Integrator integ(pb, cfg);
  for (int k = 1; k <= steps; ++k) {
    StepResult r = integ.step(s, dt);
    s = std::move(r.state);
    s.t = k * dt;
    const double current = section_current(mesh, pb.params.z, r.report.flux, x_cut);
    res.records.push_back(make_record(s, pb.params, r.report.production, current));
    if (ts) write_timeseries_row(ts, res.records.back());
    snapshot(s, k);
  }
  res.final_state = std::move(s);
  res.halved_steps = integ.halved_steps();
  res.fallbacks = integ.fallbacks();
  return res;
}

// ---------------------------------------------------------------- cyclic voltammetry

struct CycleSummary {
  double area = 0.0;           ///< |closed integral of I dV| over the cycle
  double mean_dT_end = 0.0;    ///< mean temperature rise at the end of the cycle
  double dS2_charge = 0.0;     ///< net change of the ionic entropy while the voltage rises
  double dS2_discharge = 0.0;  ///< and while it falls
};

struct CvRun {
  CvProtocol protocol;
  double dt = 0.0;
  std::vector<DiagnosticsRecord> records;
  std::vector<double> voltage;  ///< applied voltage at each record
  std::vector<CycleSummary> cycles;
  double chi = 0.0;  ///< least-squares slope of mean_dT over the cycle ends
  int halved_steps = 0;
  int fallbacks = 0;
};

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

inline LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) fail(Errc::ConfigError, "a line fit needs at least two points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (x[k] - mx) * (y[k] - my);
    sxx += (x[k] - mx) * (x[k] - mx);
  }
  if (!(sxx > 0.0)) fail(Errc::ConfigError, "a line fit needs distinct abscissae");
  return {sxy / sxx, my - sxy / sxx * mx};
}

/// One CV trajectory; the time step is snapped so each half cycle holds an
/// integer number of steps.
inline CvRun run_cv_rate(const RunConfig& cfg, double nu, const fs::path& out = {}) {
  CvRun run;
  run.protocol = {nu, cfg.cv.v_max, cfg.cv.cycles};
  const CvProtocol proto = run.protocol;
  const int per_half = step_count(proto.t0(), cfg.dt);
  run.dt = proto.t0() / per_half;

  const Mesh mesh = build_mesh(cfg.geometry);
  const Problem pb = make_problem(cfg, mesh, [proto](double t) { return cv_voltage(t, proto); });
  const double x_cut = current_section(cfg.geometry);

  std::ofstream ts, iv;
  if (!out.empty()) {
    ts = open_output(out / "timeseries.csv");
    write_timeseries_header(ts, pb.params.species());
    iv = open_output(out / "iv.csv");
    iv << "t,V,I,mean_dT\n";
  }
  auto emit = [&](const DiagnosticsRecord& r, double v) {
    run.records.push_back(r);
    run.voltage.push_back(v);
    if (ts) write_timeseries_row(ts, r);
    if (iv) iv << fmt::format("{},{},{},{}\n", r.t, v, r.current, r.mean_dT);
  };

  State s = uniform_state(mesh, pb.params.species(), 1.0, 0.0, 1.0);
  emit(make_record(s, pb.params), 0.0);
  Integrator integ(pb, cfg);
  const int total = 2 * per_half * proto.cycles;
  for (int k = 1; k <= total; ++k) {
    StepResult r = integ.step(s, run.dt);
    s = std::move(r.state);
    s.t = k * run.dt;
    // the voltage at a half-cycle end is exact, so rounding never flips the branch
    const double v = k % (2 * per_half) == 0 ? 0.0 : k % per_half == 0 ? proto.v_max : cv_voltage(s.t, proto);
    emit(make_record(s, pb.params, r.report.production,
                     section_current(mesh, pb.params.z, r.report.flux, x_cut)),
         v);
  }

  std::vector<double> t_end, dT_end;
  for (int c = 0; c < proto.cycles; ++c) {
    const std::size_t a = static_cast<std::size_t>(2 * c * per_half);
    const std::size_t m = a + static_cast<std::size_t>(per_half);
    const std::size_t b = m + static_cast<std::size_t>(per_half);
    CycleSummary cs;
    double area = 0.0;
    for (std::size_t k = a + 1; k <= b; ++k)
      area += 0.5 * (run.records[k].current + run.records[k - 1].current) * (run.voltage[k] - run.voltage[k - 1]);
    cs.area = std::abs(area);
    cs.mean_dT_end = run.records[b].mean_dT;
    cs.dS2_charge = run.records[m].entropy.ionic - run.records[a].entropy.ionic;
    cs.dS2_discharge = run.records[b].entropy.ionic - run.records[m].entropy.ionic;
    run.cycles.push_back(cs);
    t_end.push_back(run.records[b].t);
    dT_end.push_back(cs.mean_dT_end);
  }
  run.chi = least_squares(t_end, dT_end).slope;
  run.halved_steps = integ.halved_steps();
  run.fallbacks = integ.fallbacks();
  return run;
}

struct CvResult {
  std::vector<CvRun> runs;
  LineFit fit;  ///< log chi against log nu
};

/// All scan rates, each on its own thread and output directory.
inline CvResult run_cv(const RunConfig& cfg, const fs::path& out = {}) {
  cfg.validate();
  if (!out.empty()) write_manifest_file(cfg, out);
  std::vector<std::future<CvRun>> jobs;
  for (std::size_t k = 0; k < cfg.cv.scan_rates.size(); ++k) {
    const fs::path dir = out.empty() ? fs::path{} : out / fmt::format("rate_{}", k + 1);
    jobs.push_back(std::async(std::launch::async, [&cfg, k, dir] { return run_cv_rate(cfg, cfg.cv.scan_rates[k], dir); }));
  }
  CvResult res;
  for (auto& j : jobs) res.runs.push_back(j.get());

  std::vector<double> lx, ly;
  for (const CvRun& r : res.runs) {
    if (r.chi > 0.0) {
      lx.push_back(std::log(r.protocol.nu));
      ly.push_back(std::log(r.chi));
    }
  }
  if (lx.size() >= 2 && lx.size() == res.runs.size()) res.fit = least_squares(lx, ly);
  else res.fit = {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};

  if (!out.empty()) {
    std::ofstream sum = open_output(out / "cv_summary.csv");
    sum << "nu,t0,dt,chi,halved_steps,cycle,area,mean_dT_end,dS2_charge,dS2_discharge\n";
    for (const CvRun& r : res.runs)
      for (std::size_t c = 0; c < r.cycles.size(); ++c) {
        const CycleSummary& cs = r.cycles[c];
        sum << fmt::format("{},{},{},{},{},{},{},{},{},{}\n", r.protocol.nu, r.protocol.t0(), r.dt, r.chi,
                           r.halved_steps, c + 1, cs.area, cs.mean_dT_end, cs.dS2_charge, cs.dS2_discharge);
      }
    std::ofstream fit = open_output(out / "cv_fit.csv");
    fit << "slope,intercept\n" << fmt::format("{},{}\n", res.fit.slope, res.fit.intercept);
  }
  return res;
}

// ---------------------------------------------------------------- accuracy

inline std::vector<mms::ConvergenceRow> run_accuracy(const RunConfig& cfg, const fs::path& out = {}) {
  cfg.validate();
  const mms::TimeRule rule = cfg.scheme == 1 ? mms::TimeRule::HSquared : mms::TimeRule::HOverTen;
  std::vector<mms::ConvergenceRow> rows =
      mms::run_convergence_study(cfg.scheme, cfg.mms.levels, rule, cfg.mms.t_end, cfg.newton);
  if (!out.empty()) {
    write_manifest_file(cfg, out);
    std::ofstream os = open_output(out / "convergence.csv");
    mms::write_convergence_csv(os, rows);
  }
  return rows;
}

/// Runs the configured experiment into cfg.output.
inline void run_experiment(const RunConfig& cfg) {
  const fs::path out(cfg.output);
  switch (cfg.experiment) {
    case Experiment::Accuracy: run_accuracy(cfg, out); break;
    case Experiment::Charging: run_charging(cfg, out); break;
    case Experiment::CyclicVoltammetry: run_cv(cfg, out); break;
  }
}

}  // namespace pnpf
