// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <fmt/format.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <future>
#include <random>
#include <string>
#include <vector>

#include "pnpf/config.hpp"
#include "pnpf/diagnostics.hpp"
#include "pnpf/experiments.hpp"
#include "pnpf/operators.hpp"
#include "pnpf/scheme1.hpp"
#include "pnpf/scheme2.hpp"

using namespace pnpf;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
};

RunConfig config(const std::string& name, const std::vector<std::string>& overrides = {}) {
  std::ifstream in(std::string(PNPF_CONFIG_DIR) + "/" + name);
  if (!in) fail(Errc::ConfigError, "missing config " + name);
  return load_config(in, overrides);
}

Verdict mms_orders(int scheme) {
  const RunConfig cfg = config("accuracy.ini", {fmt::format("run.scheme={}", scheme)});
  const auto rows = run_accuracy(cfg);
  const auto& last = rows.back();
  Verdict v;
  static const char* names[] = {"c1", "c2", "psi", "T"};
  for (std::size_t k = 0; k < 4; ++k) {
    const double p = last.order[k];
    if (!(p >= 1.8 && p <= 2.2)) v.pass = false;
    v.detail += fmt::format("{}{}={:.3f}", k ? " " : "", names[k], p);
  }
  v.detail += fmt::format(" (h=1/{} vs 1/{})", rows[rows.size() - 2].n, last.n);
  return v;
}

struct ChargingCheck {
  Verdict structure;
  Verdict homogeneous;
};

ChargingCheck charging(int scheme) {
  const RunConfig cfg = config("charging.ini", {fmt::format("run.scheme={}", scheme)});
  const ChargingResult r = run_charging(cfg);
  const std::size_t steps = r.records.size() - 1;
  const DiagnosticsRecord& first = r.records.front();
  double drift = 0.0, min_c = INFINITY, min_T = INFINITY, worst_slack = INFINITY, min_R = INFINITY;
  for (std::size_t k = 1; k < r.records.size(); ++k) {
    const DiagnosticsRecord& prev = r.records[k - 1];
    const DiagnosticsRecord& cur = r.records[k];
    for (std::size_t l = 0; l < cur.mass.size(); ++l)
      drift = std::max(drift, std::abs(cur.mass[l] - first.mass[l]) / first.mass[l]);
    min_c = std::min(min_c, cur.min_c);
    min_T = std::min(min_T, cur.min_T);
    min_R = std::min(min_R, cur.production);
    const double dt = cur.t - prev.t;
    const double slack = cur.entropy.total - prev.entropy.total - dt * cur.production + 1e-8 * std::abs(prev.entropy.total);
    worst_slack = std::min(worst_slack, slack);
  }
  ChargingCheck out;
  out.structure.pass = steps >= 500 && drift < 1e-10 && min_c > 0.0 && min_T > 0.0 && min_R >= 0.0 && worst_slack >= 0.0;
  out.structure.detail = fmt::format("steps={} mass_drift={:.2e} min_c={:.3e} min_T={:.4f} min_R={:.2e} min_slack={:.2e}",
                                     steps, drift, min_c, min_T, min_R, worst_slack);
  const DiagnosticsRecord& last = r.records.back();
  const double spread = last.max_T - last.min_T;
  out.homogeneous.pass = last.mean_dT > 0.0 && spread < 0.01 * last.mean_dT;
  out.homogeneous.detail = fmt::format("mean_dT={:.4e} spread={:.2e} ratio={:.2e}", last.mean_dT, spread,
                                       spread / last.mean_dT);
  return out;
}

GridFunction random_function(const Mesh& m, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  GridFunction f(m, 0.0);
  for (std::size_t i = 0; i < m.num_volumes(); ++i) f[i] = d(rng);
  return f;
}

Verdict operator_identities() {
  std::mt19937_64 rng(2024);
  std::vector<Mesh> meshes;
  meshes.push_back(build_uniform_grid(GeometrySpec::unit_square(12, 9)));
  GeometrySpec g = GeometrySpec::electrode_comb(32, 16);
  meshes.push_back(build_electrode_domain(g));
  double worst_sbp = 0.0, worst_mean = 0.0;
  for (const Mesh& m : meshes) {
    const BoundaryData ins = BoundaryData::insulated(m);
    for (int k = 0; k < 100; ++k) {
      const GridFunction f1 = random_function(m, rng, -1.0, 1.0);
      const GridFunction f2 = random_function(m, rng, -1.0, 1.0);
      const EdgeFunction w = harmonic_average(random_function(m, rng, 0.1, 2.0));
      const GridFunction lap = weighted_laplacian(w, f2, ins);
      const double lhs = inner_product(f1, lap);
      const double rhs = -edge_inner_product(w, f1, f2);
      double scale = 0.0, mass = 0.0, mass_scale = 0.0;
      for (std::size_t i = 0; i < m.num_volumes(); ++i) {
        scale += std::abs(f1[i] * lap[i]) * m.volume(i);
        mass += lap[i] * m.volume(i);
        mass_scale += std::abs(lap[i]) * m.volume(i);
      }
      worst_sbp = std::max(worst_sbp, std::abs(lhs - rhs) / std::max(scale, std::abs(rhs)));
      worst_mean = std::max(worst_mean, std::abs(mass) / mass_scale);
    }
  }
  return {worst_sbp <= 1e-12 && worst_mean <= 1e-12,
          fmt::format("sbp_rel={:.2e} mean_rel={:.2e} (200 functions, square and comb)", worst_sbp, worst_mean)};
}

Verdict scalar_inequalities() {
  std::mt19937_64 rng(314159);
  std::uniform_real_distribution<double> d(-5.0, 5.0);
  int bad_q = 0, bad_r = 0, bad_xi = 0;
  const int n = 100000;
  for (int k = 0; k < n; ++k) {
    const double x = d(rng), y = d(rng);
    const double ex = std::exp(x), ey = std::exp(y);
    const double q = cn_q(y, x), r = cn_r(y, x);
    const double lq = (q + 1.0) * (ey - ex), rq = y * ey - x * ex;
    const double sq = std::abs(q * (ey - ex)) + std::abs(ey - ex) + std::abs(y * ey) + std::abs(x * ex);
    if (!(lq >= rq - 1e-13 * sq)) ++bad_q;
    if (!(r > 0.0)) ++bad_r;
    const double rr = r * (ey - ex);
    if (!(y - x >= rr - 1e-13 * (std::abs(y - x) + std::abs(rr) + r * (ey + ex)))) ++bad_xi;
  }
  return {bad_q == 0 && bad_r == 0 && bad_xi == 0,
          fmt::format("pairs={} Q_violations={} R_nonpositive={} xi_violations={}", n, bad_q, bad_r, bad_xi)};
}

template <class System>
double fd_error(const System& sys, const Vector& x) {
  const Eigen::MatrixXd jac(sys.jacobian(x));
  Eigen::MatrixXd fd(jac.rows(), jac.cols());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double step = 1e-6 * (std::abs(x[k]) + 1.0);
    Vector xp = x, xm = x;
    xp[k] += step;
    xm[k] -= step;
    fd.col(k) = (sys.residual(xp) - sys.residual(xm)) / (2.0 * step);
  }
  return (jac - fd).cwiseAbs().maxCoeff() / jac.cwiseAbs().maxCoeff();
}

State random_state(const Mesh& mesh, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(0.5, 1.5), s(-0.5, 0.5);
  State st = uniform_state(mesh, 2, 1.0, 0.0, 1.0);
  for (std::size_t i = 0; i < mesh.num_volumes(); ++i) {
    for (auto& c : st.c) c[i] = d(rng);
    st.psi[i] = s(rng);
    st.T[i] = d(rng);
  }
  return st;
}

Verdict jacobians() {
  const Mesh m = build_uniform_grid(GeometrySpec::unit_square(4, 4));
  ModelParams p;
  p.z = {1, -1};
  p.nu = {1.0, 1.5};
  p.eps = 0.4;
  p.k = 1.3;
  p.c_t = 2.0;
  Problem pb;
  pb.mesh = &m;
  pb.params = p;
  pb.potential_bc = [&m](double) {
    return BoundaryData::from(m, [](const Edge& e) {
      if (e.kind != EdgeKind::Dirichlet) return 0.0;
      return e.midpoint().x < 0.5 ? 0.3 : -0.4;
    });
  };
  std::mt19937_64 rng(4242);
  double worst1 = 0.0, worst2 = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    const State prev = random_state(m, rng);
    const State next = random_state(m, rng);
    const Scheme1System s1(pb, prev, 0.05);
    Vector x1 = s1.initial_guess();
    for (std::size_t i = 0; i < m.num_volumes(); ++i) {
      x1[static_cast<Eigen::Index>(s1.dof(i, 0))] = next.c[0][i];
      x1[static_cast<Eigen::Index>(s1.dof(i, 1))] = next.c[1][i];
      x1[static_cast<Eigen::Index>(s1.dof(i, 2))] = next.psi[i];
    }
    worst1 = std::max(worst1, fd_error(s1, x1));
    const Scheme2System s2(pb, prev, 0.05);
    worst2 = std::max(worst2, fd_error(s2, s2.pack(next)));
  }
  return {worst1 < 1e-6 && worst2 < 1e-6,
          fmt::format("scheme1_rel={:.2e} scheme2_rel={:.2e} (4x4, 5 random states)", worst1, worst2)};
}

struct CvCheck {
  Verdict slope;
  Verdict entropy;
  Verdict hysteresis;
};

CvCheck cv() {
  const RunConfig cfg = config("cv.ini");
  const CvResult res = run_cv(cfg);
  CvCheck out;

  out.slope.pass = std::abs(res.fit.slope - 2.0) <= 0.15;
  out.slope.detail = fmt::format("slope={:.4f} rates=", res.fit.slope);
  for (std::size_t k = 0; k < res.runs.size(); ++k)
    out.slope.detail += fmt::format("{}{}:chi={:.4e}", k ? "," : "", res.runs[k].protocol.nu, res.runs[k].chi);

  bool signs = true, monotone = true;
  double worst_drop = 0.0;
  for (const CvRun& run : res.runs) {
    for (std::size_t c = 1; c < run.cycles.size(); ++c)
      if (!(run.cycles[c].dS2_charge < 0.0 && run.cycles[c].dS2_discharge > 0.0)) signs = false;
    for (std::size_t k = 1; k < run.records.size(); ++k) {
      const double prev = run.records[k - 1].entropy.total;
      const double drop = prev - run.records[k].entropy.total;
      worst_drop = std::max(worst_drop, drop / std::abs(prev));
      if (drop > 1e-8 * std::abs(prev)) monotone = false;
    }
  }
  out.entropy.pass = signs && monotone;
  out.entropy.detail = fmt::format("s2_signs={} s_monotone={} worst_rel_drop={:.2e}", signs, monotone, worst_drop);
  for (const CvRun& run : res.runs)
    for (std::size_t c = 1; c < run.cycles.size(); ++c)
      out.entropy.detail += fmt::format(" [nu={} cyc{}: {:+.3e}/{:+.3e}]", run.protocol.nu, c + 1,
                                        run.cycles[c].dS2_charge, run.cycles[c].dS2_discharge);

  // two fastest rates: nonzero loop area, shrinking while the cell heats up
  std::vector<const CvRun*> runs;
  for (const CvRun& r : res.runs) runs.push_back(&r);
  std::sort(runs.begin(), runs.end(), [](const CvRun* a, const CvRun* b) { return a->protocol.nu > b->protocol.nu; });
  bool hyst = runs.size() >= 2;
  for (std::size_t k = 0; k < std::min<std::size_t>(2, runs.size()); ++k) {
    const auto& cyc = runs[k]->cycles;
    out.hysteresis.detail += fmt::format("{}nu={}:", k ? " " : "", runs[k]->protocol.nu);
    for (std::size_t c = 0; c < cyc.size(); ++c) {
      out.hysteresis.detail += fmt::format(" A={:.4e}/dT={:.3e}", cyc[c].area, cyc[c].mean_dT_end);
      if (!(cyc[c].area > 0.0)) hyst = false;
      if (c > 0 && !(cyc[c].area < cyc[c - 1].area && cyc[c].mean_dT_end > cyc[c - 1].mean_dT_end)) hyst = false;
    }
  }
  out.hysteresis.pass = hyst;
  return out;
}

void report(const char* name, const Verdict& v, bool& all) {
  fmt::print("{} {}: {}\n", v.pass ? "PASS" : "FAIL", name, v.detail);
  std::fflush(stdout);
  all = all && v.pass;
}

template <class T>
T guarded(std::future<T>& f, const char* name, bool& ok) {
  try {
    return f.get();
  } catch (const std::exception& e) {
    fmt::print("FAIL {}: exception {}\n", name, e.what());
    ok = false;
    return T{};
  }
}

}  // namespace

int main() {
  auto mms1 = std::async(std::launch::async, [] { return mms_orders(1); });
  auto mms2 = std::async(std::launch::async, [] { return mms_orders(2); });
  auto ch1 = std::async(std::launch::async, [] { return charging(1); });
  auto ch2 = std::async(std::launch::async, [] { return charging(2); });
  auto cvf = std::async(std::launch::async, [] { return cv(); });

  bool all = true, ok = true;
  report("operator_identities", operator_identities(), all);
  report("scalar_inequalities_scheme2", scalar_inequalities(), all);
  report("jacobian_fd", jacobians(), all);

  const Verdict m1 = guarded(mms1, "convergence_scheme1", ok);
  if (ok) report("convergence_scheme1", m1, all);
  ok = true;
  const Verdict m2 = guarded(mms2, "convergence_scheme2", ok);
  if (ok) report("convergence_scheme2", m2, all);
  ok = true;

  const ChargingCheck c1 = guarded(ch1, "structure_preservation", ok);
  bool ok2 = true;
  const ChargingCheck c2 = guarded(ch2, "structure_preservation", ok2);
  if (ok && ok2) {
    Verdict both{c1.structure.pass && c2.structure.pass,
                 "scheme1[" + c1.structure.detail + "] scheme2[" + c2.structure.detail + "]"};
    report("structure_preservation", both, all);
  }

  ok = true;
  const CvCheck c = guarded(cvf, "cv", ok);
  if (ok) {
    report("cv_quadratic_law", c.slope, all);
    report("cv_entropy_split_signs", c.entropy, all);
  }
  if (ok && ok2) {
    Verdict sub{c1.homogeneous.pass && c.hysteresis.pass,
                "charging[" + c1.homogeneous.detail + "] hysteresis[" + c.hysteresis.detail + "]"};
    report("steady_state_substitute", sub, all);
  }
  all = all && ok && ok2;
  fmt::print("{}\n", all ? "ACCEPTANCE PASS" : "ACCEPTANCE FAIL");
  return all ? 0 : 1;
}
