#pragma once

/// @file mms.hpp
/// Manufactured-solution harness on the unit square: exact fields, forcing,
/// exact cell and face averages, error norms and convergence tables.
///
/// The forced system uses unit coefficients and valences (+1, -1):
///   d_t c + div(c u) = f_l,   c u = -grad(c T) - z c grad(psi),
///   -Lap psi = c^1 - c^2 + rho,
///   d_t T = Lap T + sum_l { T [div(c u log c) + (1 + log c) d_t c] + c |u|^2 } + f_3.

#include <fmt/format.h>

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <vector>

#include "pnpf/error.hpp"
#include "pnpf/mesh.hpp"
#include "pnpf/model.hpp"
#include "pnpf/operators.hpp"
#include "pnpf/scheme1.hpp"
#include "pnpf/scheme2.hpp"

namespace pnpf::mms {

inline constexpr double kAmplitude = 0.1;
inline constexpr double kOffset = 0.2;
inline constexpr std::array<int, 2> kValence{1, -1};

struct ExactFields {
  double c1 = 0.0, c2 = 0.0, T = 0.0, psi = 0.0;
};

struct Sources {
  double f1 = 0.0, f2 = 0.0, f3 = 0.0, rho = 0.0;
};

/// Value, gradient, Laplacian and time derivative of one scalar field.
struct Jet {
  double v = 0.0, gx = 0.0, gy = 0.0, lap = 0.0, dt = 0.0;
};

/// phi = A e^{-t} cos(pi x) cos(pi y).
inline Jet mode(double t, double x, double y) {
  constexpr double pi = std::numbers::pi;
  const double a = kAmplitude * std::exp(-t);
  const double cx = std::cos(pi * x), sx = std::sin(pi * x);
  const double cy = std::cos(pi * y), sy = std::sin(pi * y);
  Jet j;
  j.v = a * cx * cy;
  j.gx = -pi * a * sx * cy;
  j.gy = -pi * a * cx * sy;
  j.lap = -2.0 * pi * pi * j.v;
  j.dt = -j.v;
  return j;
}

inline ExactFields exact_fields(double t, double x, double y) {
  const double phi = mode(t, x, y).v;
  return {phi + kOffset, phi + kOffset, phi + kOffset, phi};
}

/// Closed-form forcing from substituting the exact fields.
inline Sources source_terms(double t, double x, double y) {
  const Jet phi = mode(t, x, y);
  Jet c = phi, T = phi;
  c.v += kOffset;
  T.v += kOffset;
  const Jet& psi = phi;

  Sources s;
  double heat = 0.0;
  double charge = 0.0;
  for (int l = 0; l < 2; ++l) {
    const double z = kValence[static_cast<std::size_t>(l)];
    // c u = -(T grad c + c grad T) - z c grad psi
    const double jx = -(T.v * c.gx + c.v * T.gx) - z * c.v * psi.gx;
    const double jy = -(T.v * c.gy + c.v * T.gy) - z * c.v * psi.gy;
    const double div_j = -(T.v * c.lap + 2.0 * (c.gx * T.gx + c.gy * T.gy) + c.v * T.lap) -
                         z * (c.gx * psi.gx + c.gy * psi.gy + c.v * psi.lap);
    const double logc = std::log(c.v);
    const double div_jlog = logc * div_j + (jx * c.gx + jy * c.gy) / c.v;
    const double diss = (jx * jx + jy * jy) / c.v;
    heat += T.v * (div_jlog + (1.0 + logc) * c.dt) + diss;
    charge += z * c.v;
    (l == 0 ? s.f1 : s.f2) = c.dt + div_j;
  }
  s.rho = -psi.lap - charge;
  s.f3 = T.dt - T.lap - heat;
  return s;
}

/// (1/(b-a)) int_a^b cos(pi s) ds
inline double cos_average(double a, double b) {
  constexpr double pi = std::numbers::pi;
  return (std::sin(pi * b) - std::sin(pi * a)) / (pi * (b - a));
}

/// Exact cell averages of the manufactured fields at time t.
inline State exact_state(const Mesh& mesh, double t) {
  const GridInfo& g = mesh.grid();
  State s = uniform_state(mesh, 2, 0.0, 0.0, 0.0, t);
  const double a = kAmplitude * std::exp(-t);
  for (std::size_t i = 0; i < mesh.num_volumes(); ++i) {
    const Point p = mesh.center(i);
    const double mean = a * cos_average(p.x - 0.5 * g.dx, p.x + 0.5 * g.dx) *
                        cos_average(p.y - 0.5 * g.dy, p.y + 0.5 * g.dy);
    s.c[0][i] = s.c[1][i] = s.T[i] = mean + kOffset;
    s.psi[i] = mean;
  }
  return s;
}

/// Potential data: exact edge averages on Dirichlet edges, homogeneous Neumann elsewhere.
inline BoundaryData potential_data(const Mesh& mesh, double t) {
  const double a = kAmplitude * std::exp(-t);
  constexpr double pi = std::numbers::pi;
  return BoundaryData::from(mesh, [&](const Edge& ed) {
    if (ed.kind != EdgeKind::Dirichlet) return 0.0;
    if (ed.a.x == ed.b.x) return a * std::cos(pi * ed.a.x) * cos_average(ed.a.y, ed.b.y);
    return a * std::cos(pi * ed.a.y) * cos_average(ed.a.x, ed.b.x);
  });
}

inline ModelParams unit_params() {
  ModelParams p;
  p.z = {kValence[0], kValence[1]};
  p.nu = {1.0, 1.0};
  p.eps = p.k = p.c_t = 1.0;
  return p;
}

/// Forced problem on a unit-square mesh with Dirichlet x faces and Neumann y faces.
inline Problem make_problem(const Mesh& mesh) {
  Problem pb;
  pb.mesh = &mesh;
  pb.params = unit_params();
  pb.potential_bc = [&mesh](double t) { return potential_data(mesh, t); };
  pb.sources = [&mesh](double t) {
    SourceValues sv;
    sv.mass.assign(2, GridFunction(mesh, 0.0));
    sv.heat = GridFunction(mesh, 0.0);
    sv.charge = GridFunction(mesh, 0.0);
    for (std::size_t i = 0; i < mesh.num_volumes(); ++i) {
      const Point p = mesh.center(i);
      const Sources s = source_terms(t, p.x, p.y);
      sv.mass[0][i] = s.f1;
      sv.mass[1][i] = s.f2;
      sv.heat[i] = s.f3;
      sv.charge[i] = s.rho;
    }
    return sv;
  };
  return pb;
}

/// l2 error of c1, c2, psi, T against exact cell averages.
inline std::array<double, 4> errors(const State& s) {
  const State ex = exact_state(s.mesh(), s.t);
  std::array<double, 4> err{};
  const std::array<std::pair<const GridFunction*, const GridFunction*>, 4> pairs{
      {{&s.c[0], &ex.c[0]}, {&s.c[1], &ex.c[1]}, {&s.psi, &ex.psi}, {&s.T, &ex.T}}};
  for (std::size_t k = 0; k < 4; ++k) {
    GridFunction d = *pairs[k].first;
    for (std::size_t i = 0; i < d.size(); ++i) d[i] -= (*pairs[k].second)[i];
    err[k] = norm_l2(d);
  }
  return err;
}

enum class TimeRule { HSquared, HOverTen };

struct ConvergenceRow {
  int n = 0;
  double h = 0.0;
  double dt = 0.0;
  int steps = 0;
  int fallbacks = 0;
  std::array<double, 4> err{};
  std::array<double, 4> order{};  ///< NaN on the first row
};

/// Final-time errors on an n x n grid.
inline ConvergenceRow run_level(int scheme, int n, TimeRule rule, double t_end, const NewtonConfig& cfg) {
  const Mesh mesh = build_uniform_grid(GeometrySpec::unit_square(n, n));
  const Problem pb = make_problem(mesh);
  const double h = 1.0 / n;
  const double target = rule == TimeRule::HSquared ? h * h : h / 10.0;
  const int steps = static_cast<int>(std::ceil(t_end / target - 1e-9));
  const double dt = t_end / steps;
  State s = exact_state(mesh, 0.0);
  ConvergenceRow row;
  row.n = n;
  row.h = h;
  row.dt = dt;
  row.steps = steps;
  StepControl ctl;
  Scheme2Stepper cn(pb, cfg, ctl);
  for (int k = 0; k < steps; ++k) {
    StepResult r = scheme == 1 ? step_scheme1(pb, s, dt, cfg, ctl) : cn.step(s, dt);
    row.fallbacks += r.report.fallback ? 1 : 0;
    s = std::move(r.state);
    s.t = (k + 1) * dt;
  }
  row.err = errors(s);
  row.order.fill(std::numeric_limits<double>::quiet_NaN());
  return row;
}

inline std::vector<ConvergenceRow> run_convergence_study(int scheme, const std::vector<int>& levels, TimeRule rule,
                                                         double t_end = 0.1, const NewtonConfig& cfg = {}) {
  if (levels.size() < 3) fail(Errc::ConfigError, "a convergence study needs at least three mesh sizes");
  std::vector<ConvergenceRow> rows;
  for (int n : levels) {
    rows.push_back(run_level(scheme, n, rule, t_end, cfg));
    if (rows.size() > 1) {
      const ConvergenceRow& prev = rows[rows.size() - 2];
      ConvergenceRow& cur = rows.back();
      for (std::size_t k = 0; k < 4; ++k)
        cur.order[k] = std::log(prev.err[k] / cur.err[k]) / std::log(prev.h / cur.h);
    }
  }
  return rows;
}

inline void write_convergence_csv(std::ostream& os, const std::vector<ConvergenceRow>& rows) {
  os << "h,dt,err_c1,err_c2,err_psi,err_T,ord_c1,ord_c2,ord_psi,ord_T\n";
  for (const ConvergenceRow& r : rows) {
    os << fmt::format("{},{}", r.h, r.dt);
    for (double e : r.err) os << fmt::format(",{}", e);
    for (double o : r.order) os << (std::isnan(o) ? std::string(",") : fmt::format(",{}", o));
    os << '\n';
  }
}

}  // namespace pnpf::mms
