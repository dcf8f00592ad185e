#pragma once

/// @file diagnostics.hpp
/// Measured quantities: entropy and its split, entropy-production lower
/// bounds, masses, positivity minima, section current, CSV records.

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "pnpf/error.hpp"
#include "pnpf/mesh.hpp"
#include "pnpf/model.hpp"
#include "pnpf/operators.hpp"

namespace pnpf {

struct Entropy {
  double total = 0.0;
  double thermal = 0.0;  ///< S1 = <C_T (log T + 1), 1>
  double ionic = 0.0;    ///< S2 = -sum_l <c^l, log c^l>
};

inline Entropy discrete_entropy(const State& s, const ModelParams& p) {
  s.validate();
  const Mesh& mesh = s.mesh();
  Entropy out;
  for (std::size_t i = 0; i < mesh.num_volumes(); ++i)
    out.thermal += mesh.volume(i) * p.c_t * (std::log(s.T[i]) + 1.0);
  for (const GridFunction& c : s.c)
    for (std::size_t i = 0; i < mesh.num_volumes(); ++i)
      out.ionic -= mesh.volume(i) * c[i] * std::log(c[i]);
  out.total = out.thermal + out.ionic;
  return out;
}

/// Entropy accumulated volume by volume in one pass (cross-check of the split).
inline double entropy_direct(const State& s, const ModelParams& p) {
  s.validate();
  const Mesh& mesh = s.mesh();
  double total = 0.0;
  for (std::size_t i = 0; i < mesh.num_volumes(); ++i) {
    double local = p.c_t * (std::log(s.T[i]) + 1.0);
    for (const GridFunction& c : s.c) local -= c[i] * std::log(c[i]);
    total += mesh.volume(i) * local;
  }
  return total;
}

/// Dissipation plus conduction bound of the first-order scheme:
///   eps sum_l <nu c |u|^2, 1/T> - k sum_int tau DT D(1/T).
inline double production_first_order(const ModelParams& p, const std::vector<GridFunction>& c,
                                     const std::vector<VectorGridFunction>& u, const GridFunction& T) {
  const Mesh& mesh = T.mesh();
  double diss = 0.0;
  for (std::size_t l = 0; l < c.size(); ++l) {
    for (std::size_t i = 0; i < mesh.num_volumes(); ++i) {
      const Vec3& v = u[l][i];
      diss += mesh.volume(i) * p.nu[l] * c[l][i] * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]) / T[i];
    }
  }
  double cond = 0.0;
  for (const Edge& ed : mesh.edges()) {
    if (!ed.interior()) continue;
    cond -= ed.trans * (T[ed.j] - T[ed.i]) * (1.0 / T[ed.j] - 1.0 / T[ed.i]);
  }
  return p.eps * diss + p.k * cond;
}

/// Bound of the second-order scheme:
///   eps sum_l <nu a |u|^2, R> + k sum_int tau A(b) D(log R) D R,
/// with a = e^{eta^{n+1/2}}, b = e^{xi^{n+1/2}}.
inline double production_second_order(const ModelParams& p, const std::vector<GridFunction>& a,
                                      const std::vector<VectorGridFunction>& u, const GridFunction& R,
                                      const GridFunction& b) {
  const Mesh& mesh = R.mesh();
  double diss = 0.0;
  for (std::size_t l = 0; l < a.size(); ++l) {
    for (std::size_t i = 0; i < mesh.num_volumes(); ++i) {
      const Vec3& v = u[l][i];
      diss += mesh.volume(i) * p.nu[l] * a[l][i] * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]) * R[i];
    }
  }
  const EdgeFunction hb = harmonic_average(b);
  double cond = 0.0;
  for (std::size_t e = 0; e < mesh.num_edges(); ++e) {
    const Edge& ed = mesh.edge(e);
    if (!ed.interior()) continue;
    cond += ed.trans * hb[e] * (std::log(R[ed.j]) - std::log(R[ed.i])) * (R[ed.j] - R[ed.i]);
  }
  return p.eps * diss + p.k * cond;
}

/// Signed charge flux through the vertical grid line x = x0:
///   I = sum_l z^l sum_{sigma on the line} m(sigma) F^l_sigma n^x.
inline double section_current(const Mesh& mesh, const std::vector<int>& z,
                              const std::vector<EdgeFunction>& flux, double x0) {
  const double tol = 1e-9 * (1.0 + std::abs(x0));
  double current = 0.0;
  bool hit = false;
  for (std::size_t e = 0; e < mesh.num_edges(); ++e) {
    const Edge& ed = mesh.edge(e);
    if (std::abs(ed.a.x - x0) > tol || std::abs(ed.b.x - x0) > tol) continue;
    if (!ed.interior()) fail(Errc::SectionMissesMesh, "section runs along the domain boundary");
    hit = true;
    for (std::size_t l = 0; l < z.size(); ++l)
      current += z[l] * ed.measure * flux[l][e] * ed.normal[0];
  }
  if (!hit) fail(Errc::SectionMissesMesh, fmt::format("no grid line at x = {}", x0));
  return current;
}

struct DiagnosticsRecord {
  double t = 0.0;
  Entropy entropy;
  std::vector<double> mass;
  double min_c = 0.0;
  double min_T = 0.0;
  double max_T = 0.0;
  double mean_dT = 0.0;  ///< volume mean of T minus 1
  double production = 0.0;
  double current = 0.0;
};

inline DiagnosticsRecord make_record(const State& s, const ModelParams& p, double production = 0.0,
                                     double current = 0.0) {
  DiagnosticsRecord r;
  r.t = s.t;
  r.entropy = discrete_entropy(s, p);
  r.min_c = std::numeric_limits<double>::infinity();
  for (const GridFunction& c : s.c) {
    r.mass.push_back(integral(c));
    r.min_c = std::min(r.min_c, c.min());
  }
  r.min_T = s.T.min();
  r.max_T = s.T.max();
  r.mean_dT = integral(s.T) / s.mesh().measure() - 1.0;
  r.production = production;
  r.current = current;
  return r;
}

inline void write_timeseries_header(std::ostream& os, std::size_t species) {
  os << "t,S,S1,S2";
  for (std::size_t l = 0; l < species; ++l) os << ",mass_" << l + 1;
  os << ",min_c,min_T,mean_dT,R,I\n";
}

inline void write_timeseries_row(std::ostream& os, const DiagnosticsRecord& r) {
  os << fmt::format("{},{},{},{}", r.t, r.entropy.total, r.entropy.thermal, r.entropy.ionic);
  for (double m : r.mass) os << fmt::format(",{}", m);
  os << fmt::format(",{},{},{},{},{}\n", r.min_c, r.min_T, r.mean_dT, r.production, r.current);
}

inline void write_snapshot(std::ostream& os, const State& s) {
  const Mesh& mesh = s.mesh();
  os << "index,x,y";
  for (std::size_t l = 0; l < s.c.size(); ++l) os << ",c" << l + 1;
  os << ",psi,T\n";
  for (std::size_t i = 0; i < mesh.num_volumes(); ++i) {
    os << fmt::format("{},{},{}", i, mesh.center(i).x, mesh.center(i).y);
    for (const GridFunction& c : s.c) os << fmt::format(",{}", c[i]);
    os << fmt::format(",{},{}\n", s.psi[i], s.T[i]);
  }
}

}  // namespace pnpf
