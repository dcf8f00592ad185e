#pragma once

/// @file scheme1.hpp
/// First-order semi-implicit time step: a coupled Newton solve for the
/// concentrations and the potential, followed by a linear temperature update.
///
/// Nonlinear unknowns are interleaved per volume as (c^1, ..., c^M, psi).
/// Residuals are written in rate form (divided by the volume measure).

#include <cmath>
#include <string>
#include <vector>

#include "pnpf/diagnostics.hpp"
#include "pnpf/error.hpp"
#include "pnpf/linsys.hpp"
#include "pnpf/mesh.hpp"
#include "pnpf/model.hpp"
#include "pnpf/newton.hpp"
#include "pnpf/operators.hpp"

namespace pnpf {

struct StepResult {
  State state;
  StepReport report;
};

/// Normal flux F of one species across edge e, positive from edge.i to edge.j:
///   F = -(1/nu) [A(c_old) D(log c_new + z psi_new) + D(c_old (T_old - 1))] / d_sigma.
/// Exterior edges carry no flux.
inline double mass_flux_edge(const Mesh& mesh, std::size_t e, int z, double nu, const GridFunction& c_old,
                             const GridFunction& c_new, const GridFunction& psi_new,
                             const GridFunction& T_old) {
  const Edge& ed = mesh.edge(e);
  if (!ed.interior()) return 0.0;
  const std::size_t a = ed.i, b = ed.j;
  if (!(c_new[a] > 0.0 && c_new[b] > 0.0))
    fail(Errc::NonpositiveConcentration, "flux needs positive concentrations");
  const double mob = harmonic_mean(mesh.volume(a), mesh.volume(b), c_old[a], c_old[b]);
  const double dg = std::log(c_new[b]) - std::log(c_new[a]) + z * (psi_new[b] - psi_new[a]);
  const double dh = c_old[b] * (T_old[b] - 1.0) - c_old[a] * (T_old[a] - 1.0);
  return -(mob * dg + dh) / (nu * ed.distance);
}

/// Nonlinear concentration/potential system of one first-order step.
class Scheme1System {
 public:
  Scheme1System(const Problem& pb, const State& prev, double dt)
      : pb_(pb),
        mesh_(prev.mesh()),
        prev_(prev),
        dt_(dt),
        t_next_(prev.t + dt),
        m_(pb.params.species()),
        bc_(pb.potential_bc(prev.t + dt)) {
    const std::size_t n = mesh_.num_volumes(), ne = mesh_.num_edges();
    if (pb.sources) src_ = pb.sources(t_next_);
    mob_.assign(m_ * ne, 0.0);
    dh_.assign(m_ * ne, 0.0);
    for (std::size_t l = 0; l < m_; ++l) {
      const GridFunction& c = prev.c[l];
      for (std::size_t e = 0; e < ne; ++e) {
        const Edge& ed = mesh_.edge(e);
        if (!ed.interior()) continue;
        mob_[l * ne + e] = harmonic_mean(mesh_.volume(ed.i), mesh_.volume(ed.j), c[ed.i], c[ed.j]);
        dh_[l * ne + e] = c[ed.j] * (prev.T[ed.j] - 1.0) - c[ed.i] * (prev.T[ed.i] - 1.0);
      }
    }
    charge_.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      charge_[i] = pb.fixed_charge(i) + (src_.charge.size() ? src_.charge[i] : 0.0);
  }

  std::size_t block() const noexcept { return m_ + 1; }
  std::size_t size() const noexcept { return block() * mesh_.num_volumes(); }
  double t_next() const noexcept { return t_next_; }
  const BoundaryData& potential_bc() const noexcept { return bc_; }

  std::size_t dof(std::size_t i, std::size_t l) const noexcept { return i * block() + l; }

  Vector initial_guess() const {
    Vector x(static_cast<Eigen::Index>(size()));
    for (std::size_t i = 0; i < mesh_.num_volumes(); ++i) {
      for (std::size_t l = 0; l < m_; ++l) x[idx(i, l)] = prev_.c[l][i];
      x[idx(i, m_)] = prev_.psi[i];
    }
    return x;
  }

  bool admissible(const Vector& x) const {
    for (std::size_t i = 0; i < mesh_.num_volumes(); ++i)
      for (std::size_t l = 0; l < m_; ++l)
        if (!(x[idx(i, l)] > 0.0)) return false;
    return true;
  }

  Vector residual(const Vector& x) const {
    const ModelParams& p = pb_.params;
    const std::size_t n = mesh_.num_volumes(), ne = mesh_.num_edges();
    const double e2 = p.eps * p.eps;
    Vector r(static_cast<Eigen::Index>(size()));
    std::vector<double> logc(n * m_);
    for (std::size_t i = 0; i < n; ++i) {
      double q = 0.0;
      for (std::size_t l = 0; l < m_; ++l) {
        const double c = x[idx(i, l)];
        logc[i * m_ + l] = std::log(c);
        const double f = src_.mass.empty() ? 0.0 : src_.mass[l][i];
        r[idx(i, l)] = (c - prev_.c[l][i]) / dt_ - f;
        q += p.z[l] * c;
      }
      r[idx(i, m_)] = -q - charge_[i];
    }
    for (std::size_t e = 0; e < ne; ++e) {
      const Edge& ed = mesh_.edge(e);
      const std::size_t a = ed.i;
      const double ma = mesh_.volume(a);
      const double psa = x[idx(a, m_)];
      if (ed.interior()) {
        const std::size_t b = ed.j;
        const double mb = mesh_.volume(b);
        const double psb = x[idx(b, m_)];
        for (std::size_t l = 0; l < m_; ++l) {
          const double dg = logc[b * m_ + l] - logc[a * m_ + l] + p.z[l] * (psb - psa);
          const double mf = -(ed.trans / p.nu[l]) * (mob_[l * ne + e] * dg + dh_[l * ne + e]);
          r[idx(a, l)] += p.eps * mf / ma;
          r[idx(b, l)] -= p.eps * mf / mb;
        }
        const double w = e2 * ed.trans * (psa - psb);
        r[idx(a, m_)] += w / ma;
        r[idx(b, m_)] -= w / mb;
      } else if (ed.kind == EdgeKind::Dirichlet) {
        r[idx(a, m_)] += e2 * ed.trans * (psa - bc_.value(e)) / ma;
      } else {
        r[idx(a, m_)] -= e2 * ed.measure * bc_.value(e) / ma;
      }
    }
    return r;
  }

  SparseMatrix jacobian(const Vector& x) const {
    const ModelParams& p = pb_.params;
    const std::size_t n = mesh_.num_volumes(), ne = mesh_.num_edges();
    const double e2 = p.eps * p.eps;
    std::vector<Triplet> trip;
    trip.reserve(n * (m_ * 2 + 1) + ne * (m_ * 8 + 4));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t l = 0; l < m_; ++l) {
        trip.emplace_back(idx(i, l), idx(i, l), 1.0 / dt_);
        trip.emplace_back(idx(i, m_), idx(i, l), -static_cast<double>(p.z[l]));
      }
      trip.emplace_back(idx(i, m_), idx(i, m_), 0.0);
    }
    for (std::size_t e = 0; e < ne; ++e) {
      const Edge& ed = mesh_.edge(e);
      const std::size_t a = ed.i;
      const double ma = mesh_.volume(a);
      if (ed.interior()) {
        const std::size_t b = ed.j;
        const double mb = mesh_.volume(b);
        for (std::size_t l = 0; l < m_; ++l) {
          const double k = ed.trans / p.nu[l] * mob_[l * ne + e];
          const double d_ca = k / x[idx(a, l)];
          const double d_cb = -k / x[idx(b, l)];
          const double d_pa = k * p.z[l];
          const double d_pb = -k * p.z[l];
          const double sa = p.eps / ma, sb = -p.eps / mb;
          trip.emplace_back(idx(a, l), idx(a, l), sa * d_ca);
          trip.emplace_back(idx(a, l), idx(b, l), sa * d_cb);
          trip.emplace_back(idx(a, l), idx(a, m_), sa * d_pa);
          trip.emplace_back(idx(a, l), idx(b, m_), sa * d_pb);
          trip.emplace_back(idx(b, l), idx(a, l), sb * d_ca);
          trip.emplace_back(idx(b, l), idx(b, l), sb * d_cb);
          trip.emplace_back(idx(b, l), idx(a, m_), sb * d_pa);
          trip.emplace_back(idx(b, l), idx(b, m_), sb * d_pb);
        }
        const double w = e2 * ed.trans;
        trip.emplace_back(idx(a, m_), idx(a, m_), w / ma);
        trip.emplace_back(idx(a, m_), idx(b, m_), -w / ma);
        trip.emplace_back(idx(b, m_), idx(b, m_), w / mb);
        trip.emplace_back(idx(b, m_), idx(a, m_), -w / mb);
      } else if (ed.kind == EdgeKind::Dirichlet) {
        trip.emplace_back(idx(a, m_), idx(a, m_), e2 * ed.trans / ma);
      }
    }
    SparseMatrix jac(static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(size()));
    jac.setFromTriplets(trip.begin(), trip.end());
    jac.makeCompressed();
    return jac;
  }

  void unpack(const Vector& x, std::vector<GridFunction>& c, GridFunction& psi) const {
    c.assign(m_, GridFunction(mesh_, 0.0));
    psi = GridFunction(mesh_, 0.0);
    for (std::size_t i = 0; i < mesh_.num_volumes(); ++i) {
      for (std::size_t l = 0; l < m_; ++l) c[l][i] = x[idx(i, l)];
      psi[i] = x[idx(i, m_)];
    }
  }

  const SourceValues& sources() const noexcept { return src_; }

 private:
  Eigen::Index idx(std::size_t i, std::size_t l) const noexcept {
    return static_cast<Eigen::Index>(dof(i, l));
  }

  const Problem& pb_;
  const Mesh& mesh_;
  const State& prev_;
  double dt_;
  double t_next_;
  std::size_t m_;
  BoundaryData bc_;
  SourceValues src_;
  std::vector<double> mob_;  ///< harmonic mean of c_old per (species, edge)
  std::vector<double> dh_;   ///< D(c_old (T_old - 1)) per (species, edge)
  std::vector<double> charge_;
};

struct CPsiSolution {
  std::vector<GridFunction> c;
  GridFunction psi;
  int iterations = 0;
};

/// Newton solve of the mass balances and the Poisson equation at t + dt,
/// starting from the previous level.
inline CPsiSolution newton_solve_cpsi(const Problem& pb, const State& prev, double dt,
                                      const NewtonConfig& cfg) {
  const Scheme1System sys(pb, prev, dt);
  const NewtonOutcome out = newton_solve(sys, sys.initial_guess(), cfg);
  CPsiSolution sol;
  sys.unpack(out.x, sol.c, sol.psi);
  sol.iterations = out.iterations;
  return sol;
}

/// Per-species edge fluxes F of the first-order scheme.
inline std::vector<EdgeFunction> scheme1_fluxes(const ModelParams& p, const State& prev,
                                                const std::vector<GridFunction>& c_new,
                                                const GridFunction& psi_new) {
  const Mesh& mesh = prev.mesh();
  std::vector<EdgeFunction> flux;
  for (std::size_t l = 0; l < p.species(); ++l) {
    EdgeFunction f(mesh, 0.0);
    for (std::size_t e = 0; e < mesh.num_edges(); ++e)
      f[e] = mass_flux_edge(mesh, e, p.z[l], p.nu[l], prev.c[l], c_new[l], psi_new, prev.T);
    flux.push_back(std::move(f));
  }
  return flux;
}

/// Vertex velocities u^l = -(1/nu)[T_old grad~ log c + grad~(z psi + T_old)].
inline std::vector<VectorGridFunction> compute_uhat(const ModelParams& p, const std::vector<GridFunction>& c,
                                                    const GridFunction& psi, const GridFunction& T_old) {
  const Mesh& mesh = psi.mesh();
  std::vector<VectorGridFunction> u;
  for (std::size_t l = 0; l < p.species(); ++l) {
    GridFunction logc(mesh, 0.0), drive(mesh, 0.0);
    for (std::size_t i = 0; i < mesh.num_volumes(); ++i) {
      if (!(c[l][i] > 0.0)) fail(Errc::NonpositiveConcentration, "velocity needs positive concentrations");
      logc[i] = std::log(c[l][i]);
      drive[i] = p.z[l] * psi[i] + T_old[i];
    }
    const VectorGridFunction g1 = tilde_gradient(logc);
    const VectorGridFunction g2 = tilde_gradient(drive);
    VectorGridFunction ul(mesh);
    for (std::size_t i = 0; i < mesh.num_volumes(); ++i)
      for (int k = 0; k < 3; ++k) ul[i][k] = -(T_old[i] * g1[i][k] + g2[i][k]) / p.nu[l];
    u.push_back(std::move(ul));
  }
  return u;
}

/// P_i = sum_l [ (eps/m_i) sum_sigma m(sigma) F log(A(c_new)) + (1 + log c_new)(c_new - c_old)/dt ].
inline GridFunction compute_P(const ModelParams& p, const std::vector<GridFunction>& c_old,
                              const std::vector<GridFunction>& c_new, const std::vector<EdgeFunction>& flux,
                              double dt) {
  const Mesh& mesh = c_new.front().mesh();
  GridFunction transport(mesh, 0.0), P(mesh, 0.0);
  for (std::size_t l = 0; l < c_new.size(); ++l) {
    for (std::size_t i = 0; i < mesh.num_volumes(); ++i)
      if (!(c_new[l][i] > 0.0)) fail(Errc::NonpositiveConcentration, "P needs positive concentrations");
    for (std::size_t e = 0; e < mesh.num_edges(); ++e) {
      const Edge& ed = mesh.edge(e);
      if (!ed.interior()) continue;
      const double ce = harmonic_mean(mesh.volume(ed.i), mesh.volume(ed.j), c_new[l][ed.i], c_new[l][ed.j]);
      const double w = ed.measure * flux[l][e] * std::log(ce);
      transport[ed.i] += w;
      transport[ed.j] -= w;
    }
    for (std::size_t i = 0; i < mesh.num_volumes(); ++i)
      P[i] += (1.0 + std::log(c_new[l][i])) * (c_new[l][i] - c_old[l][i]) / dt;
  }
  for (std::size_t i = 0; i < mesh.num_volumes(); ++i) P[i] += p.eps * transport[i] / mesh.volume(i);
  return P;
}

/// Integrated temperature system
///   m_i (C_T/dt - P_i) T_i + k sum_int tau (T_i - T_j) = m_i (C_T/dt T_old + theta + f).
inline PoissonSystem assemble_temperature(const ModelParams& p, const GridFunction& T_old, const GridFunction& P,
                                          const GridFunction& theta, const GridFunction* heat, double dt) {
  const Mesh& mesh = T_old.mesh();
  const std::size_t n = mesh.num_volumes();
  std::vector<Triplet> trip;
  trip.reserve(n + 4 * mesh.num_edges());
  PoissonSystem sys;
  sys.boundary_rhs = Vector::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double m = mesh.volume(i);
    trip.emplace_back(ii, ii, m * (p.c_t / dt - P[i]));
    sys.boundary_rhs[ii] = m * (p.c_t / dt * T_old[i] + theta[i] + (heat ? (*heat)[i] : 0.0));
  }
  for (const Edge& ed : mesh.edges()) {
    if (!ed.interior()) continue;
    const auto a = static_cast<Eigen::Index>(ed.i), b = static_cast<Eigen::Index>(ed.j);
    const double w = p.k * ed.trans;
    trip.emplace_back(a, a, w);
    trip.emplace_back(b, b, w);
    trip.emplace_back(a, b, -w);
    trip.emplace_back(b, a, -w);
  }
  sys.matrix.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  sys.matrix.setFromTriplets(trip.begin(), trip.end());
  sys.matrix.makeCompressed();
  return sys;
}

/// Linear temperature update with insulated boundary. Requires dt ||P||_inf < C_T.
inline GridFunction solve_temperature(const ModelParams& p, const GridFunction& T_old, const GridFunction& P,
                                      const GridFunction& theta, const GridFunction* heat, double dt,
                                      const LinSolveConfig& lin = {}) {
  if (!(dt * norm_inf(P) < p.c_t))
    fail(Errc::TimestepTooLarge, "time step violates dt * ||P||_inf < C_T");
  const PoissonSystem sys = assemble_temperature(p, T_old, P, theta, heat, dt);
  const Vector x = solve(sys.matrix, sys.boundary_rhs, lin);
  GridFunction T(T_old.mesh(), std::vector<double>(x.data(), x.data() + x.size()));
  if (!T.all_finite() || !(T.min() > 0.0)) fail(Errc::PositivityLost, "temperature update lost positivity");
  return T;
}

/// theta_i = eps sum_l nu^l c^l_i |u^l_i|^2
inline GridFunction dissipation_heat(const ModelParams& p, const std::vector<GridFunction>& c,
                                     const std::vector<VectorGridFunction>& u) {
  const Mesh& mesh = c.front().mesh();
  GridFunction theta(mesh, 0.0);
  for (std::size_t l = 0; l < c.size(); ++l)
    for (std::size_t i = 0; i < mesh.num_volumes(); ++i) {
      const Vec3& v = u[l][i];
      theta[i] += p.eps * p.nu[l] * c[l][i] * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    }
  return theta;
}

/// One first-order step without retries.
inline StepResult step_scheme1_once(const Problem& pb, const State& prev, double dt, const NewtonConfig& cfg) {
  const ModelParams& p = pb.params;
  const Scheme1System sys(pb, prev, dt);
  const NewtonOutcome out = newton_solve(sys, sys.initial_guess(), cfg);
  StepResult res;
  res.state.t = prev.t + dt;
  sys.unpack(out.x, res.state.c, res.state.psi);
  res.report.flux = scheme1_fluxes(p, prev, res.state.c, res.state.psi);
  const std::vector<VectorGridFunction> u = compute_uhat(p, res.state.c, res.state.psi, prev.T);
  const GridFunction P = compute_P(p, prev.c, res.state.c, res.report.flux, dt);
  const GridFunction theta = dissipation_heat(p, res.state.c, u);
  const GridFunction* heat = sys.sources().heat.size() ? &sys.sources().heat : nullptr;
  res.state.T = solve_temperature(p, prev.T, P, theta, heat, dt, cfg.linear);
  res.report.dt = dt;
  res.report.newton_iterations = out.iterations;
  res.report.production = production_first_order(p, res.state.c, u, res.state.T);
  return res;
}

namespace detail {

inline bool retryable(Errc code) {
  return code == Errc::TimestepTooLarge || code == Errc::NewtonDiverged ||
         code == Errc::PositivityLineSearchFailed || code == Errc::SingularMatrix ||
         code == Errc::PositivityLost;
}

/// Joins two consecutive substeps into one report over their combined span.
inline StepReport merge_reports(const StepReport& a, const StepReport& b) {
  StepReport r;
  r.dt = a.dt + b.dt;
  r.production = (a.dt * a.production + b.dt * b.production) / r.dt;
  r.flux = a.flux;
  for (std::size_t l = 0; l < r.flux.size(); ++l)
    for (std::size_t e = 0; e < r.flux[l].size(); ++e)
      r.flux[l][e] = (a.dt * a.flux[l][e] + b.dt * b.flux[l][e]) / r.dt;
  r.newton_iterations = a.newton_iterations + b.newton_iterations;
  r.substeps = a.substeps + b.substeps;
  r.fallback = a.fallback || b.fallback;
  return r;
}

/// Runs `once(state, dt)`; on a recoverable failure the interval is covered by
/// two half steps instead, recursively up to `ctl.max_halvings` levels.
template <class Once>
StepResult advance_with_halving(Once&& once, const State& s, double dt, const StepControl& ctl, int depth = 0) {
  try {
    return once(s, dt);
  } catch (const Error& err) {
    if (!ctl.auto_halving || depth >= ctl.max_halvings || !retryable(err.code())) throw;
  }
  StepResult a = advance_with_halving(once, s, 0.5 * dt, ctl, depth + 1);
  StepResult b = advance_with_halving(once, a.state, 0.5 * dt, ctl, depth + 1);
  b.report = merge_reports(a.report, b.report);
  b.state.t = s.t + dt;
  return b;
}

}  // namespace detail

/// One first-order step of size dt; failed steps are split when allowed by `ctl`.
inline StepResult step_scheme1(const Problem& pb, const State& prev, double dt, const NewtonConfig& cfg,
                               const StepControl& ctl = {}) {
  return detail::advance_with_halving(
      [&](const State& s, double h) { return step_scheme1_once(pb, s, h, cfg); }, prev, dt, ctl);
}

}  // namespace pnpf
