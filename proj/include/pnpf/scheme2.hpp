#pragma once

/// @file scheme2.hpp
/// Second-order modified Crank-Nicolson step in log variables.
///
/// Unknowns per volume are (eta^1, ..., eta^M, psi, xi) with eta = log c and
/// xi = log T at the new level; the whole system is solved by one coupled
/// Newton iteration whose Jacobian comes from forward-mode differentiation of
/// the per-volume residual over its five-point stencil.

#include <array>
#include <cmath>
#include <optional>
#include <vector>

#include "pnpf/diagnostics.hpp"
#include "pnpf/dual.hpp"
#include "pnpf/error.hpp"
#include "pnpf/linsys.hpp"
#include "pnpf/mesh.hpp"
#include "pnpf/model.hpp"
#include "pnpf/newton.hpp"
#include "pnpf/operators.hpp"
#include "pnpf/scheme1.hpp"

namespace pnpf {

/// Q = eta_new - (c_new - c_old)/(2 c_new) - (c_new - c_old)^2 / (6 c_new^2) with c = e^eta.
template <class T>
T cn_q(const T& eta_new, double eta_old) {
  using std::exp;
  const T c = exp(eta_new);
  const T dc = c - std::exp(eta_old);
  return eta_new - dc / (2.0 * c) - dc * dc / (6.0 * c * c);
}

/// R = e^{-xi_new} + (T_new - T_old)/(2 T_new^2) + (T_new - T_old)^2/(3 T_new^3) with T = e^xi.
template <class T>
T cn_r(const T& xi_new, double xi_old) {
  using std::exp;
  const T t = exp(xi_new);
  const T s = (t - std::exp(xi_old)) / t;
  return (1.0 + 0.5 * s + s * s / 3.0) / t;
}

inline GridFunction compute_Q(const GridFunction& eta_old, const GridFunction& eta_new) {
  GridFunction q(eta_new.mesh(), 0.0);
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = cn_q(eta_new[i], eta_old[i]);
  return q;
}

inline GridFunction compute_R(const GridFunction& xi_old, const GridFunction& xi_new) {
  GridFunction r(xi_new.mesh(), 0.0);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = cn_r(xi_new[i], xi_old[i]);
  return r;
}

namespace detail {

inline constexpr std::size_t kMaxSpecies = 7;

/// Midpoint quantities of one volume.
template <class T>
struct CnVars {
  std::array<T, kMaxSpecies> c;  ///< e^{eta_new}
  std::array<T, kMaxSpecies> a;  ///< e^{(eta_old + eta_new)/2}
  std::array<T, kMaxSpecies> q;  ///< Q
  T psi;                         ///< psi_new
  T psi_half;                    ///< (psi_old + psi_new)/2
  T b;                           ///< e^{(xi_old + xi_new)/2}
  T temp;                        ///< e^{xi_new}
  T r;                           ///< R
  T log_r;
};

template <class T>
struct CnExtras {
  std::array<std::array<T, 2>, kMaxSpecies> u;  ///< vertex velocity per species
};

}  // namespace detail

/// Nonlinear system of one modified Crank-Nicolson step.
class Scheme2System {
 public:
  Scheme2System(const Problem& pb, const State& prev, double dt)
      : pb_(pb),
        mesh_(prev.mesh()),
        prev_(prev),
        dt_(dt),
        m_(pb.params.species()),
        bc_(pb.potential_bc(prev.t + dt)) {
    if (m_ > detail::kMaxSpecies) fail(Errc::ConfigError, "too many species for the second-order scheme");
    const std::size_t n = mesh_.num_volumes();
    eta_old_.assign(n * m_, 0.0);
    xi_old_.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t l = 0; l < m_; ++l) eta_old_[i * m_ + l] = std::log(prev.c[l][i]);
      xi_old_[i] = std::log(prev.T[i]);
    }
    if (pb.sources) {
      src_half_ = pb.sources(prev.t + 0.5 * dt);
      src_new_ = pb.sources(prev.t + dt);
    }
    charge_.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      charge_[i] = pb.fixed_charge(i) + (src_new_.charge.size() ? src_new_.charge[i] : 0.0);
  }

  std::size_t block() const noexcept { return m_ + 2; }
  std::size_t size() const noexcept { return block() * mesh_.num_volumes(); }
  std::size_t dof(std::size_t i, std::size_t v) const noexcept { return i * block() + v; }

  /// Log-variable vector of a state.
  Vector pack(const State& s) const {
    Vector x(static_cast<Eigen::Index>(size()));
    for (std::size_t i = 0; i < mesh_.num_volumes(); ++i) {
      for (std::size_t l = 0; l < m_; ++l) x[idx(i, l)] = std::log(s.c[l][i]);
      x[idx(i, m_)] = s.psi[i];
      x[idx(i, m_ + 1)] = std::log(s.T[i]);
    }
    return x;
  }

  State unpack(const Vector& x) const {
    State s;
    s.t = prev_.t + dt_;
    s.c.assign(m_, GridFunction(mesh_, 0.0));
    s.psi = GridFunction(mesh_, 0.0);
    s.T = GridFunction(mesh_, 0.0);
    for (std::size_t i = 0; i < mesh_.num_volumes(); ++i) {
      for (std::size_t l = 0; l < m_; ++l) s.c[l][i] = std::exp(x[idx(i, l)]);
      s.psi[i] = x[idx(i, m_)];
      s.T[i] = std::exp(x[idx(i, m_ + 1)]);
    }
    return s;
  }

  /// Previous level, or the linear extrapolation from `older` when given.
  Vector initial_guess(const State* older = nullptr) const {
    Vector x = pack(prev_);
    if (older != nullptr) {
      const double span = prev_.t - older->t;
      if (span > 0.0) x += (dt_ / span) * (x - pack(*older));
    }
    return x;
  }

  bool admissible(const Vector& x) const { return x.allFinite(); }

  Vector residual(const Vector& x) const {
    const std::vector<detail::CnVars<double>> vars = all_vars(x);
    Vector r(static_cast<Eigen::Index>(size()));
    std::array<double, detail::kMaxSpecies + 2> out{};
    for (std::size_t i = 0; i < mesh_.num_volumes(); ++i) {
      cell_residual<double>(i, [&](std::size_t k) -> const detail::CnVars<double>& { return vars[k]; },
                            out.data(), nullptr);
      for (std::size_t v = 0; v < block(); ++v) r[idx(i, v)] = out[v];
    }
    return r;
  }

  SparseMatrix jacobian(const Vector& x) const {
    const std::size_t n = mesh_.num_volumes(), nb = block();
    std::vector<Triplet> trip;
    trip.reserve(n * nb * nb * 5);
    std::vector<std::size_t> stencil;
    std::vector<detail::CnVars<Dual>> local;
    std::array<Dual, detail::kMaxSpecies + 2> out;
    for (std::size_t i = 0; i < n; ++i) {
      stencil.assign(1, i);
      for (std::size_t e : mesh_.cell_edges(i)) {
        const std::size_t j = mesh_.neighbor(e, i);
        if (j != npos) stencil.push_back(j);
      }
      const int active = static_cast<int>(stencil.size() * nb);
      if (active > Dual::capacity) fail(Errc::ConfigError, "stencil too large for the dual-number capacity");
      local.clear();
      for (std::size_t p = 0; p < stencil.size(); ++p) {
        const std::size_t k = stencil[p];
        local.push_back(derive<Dual>(k, [&](std::size_t v) {
          return Dual::variable(x[idx(k, v)], static_cast<int>(p * nb + v), active);
        }));
      }
      cell_residual<Dual>(
          i,
          [&](std::size_t k) -> const detail::CnVars<Dual>& {
            for (std::size_t p = 0; p < stencil.size(); ++p)
              if (stencil[p] == k) return local[p];
            fail(Errc::MeshMismatch, "volume outside the residual stencil");
          },
          out.data(), nullptr);
      for (std::size_t rv = 0; rv < nb; ++rv)
        for (std::size_t p = 0; p < stencil.size(); ++p)
          for (std::size_t v = 0; v < nb; ++v)
            trip.emplace_back(idx(i, rv), idx(stencil[p], v),
                              out[rv].derivative(static_cast<int>(p * nb + v)));
    }
    SparseMatrix jac(static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(size()));
    jac.setFromTriplets(trip.begin(), trip.end());
    jac.makeCompressed();
    return jac;
  }

  /// Edge fluxes F per species at the solution x.
  std::vector<EdgeFunction> fluxes(const Vector& x) const {
    const std::vector<detail::CnVars<double>> vars = all_vars(x);
    std::vector<EdgeFunction> flux(m_, EdgeFunction(mesh_, 0.0));
    for (std::size_t e = 0; e < mesh_.num_edges(); ++e) {
      const Edge& ed = mesh_.edge(e);
      if (!ed.interior()) continue;
      for (std::size_t l = 0; l < m_; ++l)
        flux[l][e] = edge_mass_flux<double>(e, l, ed.i, vars[ed.i], vars[ed.j]) / ed.measure;
    }
    return flux;
  }

  /// Entropy-production bound eps sum <nu a |u|^2, R> + k [A(b) grad log R, grad R] at x.
  double production(const Vector& x) const {
    const std::vector<detail::CnVars<double>> vars = all_vars(x);
    const std::size_t n = mesh_.num_volumes();
    std::vector<GridFunction> a(m_, GridFunction(mesh_, 0.0));
    std::vector<VectorGridFunction> u(m_, VectorGridFunction(mesh_));
    GridFunction r(mesh_, 0.0), b(mesh_, 0.0);
    std::array<double, detail::kMaxSpecies + 2> out{};
    detail::CnExtras<double> extras;
    for (std::size_t i = 0; i < n; ++i) {
      cell_residual<double>(i, [&](std::size_t k) -> const detail::CnVars<double>& { return vars[k]; },
                            out.data(), &extras);
      for (std::size_t l = 0; l < m_; ++l) {
        a[l][i] = vars[i].a[l];
        u[l][i] = Vec3{extras.u[l][0], extras.u[l][1], 0.0};
      }
      r[i] = vars[i].r;
      b[i] = vars[i].b;
    }
    return production_second_order(pb_.params, a, u, r, b);
  }

 private:
  Eigen::Index idx(std::size_t i, std::size_t v) const noexcept { return static_cast<Eigen::Index>(dof(i, v)); }

  template <class T, class Get>
  detail::CnVars<T> derive(std::size_t k, Get&& get) const {
    using std::exp;
    using std::log;
    detail::CnVars<T> cv;
    for (std::size_t l = 0; l < m_; ++l) {
      const T eta = get(l);
      const double eta_old = eta_old_[k * m_ + l];
      cv.c[l] = exp(eta);
      cv.a[l] = exp(0.5 * (eta + eta_old));
      cv.q[l] = cn_q(eta, eta_old);
    }
    cv.psi = get(m_);
    cv.psi_half = 0.5 * (cv.psi + prev_.psi[k]);
    const T xi = get(m_ + 1);
    cv.temp = exp(xi);
    cv.b = exp(0.5 * (xi + xi_old_[k]));
    cv.r = cn_r(xi, xi_old_[k]);
    cv.log_r = log(cv.r);
    return cv;
  }

  std::vector<detail::CnVars<double>> all_vars(const Vector& x) const {
    std::vector<detail::CnVars<double>> vars;
    vars.reserve(mesh_.num_volumes());
    for (std::size_t k = 0; k < mesh_.num_volumes(); ++k)
      vars.push_back(derive<double>(k, [&](std::size_t v) { return x[idx(k, v)]; }));
    return vars;
  }

  /// m(sigma) F of species l across interior edge e, seen from volume `from`.
  template <class T>
  T edge_mass_flux(std::size_t e, std::size_t l, std::size_t from, const detail::CnVars<T>& vi,
                   const detail::CnVars<T>& vj) const {
    const Edge& ed = mesh_.edge(e);
    const std::size_t to = mesh_.neighbor(e, from);
    const double mi = mesh_.volume(from), mj = mesh_.volume(to);
    const ModelParams& p = pb_.params;
    const T w_q = harmonic_mean(mi, mj, T(vi.a[l] * vi.b), T(vj.a[l] * vj.b));
    const T w_d = harmonic_mean(mi, mj, vi.a[l], vj.a[l]);
    const T drive = p.z[l] * (vj.psi_half - vi.psi_half) + (vj.b - vi.b);
    return -(ed.trans / p.nu[l]) * (w_q * (vj.q[l] - vi.q[l]) + w_d * drive);
  }

  /// Residual of the M mass balances, the Poisson equation and the temperature
  /// balance of volume i, all in rate form.
  template <class T, class Get>
  void cell_residual(std::size_t i, Get&& vars, T* out, detail::CnExtras<T>* extras) const {
    const ModelParams& p = pb_.params;
    const double mi = mesh_.volume(i);
    const double e2 = p.eps * p.eps;
    const detail::CnVars<T>& vi = vars(i);

    std::array<T, detail::kMaxSpecies> transport;
    std::array<std::array<T, 2>, detail::kMaxSpecies> grad_q, grad_d;
    for (std::size_t l = 0; l < m_; ++l) {
      transport[l] = T(0.0);
      grad_q[l] = {T(0.0), T(0.0)};
      grad_d[l] = {T(0.0), T(0.0)};
      const double f = src_half_.mass.empty() ? 0.0 : src_half_.mass[l][i];
      out[l] = (vi.c[l] - prev_.c[l][i]) / dt_ - f;
    }
    T charge(0.0);
    for (std::size_t l = 0; l < m_; ++l) charge += p.z[l] * vi.c[l];
    T poisson = -charge - charge_[i];
    T conduction(0.0);

    for (std::size_t e : mesh_.cell_edges(i)) {
      const Edge& ed = mesh_.edge(e);
      const Vec3 n = mesh_.normal(e, i);
      if (!ed.interior()) {
        if (ed.kind == EdgeKind::Dirichlet)
          poisson += e2 * ed.trans * (vi.psi - bc_.value(e)) / mi;
        else
          poisson -= e2 * ed.measure * bc_.value(e) / mi;
        for (std::size_t l = 0; l < m_; ++l) {
          const T wd = p.z[l] * vi.psi_half + vi.b;
          for (int k = 0; k < 2; ++k) {
            grad_q[l][k] += ed.measure * n[k] * vi.q[l];
            grad_d[l][k] += ed.measure * n[k] * wd;
          }
        }
        continue;
      }
      const std::size_t j = mesh_.neighbor(e, i);
      const detail::CnVars<T>& vj = vars(j);
      const double mj = mesh_.volume(j);
      for (std::size_t l = 0; l < m_; ++l) {
        const T mf = edge_mass_flux<T>(e, l, i, vi, vj);
        out[l] += p.eps * mf / mi;
        const T q_edge = 0.5 * (vi.q[l] + vj.q[l]);
        transport[l] += mf * q_edge;
        const T d_edge = 0.5 * (p.z[l] * (vi.psi_half + vj.psi_half) + (vi.b + vj.b));
        for (int k = 0; k < 2; ++k) {
          grad_q[l][k] += ed.measure * n[k] * q_edge;
          grad_d[l][k] += ed.measure * n[k] * d_edge;
        }
      }
      poisson += e2 * ed.trans * (vi.psi - vj.psi) / mi;
      conduction += ed.trans * harmonic_mean(mi, mj, vi.b, vj.b) * (vj.log_r - vi.log_r);
    }

    T prod(0.0), theta(0.0);
    for (std::size_t l = 0; l < m_; ++l) {
      prod += p.eps * transport[l] / mi + (1.0 + vi.q[l]) * (vi.c[l] - prev_.c[l][i]) / dt_;
      std::array<T, 2> u;
      for (int k = 0; k < 2; ++k) u[k] = -(vi.b * grad_q[l][k] + grad_d[l][k]) / (p.nu[l] * mi);
      theta += p.eps * p.nu[l] * vi.a[l] * (u[0] * u[0] + u[1] * u[1]);
      if (extras != nullptr) extras->u[l] = u;
    }
    out[m_] = poisson;
    const double heat = src_half_.heat.size() ? src_half_.heat[i] : 0.0;
    // per unit heat capacity, so the roundoff floor of the row does not grow with C_T
    out[m_ + 1] = (vi.temp - prev_.T[i]) / dt_ + (p.k * conduction / mi - prod / vi.r - theta - heat) / p.c_t;
  }

  const Problem& pb_;
  const Mesh& mesh_;
  const State& prev_;
  double dt_;
  std::size_t m_;
  BoundaryData bc_;
  SourceValues src_half_;
  SourceValues src_new_;
  std::vector<double> eta_old_;
  std::vector<double> xi_old_;
  std::vector<double> charge_;
};

/// Newton solve of one modified Crank-Nicolson step. `older` (the level before
/// `prev`) enables the extrapolated initial guess.
inline StepResult step_scheme2_once(const Problem& pb, const State& prev, double dt, const NewtonConfig& cfg,
                                    const State* older = nullptr) {
  const Scheme2System sys(pb, prev, dt);
  const NewtonOutcome out = newton_solve(sys, sys.initial_guess(older), cfg);
  StepResult res;
  res.state = sys.unpack(out.x);
  res.report.dt = dt;
  res.report.newton_iterations = out.iterations;
  res.report.flux = sys.fluxes(out.x);
  res.report.production = sys.production(out.x);
  return res;
}

/// Second-order stepper. Keeps the previous level for the extrapolated Newton
/// guess; when Newton fails the step is covered by two first-order half steps
/// and the report is flagged.
class Scheme2Stepper {
 public:
  Scheme2Stepper(const Problem& pb, NewtonConfig cfg, StepControl ctl = {})
      : pb_(pb), cfg_(std::move(cfg)), ctl_(ctl) {}

  StepResult step(const State& s, double dt) {
    const State* older = (older_ && older_->t < s.t) ? &*older_ : nullptr;
    StepResult res;
    try {
      res = step_scheme2_once(pb_, s, dt, cfg_, older);
    } catch (const Error& err) {
      if (!detail::retryable(err.code())) throw;
      res = fallback(s, dt);
      res.report.fallback = true;
    }
    older_ = s;
    return res;
  }

  void reset() { older_.reset(); }

 private:
  StepResult fallback(const State& s, double dt) const {
    StepResult a = step_scheme1(pb_, s, 0.5 * dt, cfg_, ctl_);
    StepResult b = step_scheme1(pb_, a.state, 0.5 * dt, cfg_, ctl_);
    b.report = detail::merge_reports(a.report, b.report);
    b.state.t = s.t + dt;
    return b;
  }

  const Problem& pb_;
  NewtonConfig cfg_;
  StepControl ctl_;
  std::optional<State> older_;
};

}  // namespace pnpf
