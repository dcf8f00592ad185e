#pragma once

/// @file newton.hpp
/// Damped Newton iteration shared by both time integrators.
///
/// A system type provides
///   Vector residual(const Vector&) const;
///   SparseMatrix jacobian(const Vector&) const;
///   bool admissible(const Vector&) const;

#include <limits>
#include <string>
#include <utility>

#include "pnpf/error.hpp"
#include "pnpf/linsys.hpp"
#include "pnpf/model.hpp"

namespace pnpf {

struct NewtonOutcome {
  Vector x;
  int iterations = 0;
  double residual = 0.0;
};

/// Iterates from `x` until ||r||_inf <= tol and the last update satisfies
/// ||dx||_inf <= step_tol. A trial step is halved while the iterate is not
/// admissible or does not reduce the residual.
template <class System>
NewtonOutcome newton_solve(const System& sys, Vector x, const NewtonConfig& cfg) {
  Vector r = sys.residual(x);
  if (!r.allFinite()) fail(Errc::NewtonDiverged, "residual at the initial guess is not finite");
  double rn = r.lpNorm<Eigen::Infinity>();
  double last_step = std::numeric_limits<double>::infinity();
  DirectSolver lu;
  for (int it = 0;; ++it) {
    if (rn <= cfg.tol && (it == 0 || last_step <= cfg.step_tol)) return {std::move(x), it, rn};
    if (it == cfg.max_iterations)
      fail(Errc::NewtonDiverged, "Newton stopped after " + std::to_string(it) +
                                     " iterations with residual " + std::to_string(rn));
    const SparseMatrix jac = sys.jacobian(x);
    Vector delta;
    if (cfg.linear.method == LinMethod::Direct) {
      lu.factorize(jac);
      delta = lu.solve(-r, cfg.linear.tol);
    } else {
      delta = solve(jac, -r, cfg.linear);
    }
    // Halve while the iterate is inadmissible or the residual is not finite.
    // Admissible steps that fail to reduce the residual are halved as well;
    // if none does, the admissible trial with the smallest residual is taken.
    double alpha = 1.0, best_alpha = 0.0, best_norm = std::numeric_limits<double>::infinity();
    Vector trial, rt, best_x, best_r;
    for (int halvings = 0;; ++halvings) {
      trial = x + alpha * delta;
      if (sys.admissible(trial)) {
        rt = sys.residual(trial);
        if (rt.allFinite()) {
          const double tn = rt.lpNorm<Eigen::Infinity>();
          if (tn < rn || tn <= cfg.tol) break;
          if (tn < best_norm) {
            best_norm = tn;
            best_alpha = alpha;
            best_x = trial;
            best_r = rt;
          }
        }
      }
      if (halvings == cfg.max_halvings) {
        if (best_alpha == 0.0) fail(Errc::PositivityLineSearchFailed, "no admissible damped Newton step");
        alpha = best_alpha;
        trial = std::move(best_x);
        rt = std::move(best_r);
        break;
      }
      alpha *= 0.5;
    }
    x = std::move(trial);
    r = std::move(rt);
    rn = r.lpNorm<Eigen::Infinity>();
    last_step = alpha * delta.lpNorm<Eigen::Infinity>();
  }
}

}  // namespace pnpf
