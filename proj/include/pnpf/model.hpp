#pragma once

/// @file model.hpp
/// Model parameters, solver state and the time-dependent problem description
/// shared by both time integrators.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "pnpf/error.hpp"
#include "pnpf/linsys.hpp"
#include "pnpf/mesh.hpp"
#include "pnpf/operators.hpp"

namespace pnpf {

/// Dimensionless coefficients of the PNPF system.
struct ModelParams {
  std::vector<int> z{1, -1};         ///< valences
  std::vector<double> nu{1.0, 1.0};  ///< viscosities
  double eps = 1.0;                  ///< Debye length over macroscopic length
  double k = 1.0;                    ///< thermal conductivity
  double c_t = 1.0;                  ///< heat capacity
  std::vector<double> fixed_charge;  ///< per volume; empty means zero

  std::size_t species() const noexcept { return z.size(); }

  void validate() const {
    if (z.empty()) fail(Errc::ConfigError, "at least one ionic species is required");
    if (nu.size() != z.size()) fail(Errc::ConfigError, "valence and viscosity lists differ in length");
    for (double v : nu)
      if (!(v > 0.0)) fail(Errc::NonpositiveConstant, "viscosities must be positive");
    if (!(eps > 0.0)) fail(Errc::NonpositiveConstant, "eps must be positive");
    if (!(k > 0.0)) fail(Errc::NonpositiveConstant, "thermal conductivity must be positive");
    if (!(c_t > 0.0)) fail(Errc::NonpositiveConstant, "heat capacity must be positive");
  }
};

/// Full solution at one time level.
struct State {
  double t = 0.0;
  std::vector<GridFunction> c;
  GridFunction psi;
  GridFunction T;

  const Mesh& mesh() const { return T.mesh(); }

  /// Throws NonpositiveState unless every concentration and temperature is
  /// positive and every entry finite.
  void validate() const {
    for (std::size_t l = 0; l < c.size(); ++l) {
      if (!c[l].all_finite() || !(c[l].min() > 0.0))
        fail(Errc::NonpositiveState, "species " + std::to_string(l + 1) + " is not positive");
    }
    if (!T.all_finite() || !(T.min() > 0.0)) fail(Errc::NonpositiveState, "temperature is not positive");
    if (!psi.all_finite()) fail(Errc::NonpositiveState, "potential is not finite");
  }
};

/// Uniform state: every species at c0, potential psi0, temperature T0.
inline State uniform_state(const Mesh& mesh, std::size_t species, double c0, double psi0, double T0,
                           double t = 0.0) {
  State s;
  s.t = t;
  s.c.assign(species, GridFunction(mesh, c0));
  s.psi = GridFunction(mesh, psi0);
  s.T = GridFunction(mesh, T0);
  return s;
}

/// Volume sources of the forced system (used by manufactured solutions).
struct SourceValues {
  std::vector<GridFunction> mass;  ///< one per species
  GridFunction heat;
  GridFunction charge;  ///< added to the model's fixed charge
};

/// Everything a time step needs besides the state.
struct Problem {
  const Mesh* mesh = nullptr;
  ModelParams params;
  /// Potential boundary data at time t.
  std::function<BoundaryData(double)> potential_bc;
  /// Optional volume sources at time t.
  std::function<SourceValues(double)> sources;

  double fixed_charge(std::size_t i) const {
    return params.fixed_charge.empty() ? 0.0 : params.fixed_charge[i];
  }
};

struct NewtonConfig {
  double tol = 1e-10;        ///< infinity norm of the nonlinear residual
  double step_tol = 1e-9;    ///< infinity norm of the final Newton update
  int max_iterations = 50;
  int max_halvings = 30;
  LinSolveConfig linear;

  void validate() const {
    if (!(tol > 0.0) || !(step_tol > 0.0)) fail(Errc::ConfigError, "Newton tolerances must be positive");
    if (max_iterations < 1 || max_halvings < 0) fail(Errc::ConfigError, "invalid Newton iteration caps");
    linear.validate();
  }
};

/// Time-step control shared by both schemes.
struct StepControl {
  bool auto_halving = true;  ///< retry a failed step as two half steps
  int max_halvings = 10;
};

/// Per-step outputs used by diagnostics.
struct StepReport {
  double dt = 0.0;
  double production = 0.0;  ///< entropy-production lower bound R over the step (time weighted)
  std::vector<EdgeFunction> flux;  ///< per-species normal flux F over the step (time weighted)
  int newton_iterations = 0;
  int substeps = 1;         ///< 1 unless the step had to be split
  bool fallback = false;    ///< second-order step replaced by first-order substeps
};

}  // namespace pnpf
