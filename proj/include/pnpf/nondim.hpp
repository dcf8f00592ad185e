#pragma once

/// @file nondim.hpp
/// Conversion of dimensional electrolyte data to the dimensionless model.
///
/// Lengths are scaled by L, time by tau = lambda_D L nu0 / (kB T0),
/// temperature by T0, potential by kB T0 / e and concentrations by c0.

#include <cmath>
#include <vector>

#include "pnpf/error.hpp"
#include "pnpf/model.hpp"

namespace pnpf {

namespace constants {
inline constexpr double boltzmann = 1.380649e-23;         // J/K
inline constexpr double elementary_charge = 1.602176634e-19;  // C
inline constexpr double avogadro = 6.02214076e23;          // 1/mol
}  // namespace constants

/// Dimensional inputs in SI units, except concentrations in mol/L.
struct PhysicalBlock {
  double T0 = 300.0;            ///< reference temperature, K
  double c0 = 0.2;              ///< reference concentration, mol/L
  double L = 1e-8;              ///< macroscopic length, m
  double eps0 = 8.85e-12;       ///< vacuum permittivity, F/m
  double eps_r = 80.0;          ///< relative permittivity
  double nu0 = 4.14e-10;        ///< reference viscosity, J s / m^2
  std::vector<double> nu{4.14e-10, 4.14e-10};  ///< per-species viscosity, J s / m^2
  double k = 1.2e-4;            ///< thermal conductivity, J/(K m s)
  double C = 38.8;              ///< heat capacity, mol/L
};

/// Characteristic scales used to present dimensionless output.
struct Scales {
  double lambda_d = 0.0;  ///< Debye length, m
  double tau = 0.0;       ///< time, s
  double current = 0.0;   ///< kB T0 c0 / (nu0 L), A per unit area in number units
  double entropy = 0.0;   ///< kB c0 L^2
};

struct Nondimensional {
  double eps = 0.0;
  double k = 0.0;
  double c_t = 0.0;
  std::vector<double> nu;
  Scales scales;
};

/// Number density in 1/m^3 of a concentration in mol/L.
inline double number_density(double molar) { return molar * 1e3 * constants::avogadro; }

inline Nondimensional nondimensionalize(const PhysicalBlock& p) {
  const double scalars[] = {p.T0, p.c0, p.L, p.eps0, p.eps_r, p.nu0, p.k, p.C};
  for (double v : scalars)
    if (!(v > 0.0)) fail(Errc::NonpositiveConstant, "physical constants must be positive");
  if (p.nu.empty()) fail(Errc::ConfigError, "at least one species viscosity is required");
  for (double v : p.nu)
    if (!(v > 0.0)) fail(Errc::NonpositiveConstant, "physical viscosities must be positive");

  const double kt = constants::boltzmann * p.T0;
  const double n0 = number_density(p.c0);
  const double e = constants::elementary_charge;

  Nondimensional out;
  Scales& s = out.scales;
  s.lambda_d = std::sqrt(p.eps0 * p.eps_r * kt / (e * e * n0));
  s.tau = s.lambda_d * p.L * p.nu0 / kt;
  s.current = kt * n0 / (p.nu0 * p.L);
  s.entropy = constants::boltzmann * n0 * p.L * p.L;

  out.eps = s.lambda_d / p.L;
  out.k = s.tau * p.k / (constants::boltzmann * n0 * p.L * p.L);
  out.c_t = p.C / p.c0;
  for (double v : p.nu) out.nu.push_back(v / p.nu0);
  return out;
}

/// Writes the converted coefficients into `model`; valences are left alone.
inline void apply(const Nondimensional& nd, ModelParams& model) {
  model.eps = nd.eps;
  model.k = nd.k;
  model.c_t = nd.c_t;
  model.nu = nd.nu;
}

}  // namespace pnpf
