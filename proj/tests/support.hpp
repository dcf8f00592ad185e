#pragma once

// Shared fixtures for the unit suites.

#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>

#include "pnpf/linsys.hpp"
#include "pnpf/mesh.hpp"
#include "pnpf/model.hpp"

namespace pnpf::testing {

template <class Fn>
void expect_error(Errc code, Fn&& fn) {
  try {
    fn();
    ADD_FAILURE() << "expected " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

/// Unit-square problem: Dirichlet x faces at `left` / `right`, zero Neumann y faces.
inline Problem square_problem(const Mesh& mesh, ModelParams p, double left = 0.0, double right = 0.0) {
  Problem pb;
  pb.mesh = &mesh;
  pb.params = std::move(p);
  pb.potential_bc = [&mesh, left, right](double) {
    return BoundaryData::from(mesh, [&](const Edge& e) {
      if (e.kind != EdgeKind::Dirichlet) return 0.0;
      return e.midpoint().x < 0.5 ? left : right;
    });
  };
  return pb;
}

inline State random_state(const Mesh& mesh, std::size_t species, std::mt19937_64& rng, double lo = 0.5,
                          double hi = 1.5) {
  std::uniform_real_distribution<double> d(lo, hi), s(-0.5, 0.5);
  State st = uniform_state(mesh, species, 1.0, 0.0, 1.0);
  for (std::size_t i = 0; i < mesh.num_volumes(); ++i) {
    for (auto& c : st.c) c[i] = d(rng);
    st.psi[i] = s(rng);
    st.T[i] = d(rng);
  }
  return st;
}

/// max |J - J_fd| / max |J| with a central difference of step h (|x_k| + 1).
template <class System>
double fd_jacobian_error(const System& sys, const Vector& x, double h = 1e-6) {
  const Eigen::MatrixXd jac(sys.jacobian(x));
  Eigen::MatrixXd fd(jac.rows(), jac.cols());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double step = h * (std::abs(x[k]) + 1.0);
    Vector xp = x, xm = x;
    xp[k] += step;
    xm[k] -= step;
    fd.col(k) = (sys.residual(xp) - sys.residual(xm)) / (2.0 * step);
  }
  return (jac - fd).cwiseAbs().maxCoeff() / jac.cwiseAbs().maxCoeff();
}

inline double total(const GridFunction& f) { return integral(f); }

}  // namespace pnpf::testing
