#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include "pnpf/linsys.hpp"
#include "pnpf/mesh.hpp"

using namespace pnpf;

namespace {

BoundaryData x_faces(const Mesh& m, double left, double right) {
  return BoundaryData::from(m, [=](const Edge& e) {
    if (e.kind != EdgeKind::Dirichlet) return 0.0;
    return e.midpoint().x < 0.5 ? left : right;
  });
}

}  // namespace

TEST(Poisson, TwoCellsInterpolateLinearly) {
  // Hand solve: boundary transmissibility 4, interior 2.
  //   6 psi1 - 2 psi2 = 0,  -2 psi1 + 6 psi2 = 4  ->  psi = (1/4, 3/4)
  const Mesh m = build_uniform_grid(GeometrySpec::unit_square(2, 1));
  const PoissonSystem sys = assemble_poisson(m, 1.0, x_faces(m, 0.0, 1.0));
  Eigen::MatrixXd dense(sys.matrix);
  EXPECT_DOUBLE_EQ(dense(0, 0), 6.0);
  EXPECT_DOUBLE_EQ(dense(0, 1), -2.0);
  EXPECT_DOUBLE_EQ(sys.boundary_rhs[1], 4.0);
  const GridFunction psi = solve_poisson(m, 1.0, x_faces(m, 0.0, 1.0), GridFunction(m, 0.0));
  EXPECT_NEAR(psi[0], 0.25, 1e-14);
  EXPECT_NEAR(psi[1], 0.75, 1e-14);
}

TEST(Poisson, ConstantDataGivesConstantSolution) {
  GeometrySpec g = GeometrySpec::electrode_comb(16, 8);
  g.comb.teeth = 1;
  const Mesh m = build_electrode_domain(g);
  const BoundaryData bc = BoundaryData::from(m, [](const Edge& e) {
    return e.kind == EdgeKind::Dirichlet ? 0.7 : 0.0;
  });
  const GridFunction psi = solve_poisson(m, 0.3, bc, GridFunction(m, 0.0));
  for (double v : psi.values()) EXPECT_NEAR(v, 0.7, 1e-12);
}

TEST(Poisson, ZeroDataGivesZero) {
  const Mesh m = build_uniform_grid(GeometrySpec::unit_square(6, 4));
  const GridFunction psi = solve_poisson(m, 1.0, x_faces(m, 0.0, 0.0), GridFunction(m, 0.0));
  for (double v : psi.values()) EXPECT_EQ(v, 0.0);
}

TEST(Poisson, NetChargeIsSolvableWithDirichlet) {
  const Mesh m = build_uniform_grid(GeometrySpec::unit_square(8, 8));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  GridFunction rho(m, 0.0);
  for (std::size_t i = 0; i < m.num_volumes(); ++i) rho[i] = d(rng);
  ASSERT_GT(integral(rho), 0.0);
  const BoundaryData bc = x_faces(m, 0.0, 0.0);
  const GridFunction psi = solve_poisson(m, 0.5, bc, rho);
  // -eps^2 Delta_h psi = rho, checked with the operator module
  const GridFunction lap = laplacian(psi, bc);
  for (std::size_t i = 0; i < m.num_volumes(); ++i) EXPECT_NEAR(-0.25 * lap[i], rho[i], 1e-11);
}

TEST(Poisson, NeumannDatumEntersAsSurfaceCharge) {
  // psi = x + y on the unit square: Dirichlet on x faces, outward normal
  // derivative +-1 on the y faces; the discrete solution is exact.
  const Mesh m = build_uniform_grid(GeometrySpec::unit_square(5, 5));
  const BoundaryData bc = BoundaryData::from(m, [](const Edge& e) {
    const Point p = e.midpoint();
    if (e.kind == EdgeKind::Dirichlet) return p.x + p.y;
    return e.normal[1];
  });
  const GridFunction psi = solve_poisson(m, 1.0, bc, GridFunction(m, 0.0));
  for (std::size_t i = 0; i < m.num_volumes(); ++i)
    EXPECT_NEAR(psi[i], m.center(i).x + m.center(i).y, 1e-13);
}

TEST(Poisson, AllNeumannIsRejected) {
  GeometrySpec g = GeometrySpec::unit_square(3, 3);
  g.faces = PotentialFaces::AllNeumann;
  const Mesh m = build_uniform_grid(g);
  try {
    assemble_poisson(m, 1.0, BoundaryData::from(m, [](const Edge&) { return 0.0; }));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::AllNeumann);
  }
}

TEST(Poisson, MatrixIsSymmetricPositiveDefinite) {
  GeometrySpec g = GeometrySpec::electrode_comb(32, 16);
  const Mesh m = build_electrode_domain(g);
  const PoissonSystem sys = assemble_poisson(m, 0.1, BoundaryData::from(m, [](const Edge&) { return 0.0; }));
  const SparseMatrix t = sys.matrix.transpose();
  EXPECT_LE((sys.matrix - t).norm(), 1e-14 * sys.matrix.norm());
  Eigen::SimplicialLLT<SparseMatrix> llt(sys.matrix);
  EXPECT_EQ(llt.info(), Eigen::Success);
}

TEST(Solve, IdentityReturnsRightSide) {
  SparseMatrix id(5, 5);
  id.setIdentity();
  Vector b(5);
  b << 1, -2, 3, 0.5, 7;
  for (LinMethod method : {LinMethod::Direct, LinMethod::ConjugateGradient, LinMethod::BiCGSTAB}) {
    LinSolveConfig cfg;
    cfg.method = method;
    EXPECT_LE((solve(id, b, cfg) - b).norm(), 1e-14);
  }
}

TEST(Solve, ManufacturedPotentialIsRecovered) {
  const Mesh m = build_uniform_grid(GeometrySpec::unit_square(16, 16));
  const PoissonSystem sys = assemble_poisson(m, 1.0, x_faces(m, 0.0, 0.0));
  Vector psi(static_cast<Eigen::Index>(m.num_volumes()));
  for (std::size_t i = 0; i < m.num_volumes(); ++i)
    psi[static_cast<Eigen::Index>(i)] = std::sin(3.0 * m.center(i).x) + m.center(i).y * m.center(i).y;
  const Vector b = sys.matrix * psi;
  for (LinMethod method : {LinMethod::Direct, LinMethod::ConjugateGradient, LinMethod::BiCGSTAB}) {
    LinSolveConfig cfg;
    cfg.method = method;
    const Vector x = solve(sys.matrix, b, cfg);
    EXPECT_LE(relative_residual(sys.matrix, x, b), 1e-12);
    EXPECT_LE((x - psi).lpNorm<Eigen::Infinity>(), 1e-8);
  }
}

TEST(Solve, ZeroRightSide) {
  const Mesh m = build_uniform_grid(GeometrySpec::unit_square(4, 4));
  const PoissonSystem sys = assemble_poisson(m, 1.0, x_faces(m, 0.0, 0.0));
  EXPECT_EQ(solve(sys.matrix, Vector::Zero(16)).norm(), 0.0);
}

TEST(Solve, SingularMatrixIsReported) {
  SparseMatrix z(3, 3);
  z.insert(0, 0) = 1.0;
  z.makeCompressed();
  try {
    solve(z, Vector::Ones(3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_TRUE(e.code() == Errc::SingularMatrix || e.code() == Errc::NotConverged) << e.what();
  }
}

TEST(Solve, DirectSolverReusesPatternAfterTemporaryGoesAway) {
  DirectSolver lu;
  Vector b = Vector::Ones(4);
  for (double s : {1.0, 2.0}) {
    {
      SparseMatrix a(4, 4);
      for (int k = 0; k < 4; ++k) a.insert(k, k) = s * (k + 1);
      a.makeCompressed();
      lu.factorize(a);
    }
    const Vector x = lu.solve(b, 1e-14);
    for (int k = 0; k < 4; ++k) EXPECT_NEAR(x[k], 1.0 / (s * (k + 1)), 1e-15);
    EXPECT_LE(lu.last_residual(), 1e-14);
  }
}
