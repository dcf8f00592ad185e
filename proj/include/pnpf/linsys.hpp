#pragma once

/// @file linsys.hpp
/// Sparse linear algebra: Poisson assembly and linear solves on top of Eigen.

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <cmath>
#include <string>
#include <vector>

#include "pnpf/error.hpp"
#include "pnpf/mesh.hpp"
#include "pnpf/operators.hpp"

namespace pnpf {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;
using Triplet = Eigen::Triplet<double>;

enum class LinMethod { Direct, ConjugateGradient, BiCGSTAB };

struct LinSolveConfig {
  LinMethod method = LinMethod::Direct;
  double tol = 1e-12;         ///< relative residual ||Ax-b|| / ||b||
  int max_iterations = 0;     ///< 0 selects 10 * dimension

  void validate() const {
    if (!(tol > 0.0 && tol < 1.0)) fail(Errc::ConfigError, "linear tolerance must lie in (0,1)");
    if (max_iterations < 0) fail(Errc::ConfigError, "linear iteration cap must be positive");
  }
};

struct PoissonSystem {
  SparseMatrix matrix;  ///< integrated form of -eps^2 Delta_h
  Vector boundary_rhs;  ///< Dirichlet and Neumann contributions
};

/// Integrated Poisson operator: row i reads
///   eps^2 [ sum_int tau (psi_i - psi_j) + sum_D tau psi_i ]
///     = m_i (charge_i) + eps^2 sum_D tau psi^D + eps^2 sum_N m(sigma) g_sigma
/// where g is the outward normal derivative stored in `bc` (surface charge
/// eps^2 g). The caller adds m_i * charge_i to `boundary_rhs`.
inline PoissonSystem assemble_poisson(const Mesh& mesh, double eps, const BoundaryData& bc) {
  if (mesh.num_dirichlet_edges() == 0)
    fail(Errc::AllNeumann, "potential problem needs at least one Dirichlet edge");
  if (bc.is_insulated()) fail(Errc::MissingBoundaryData, "potential needs Dirichlet/Neumann data");
  const std::size_t n = mesh.num_volumes();
  const double e2 = eps * eps;
  std::vector<Triplet> trip;
  trip.reserve(5 * n);
  PoissonSystem sys;
  sys.boundary_rhs = Vector::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t e = 0; e < mesh.num_edges(); ++e) {
    const Edge& ed = mesh.edge(e);
    const auto i = static_cast<Eigen::Index>(ed.i);
    if (ed.interior()) {
      const auto j = static_cast<Eigen::Index>(ed.j);
      const double w = e2 * ed.trans;
      trip.emplace_back(i, i, w);
      trip.emplace_back(j, j, w);
      trip.emplace_back(i, j, -w);
      trip.emplace_back(j, i, -w);
    } else if (ed.kind == EdgeKind::Dirichlet) {
      trip.emplace_back(i, i, e2 * ed.trans);
      sys.boundary_rhs[i] += e2 * ed.trans * bc.value(e);
    } else {
      trip.emplace_back(i, i, 0.0);
      sys.boundary_rhs[i] += e2 * ed.measure * bc.value(e);
    }
  }
  sys.matrix.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  sys.matrix.setFromTriplets(trip.begin(), trip.end());
  sys.matrix.makeCompressed();
  return sys;
}

inline double relative_residual(const SparseMatrix& a, const Vector& x, const Vector& b) {
  const double nb = b.norm();
  const double nr = (a * x - b).norm();
  return nb > 0.0 ? nr / nb : nr;
}

/// Reusable sparse LU factorization; the symbolic analysis is kept while the
/// sparsity pattern stays the same.
class DirectSolver {
 public:
  void factorize(const SparseMatrix& a) {
    if (!same_pattern(a)) {
      lu_.analyzePattern(a);
      outer_.assign(a.outerIndexPtr(), a.outerIndexPtr() + a.outerSize() + 1);
      inner_.assign(a.innerIndexPtr(), a.innerIndexPtr() + a.nonZeros());
    }
    lu_.factorize(a);
    if (lu_.info() != Eigen::Success) {
      outer_.clear();
      fail(Errc::SingularMatrix, "sparse LU factorization failed: " + lu_.lastErrorMessage());
    }
    a_ = a;
  }

  double last_residual() const noexcept { return last_residual_; }

  /// Solves with the last factorization, refining until the relative residual
  /// meets `tol` or three refinement passes have been spent. The achieved
  /// residual is available from last_residual().
  Vector solve(const Vector& b, double tol) {
    if (b.norm() == 0.0) {
      last_residual_ = 0.0;
      return Vector::Zero(b.size());
    }
    Vector x = lu_.solve(b);
    if (lu_.info() != Eigen::Success || !x.allFinite())
      fail(Errc::SingularMatrix, "sparse LU solve failed");
    double res = relative_residual(a_, x, b);
    for (int pass = 0; pass < 3 && res > tol; ++pass) {
      const Vector r = b - a_ * x;
      x += lu_.solve(r);
      res = relative_residual(a_, x, b);
    }
    last_residual_ = res;
    return x;
  }

 private:
  bool same_pattern(const SparseMatrix& a) const {
    if (outer_.size() != static_cast<std::size_t>(a.outerSize() + 1) ||
        inner_.size() != static_cast<std::size_t>(a.nonZeros()))
      return false;
    for (std::size_t k = 0; k < outer_.size(); ++k)
      if (outer_[k] != a.outerIndexPtr()[k]) return false;
    for (std::size_t k = 0; k < inner_.size(); ++k)
      if (inner_[k] != a.innerIndexPtr()[k]) return false;
    return true;
  }

  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu_;
  std::vector<int> outer_, inner_;
  SparseMatrix a_;
  double last_residual_ = 0.0;
};

/// Solves A x = b with ||Ax - b||_2 <= tol ||b||_2.
inline Vector solve(const SparseMatrix& a, const Vector& b, const LinSolveConfig& cfg = {}) {
  cfg.validate();
  if (a.rows() != a.cols() || a.rows() != b.size())
    fail(Errc::MeshMismatch, "linear system dimensions disagree");
  if (!b.allFinite()) fail(Errc::NotConverged, "right side is not finite");
  if (b.norm() == 0.0) return Vector::Zero(b.size());
  const int cap = cfg.max_iterations > 0 ? cfg.max_iterations : static_cast<int>(10 * a.rows());

  auto finish = [&](const auto& solver, const Vector& x) {
    const double res = relative_residual(a, x, b);
    if (!x.allFinite() || !(res <= cfg.tol))
      fail(Errc::NotConverged, "iterative solve stopped after " + std::to_string(solver.iterations()) +
                                   " iterations with residual " + std::to_string(res));
    return x;
  };

  switch (cfg.method) {
    case LinMethod::Direct: {
      DirectSolver lu;
      lu.factorize(a);
      Vector x = lu.solve(b, cfg.tol);
      if (!(lu.last_residual() <= cfg.tol))
        fail(Errc::NotConverged,
             "direct solve residual " + std::to_string(lu.last_residual()) + " above tolerance");
      return x;
    }
    case LinMethod::ConjugateGradient: {
      Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper> cg;
      cg.setTolerance(cfg.tol);
      cg.setMaxIterations(cap);
      cg.compute(a);
      return finish(cg, cg.solve(b));
    }
    case LinMethod::BiCGSTAB: {
      Eigen::BiCGSTAB<SparseMatrix> bi;
      bi.setTolerance(cfg.tol);
      bi.setMaxIterations(cap);
      bi.compute(a);
      return finish(bi, bi.solve(b));
    }
  }
  return Vector::Zero(b.size());
}

/// Solves -eps^2 Delta_h psi = charge with the given potential data.
inline GridFunction solve_poisson(const Mesh& mesh, double eps, const BoundaryData& bc,
                                  const GridFunction& charge, const LinSolveConfig& cfg = {}) {
  PoissonSystem sys = assemble_poisson(mesh, eps, bc);
  Vector rhs = sys.boundary_rhs;
  for (std::size_t i = 0; i < mesh.num_volumes(); ++i)
    rhs[static_cast<Eigen::Index>(i)] += mesh.volume(i) * charge[i];
  const Vector x = solve(sys.matrix, rhs, cfg);
  return GridFunction(mesh, std::vector<double>(x.data(), x.data() + x.size()));
}

}  // namespace pnpf
