#pragma once

/// @file operators.hpp
/// Discrete calculus on admissible meshes: edge averages, oriented edge
/// differences, divergence, weighted Laplacian, the vertex gradient
/// reconstruction, inner products and norms.
///
/// Edge quantities are stored once per edge. The stored value is the one seen
/// from the first volume `edge.i`; the second volume sees the negated value.

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "pnpf/error.hpp"
#include "pnpf/mesh.hpp"

namespace pnpf {

namespace detail {

template <class Tag>
class MeshArray {
 public:
  MeshArray() = default;
  MeshArray(const Mesh& mesh, double fill) : mesh_(&mesh), v_(Tag::count(mesh), fill) {}
  MeshArray(const Mesh& mesh, std::vector<double> values) : mesh_(&mesh), v_(std::move(values)) {
    if (v_.size() != Tag::count(mesh))
      fail(Errc::MeshMismatch, std::string(Tag::name) + " length does not match the mesh");
  }

  const Mesh& mesh() const { return *mesh_; }
  const Mesh* mesh_ptr() const noexcept { return mesh_; }
  std::size_t size() const noexcept { return v_.size(); }
  double& operator[](std::size_t k) { return v_[k]; }
  double operator[](std::size_t k) const { return v_[k]; }
  std::vector<double>& values() noexcept { return v_; }
  const std::vector<double>& values() const noexcept { return v_; }

  bool all_finite() const {
    for (double x : v_)
      if (!std::isfinite(x)) return false;
    return true;
  }
  double min() const {
    double m = std::numeric_limits<double>::infinity();
    for (double x : v_) m = x < m ? x : m;
    return m;
  }
  double max() const {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : v_) m = x > m ? x : m;
    return m;
  }

 private:
  const Mesh* mesh_ = nullptr;
  std::vector<double> v_;
};

struct CellTag {
  static constexpr const char* name = "grid function";
  static std::size_t count(const Mesh& m) { return m.num_volumes(); }
};
struct EdgeTag {
  static constexpr const char* name = "edge function";
  static std::size_t count(const Mesh& m) { return m.num_edges(); }
};

}  // namespace detail

/// One value per control volume.
using GridFunction = detail::MeshArray<detail::CellTag>;
/// One value per edge, oriented from `edge.i`.
using EdgeFunction = detail::MeshArray<detail::EdgeTag>;

struct VectorGridFunction {
  const Mesh* mesh = nullptr;
  std::vector<Vec3> v;

  VectorGridFunction() = default;
  explicit VectorGridFunction(const Mesh& m) : mesh(&m), v(m.num_volumes(), Vec3{0.0, 0.0, 0.0}) {}
  Vec3& operator[](std::size_t i) { return v[i]; }
  const Vec3& operator[](std::size_t i) const { return v[i]; }
  std::size_t size() const noexcept { return v.size(); }
};

template <class A, class B>
void require_same_mesh(const A& a, const B& b) {
  if (a.mesh_ptr() != b.mesh_ptr()) fail(Errc::MeshMismatch, "operands live on different meshes");
}

/// Exterior-edge data for one field.
///
/// An insulated field has zero difference across every exterior edge, whatever
/// the edge's potential tag (zero flux for concentrations, insulation for
/// temperature). Otherwise each exterior edge carries either the Dirichlet value
/// u^D or the Neumann datum g, the outward normal derivative, giving
/// D u = g * d_sigma.
class BoundaryData {
 public:
  static BoundaryData insulated(const Mesh& mesh) {
    BoundaryData bc;
    bc.mesh_ = &mesh;
    bc.insulated_ = true;
    return bc;
  }

  /// `values` holds one entry per edge; interior entries are ignored.
  BoundaryData(const Mesh& mesh, std::vector<double> values)
      : mesh_(&mesh), values_(std::move(values)) {
    if (values_.size() != mesh.num_edges())
      fail(Errc::MissingBoundaryData, "boundary data must have one slot per edge");
    for (std::size_t e = 0; e < values_.size(); ++e) {
      if (!mesh.edge(e).interior() && !std::isfinite(values_[e]))
        fail(Errc::MissingBoundaryData, "exterior edge " + std::to_string(e) + " has no value");
    }
  }

  /// Builds data from a callable `value(edge) -> double` evaluated on exterior edges.
  template <class Fn>
  static BoundaryData from(const Mesh& mesh, Fn value) {
    std::vector<double> v(mesh.num_edges(), 0.0);
    for (std::size_t e = 0; e < mesh.num_edges(); ++e)
      if (!mesh.edge(e).interior()) v[e] = value(mesh.edge(e));
    return BoundaryData(mesh, std::move(v));
  }

  bool is_insulated() const noexcept { return insulated_; }
  const Mesh* mesh_ptr() const noexcept { return mesh_; }
  double value(std::size_t e) const { return insulated_ ? 0.0 : values_[e]; }

 private:
  BoundaryData() = default;
  const Mesh* mesh_ = nullptr;
  bool insulated_ = false;
  std::vector<double> values_;
};

/// D u for volume `from` across exterior edge `e`.
inline double exterior_difference(const Mesh& mesh, std::size_t e, double u_from,
                                  const BoundaryData& bc) {
  if (bc.is_insulated()) return 0.0;
  const Edge& ed = mesh.edge(e);
  if (ed.kind == EdgeKind::Dirichlet) return bc.value(e) - u_from;
  return bc.value(e) * ed.distance;
}

/// [m_i + m_j] u_i u_j / (m_i u_j + m_j u_i)
template <class T>
T harmonic_mean(double mi, double mj, const T& ui, const T& uj) {
  return (mi + mj) * ui * uj / (mi * uj + mj * ui);
}

/// Volume-weighted harmonic mean on interior edges; exterior edges copy the
/// adjacent value.
inline EdgeFunction harmonic_average(const GridFunction& u) {
  const Mesh& mesh = u.mesh();
  EdgeFunction out(mesh, 0.0);
  for (std::size_t e = 0; e < mesh.num_edges(); ++e) {
    const Edge& ed = mesh.edge(e);
    if (!ed.interior()) {
      out[e] = u[ed.i];
      continue;
    }
    const double mi = mesh.volume(ed.i), mj = mesh.volume(ed.j);
    const double ui = u[ed.i], uj = u[ed.j];
    if (mi * uj + mj * ui == 0.0)
      fail(Errc::DivisionDegenerate, "harmonic average with vanishing denominator");
    out[e] = harmonic_mean(mi, mj, ui, uj);
  }
  return out;
}

/// Plain mean on interior edges; exterior edges copy the adjacent value.
inline EdgeFunction arithmetic_average(const GridFunction& u) {
  const Mesh& mesh = u.mesh();
  EdgeFunction out(mesh, 0.0);
  for (std::size_t e = 0; e < mesh.num_edges(); ++e) {
    const Edge& ed = mesh.edge(e);
    out[e] = ed.interior() ? 0.5 * (u[ed.i] + u[ed.j]) : u[ed.i];
  }
  return out;
}

/// D u_{i,sigma} seen from the first volume of each edge.
inline EdgeFunction edge_difference(const GridFunction& u, const BoundaryData& bc) {
  const Mesh& mesh = u.mesh();
  if (bc.mesh_ptr() != &mesh) fail(Errc::MeshMismatch, "boundary data built for another mesh");
  EdgeFunction out(mesh, 0.0);
  for (std::size_t e = 0; e < mesh.num_edges(); ++e) {
    const Edge& ed = mesh.edge(e);
    out[e] = ed.interior() ? u[ed.j] - u[ed.i] : exterior_difference(mesh, e, u[ed.i], bc);
  }
  return out;
}

/// Value of an oriented edge quantity as seen from volume i.
inline double seen_from(const EdgeFunction& f, std::size_t e, std::size_t i) {
  return f.mesh().orientation(e, i) * f[e];
}

/// (1/m_i) sum_sigma tau_sigma f_sigma D g_{i,sigma}.
inline GridFunction weighted_laplacian(const EdgeFunction& f, const GridFunction& g,
                                       const BoundaryData& bc) {
  require_same_mesh(f, g);
  const Mesh& mesh = g.mesh();
  const EdgeFunction dg = edge_difference(g, bc);
  GridFunction out(mesh, 0.0);
  for (std::size_t e = 0; e < mesh.num_edges(); ++e) {
    const Edge& ed = mesh.edge(e);
    const double w = ed.trans * f[e] * dg[e];
    out[ed.i] += w;
    if (ed.interior()) out[ed.j] -= w;
  }
  for (std::size_t i = 0; i < mesh.num_volumes(); ++i) out[i] /= mesh.volume(i);
  return out;
}

inline GridFunction laplacian(const GridFunction& g, const BoundaryData& bc) {
  return weighted_laplacian(EdgeFunction(g.mesh(), 1.0), g, bc);
}

/// (1/m_i) sum_sigma m(sigma) F_{i,sigma} for normal fluxes stored per edge
/// (positive from edge.i towards edge.j, or outward on exterior edges).
inline GridFunction divergence(const EdgeFunction& flux) {
  const Mesh& mesh = flux.mesh();
  GridFunction out(mesh, 0.0);
  for (std::size_t e = 0; e < mesh.num_edges(); ++e) {
    const Edge& ed = mesh.edge(e);
    const double w = ed.measure * flux[e];
    out[ed.i] += w;
    if (ed.interior()) out[ed.j] -= w;
  }
  for (std::size_t i = 0; i < mesh.num_volumes(); ++i) out[i] /= mesh.volume(i);
  return out;
}

/// Collapses per-(volume, edge) fluxes, given in the order of `cell_edges(i)`,
/// into oriented edge storage. Interior pairs must be antisymmetric.
inline EdgeFunction orient_fluxes(const Mesh& mesh, const std::vector<std::vector<double>>& per_cell,
                                  double tol = 1e-12) {
  if (per_cell.size() != mesh.num_volumes())
    fail(Errc::MeshMismatch, "per-volume flux table does not match the mesh");
  std::vector<double> seen(mesh.num_edges(), std::numeric_limits<double>::quiet_NaN());
  EdgeFunction out(mesh, 0.0);
  for (std::size_t i = 0; i < mesh.num_volumes(); ++i) {
    const auto& edges = mesh.cell_edges(i);
    if (per_cell[i].size() != edges.size())
      fail(Errc::MeshMismatch, "per-volume flux list does not match the volume's edges");
    for (std::size_t k = 0; k < edges.size(); ++k) {
      const std::size_t e = edges[k];
      const double f = mesh.orientation(e, i) * per_cell[i][k];
      if (std::isnan(seen[e])) {
        seen[e] = f;
        out[e] = f;
      } else if (std::abs(seen[e] - f) > tol * (1.0 + std::abs(f))) {
        fail(Errc::AntisymmetryViolation, "edge " + std::to_string(e) + " fluxes do not cancel");
      }
    }
  }
  return out;
}

/// (1/m_i) sum_sigma m(sigma) w_sigma n_{i,sigma} for given edge values w.
inline VectorGridFunction tilde_gradient(const EdgeFunction& w) {
  const Mesh& mesh = w.mesh();
  VectorGridFunction out(mesh);
  for (std::size_t e = 0; e < mesh.num_edges(); ++e) {
    const Edge& ed = mesh.edge(e);
    for (int a = 0; a < 3; ++a) {
      const double s = ed.measure * w[e] * ed.normal[a];
      out[ed.i][a] += s;
      if (ed.interior()) out[ed.j][a] -= s;
    }
  }
  for (std::size_t i = 0; i < mesh.num_volumes(); ++i)
    for (double& c : out[i]) c /= mesh.volume(i);
  return out;
}

/// Vertex gradient reconstruction from arithmetic edge means (exterior edges
/// copy the adjacent value, so constants have zero gradient everywhere).
inline VectorGridFunction tilde_gradient(const GridFunction& u) {
  return tilde_gradient(arithmetic_average(u));
}

inline double inner_product(const GridFunction& f, const GridFunction& g) {
  require_same_mesh(f, g);
  const Mesh& mesh = f.mesh();
  double s = 0.0;
  for (std::size_t i = 0; i < mesh.num_volumes(); ++i) s += mesh.volume(i) * f[i] * g[i];
  return s;
}

/// <f, 1>
inline double integral(const GridFunction& f) {
  const Mesh& mesh = f.mesh();
  double s = 0.0;
  for (std::size_t i = 0; i < mesh.num_volumes(); ++i) s += mesh.volume(i) * f[i];
  return s;
}

/// sum over interior edges of tau_sigma w_sigma D a_sigma D b_sigma.
inline double edge_inner_product(const EdgeFunction& w, const GridFunction& a, const GridFunction& b) {
  require_same_mesh(w, a);
  require_same_mesh(a, b);
  const Mesh& mesh = a.mesh();
  double s = 0.0;
  for (std::size_t e = 0; e < mesh.num_edges(); ++e) {
    const Edge& ed = mesh.edge(e);
    if (!ed.interior()) continue;
    s += ed.trans * w[e] * (a[ed.j] - a[ed.i]) * (b[ed.j] - b[ed.i]);
  }
  return s;
}

inline double norm_l2(const GridFunction& f) { return std::sqrt(inner_product(f, f)); }

inline double norm_inf(const GridFunction& f) {
  double m = 0.0;
  for (double x : f.values()) m = std::abs(x) > m ? std::abs(x) : m;
  return m;
}

/// ||grad_h f||_2 over interior edges.
inline double norm_grad(const GridFunction& f) {
  return std::sqrt(edge_inner_product(EdgeFunction(f.mesh(), 1.0), f, f));
}

}  // namespace pnpf
