#pragma once

/// @file mesh.hpp
/// Admissible orthogonal meshes built from rectangular grids.
///
/// Control volumes are grid cells with the vertex x_i at the cell center, so
/// each cell is the Voronoi cell of its center and every interior edge is
/// orthogonal to the segment joining the two centers. Exterior edges carry a
/// potential tag (Dirichlet or Neumann) and a boundary group label that the
/// boundary protocols use to assign values.

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <queue>
#include <string>
#include <vector>

#include "pnpf/error.hpp"

namespace pnpf {

inline constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

struct Point {
  double x = 0.0;
  double y = 0.0;
};

using Vec3 = std::array<double, 3>;

enum class EdgeKind { Interior, Dirichlet, Neumann };

/// Boundary group labels. Unit-square faces use the four side labels; the
/// electrode comb uses the three electrode/channel labels.
namespace group {
inline constexpr int none = 0;
inline constexpr int left = 1;
inline constexpr int right = 2;
inline constexpr int bottom = 3;
inline constexpr int top = 4;
inline constexpr int channel_wall = 5;    ///< insulating top/bottom wall of the bulk channel
inline constexpr int electrode_high = 6;  ///< electrode held at the applied voltage (x > 0)
inline constexpr int electrode_low = 7;   ///< grounded electrode (x < 0)
}  // namespace group

struct Edge {
  EdgeKind kind = EdgeKind::Interior;
  std::size_t i = npos;  ///< first volume; for interior edges i < j
  std::size_t j = npos;  ///< second volume, npos on exterior edges
  double measure = 0.0;  ///< m(sigma)
  double distance = 0.0; ///< d_sigma
  double trans = 0.0;    ///< m(sigma) / d_sigma
  double dist_i = 0.0;   ///< d(x_i, sigma)
  double dist_j = 0.0;   ///< d(x_j, sigma), zero on exterior edges
  Vec3 normal{0.0, 0.0, 0.0};  ///< unit normal of sigma pointing out of V_i
  Point a, b;                  ///< segment endpoints
  int group = group::none;

  bool interior() const noexcept { return kind == EdgeKind::Interior; }
  Point midpoint() const noexcept { return {0.5 * (a.x + b.x), 0.5 * (a.y + b.y)}; }
};

/// Raster metadata kept alongside grid-generated meshes.
struct GridInfo {
  int nx = 0;
  int ny = 0;
  double x_min = 0.0;
  double y_min = 0.0;
  double dx = 0.0;
  double dy = 0.0;
  std::vector<std::size_t> cell_index;  ///< nx*ny raster -> volume index (npos = removed)

  std::size_t at(int ix, int iy) const {
    if (ix < 0 || iy < 0 || ix >= nx || iy >= ny) return npos;
    return cell_index[static_cast<std::size_t>(iy) * static_cast<std::size_t>(nx) +
                      static_cast<std::size_t>(ix)];
  }
};

class Mesh {
 public:
  Mesh(std::vector<Point> centers, std::vector<double> volumes, std::vector<double> diameters,
       std::vector<Edge> edges, GridInfo grid)
      : centers_(std::move(centers)),
        volumes_(std::move(volumes)),
        diameters_(std::move(diameters)),
        edges_(std::move(edges)),
        grid_(std::move(grid)) {
    const std::size_t n = centers_.size();
    if (volumes_.size() != n || diameters_.size() != n)
      fail(Errc::DegenerateGeometry, "per-volume arrays disagree in length");
    cell_edges_.assign(n, {});
    in_n1_.assign(n, false);
    in_n2_.assign(n, false);
    in_n3_.assign(n, false);
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      const Edge& ed = edges_[e];
      if (ed.i >= n) fail(Errc::DegenerateGeometry, "edge references missing volume");
      if (!(ed.trans > 0.0)) fail(Errc::DegenerateGeometry, "nonpositive transmissibility");
      cell_edges_[ed.i].push_back(e);
      if (ed.interior()) {
        if (ed.j >= n || ed.j <= ed.i)
          fail(Errc::DegenerateGeometry, "interior edge must join i < j");
        cell_edges_[ed.j].push_back(e);
      } else {
        in_n3_[ed.i] = true;
        if (ed.kind == EdgeKind::Dirichlet) {
          in_n1_[ed.i] = true;
          ++n_dirichlet_;
        } else {
          in_n2_[ed.i] = true;
        }
      }
    }
    for (double v : volumes_) {
      if (!(v > 0.0)) fail(Errc::DegenerateGeometry, "nonpositive control volume");
      measure_ += v;
    }
  }

  std::size_t num_volumes() const noexcept { return centers_.size(); }
  std::size_t num_edges() const noexcept { return edges_.size(); }

  const std::vector<Point>& centers() const noexcept { return centers_; }
  const std::vector<double>& volumes() const noexcept { return volumes_; }
  const std::vector<double>& diameters() const noexcept { return diameters_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const Edge& edge(std::size_t e) const { return edges_[e]; }
  const Point& center(std::size_t i) const { return centers_[i]; }
  double volume(std::size_t i) const { return volumes_[i]; }

  /// Edge indices of E_i (interior and exterior).
  const std::vector<std::size_t>& cell_edges(std::size_t i) const { return cell_edges_[i]; }

  /// Volume across edge e from volume i (npos on exterior edges).
  std::size_t neighbor(std::size_t e, std::size_t i) const {
    const Edge& ed = edges_[e];
    if (!ed.interior()) return npos;
    return ed.i == i ? ed.j : ed.i;
  }

  /// +1 when volume i is the first volume of edge e, -1 otherwise.
  double orientation(std::size_t e, std::size_t i) const { return edges_[e].i == i ? 1.0 : -1.0; }

  /// Outward unit normal n_{i,sigma}.
  Vec3 normal(std::size_t e, std::size_t i) const {
    Vec3 n = edges_[e].normal;
    if (edges_[e].i != i) {
      for (double& c : n) c = -c;
    }
    return n;
  }

  /// d(x_i, sigma) for either side of an edge.
  double distance_to_edge(std::size_t e, std::size_t i) const {
    const Edge& ed = edges_[e];
    return ed.i == i ? ed.dist_i : ed.dist_j;
  }

  double measure() const noexcept { return measure_; }
  std::size_t num_dirichlet_edges() const noexcept { return n_dirichlet_; }

  bool in_n1(std::size_t i) const { return in_n1_[i]; }  ///< touches a Dirichlet edge
  bool in_n2(std::size_t i) const { return in_n2_[i]; }  ///< touches a Neumann edge
  bool in_n3(std::size_t i) const { return in_n3_[i]; }  ///< touches any exterior edge

  const GridInfo& grid() const noexcept { return grid_; }

 private:
  std::vector<Point> centers_;
  std::vector<double> volumes_;
  std::vector<double> diameters_;
  std::vector<Edge> edges_;
  GridInfo grid_;
  std::vector<std::vector<std::size_t>> cell_edges_;
  std::vector<bool> in_n1_, in_n2_, in_n3_;
  std::size_t n_dirichlet_ = 0;
  double measure_ = 0.0;
};

enum class GeometryKind { UnitSquare, ElectrodeComb };

/// Potential tagging of the four faces of a rectangular grid.
enum class PotentialFaces {
  XDirichlet,    ///< Dirichlet on x = x_min and x = x_max, Neumann on the y faces
  AllDirichlet,
  AllNeumann,
};

struct CombSpec {
  int teeth = 3;                ///< solid teeth per electrode
  double tooth_width = 0.125;   ///< extent of a tooth in y
  double tooth_depth = 0.5;     ///< extent of a tooth in x, measured from the outer wall
  double gap_half_width = 0.2;  ///< half width of the central bulk channel
};

struct GeometrySpec {
  GeometryKind kind = GeometryKind::UnitSquare;
  int nx = 8;
  int ny = 8;
  double x_min = 0.0;
  double x_max = 1.0;
  double y_min = 0.0;
  double y_max = 1.0;
  CombSpec comb;
  PotentialFaces faces = PotentialFaces::XDirichlet;

  /// Comb defaults: the [-10,10]x[0,10] nm box scaled by L = 10 nm.
  static GeometrySpec electrode_comb(int nx, int ny) {
    GeometrySpec g;
    g.kind = GeometryKind::ElectrodeComb;
    g.nx = nx;
    g.ny = ny;
    g.x_min = -1.0;
    g.x_max = 1.0;
    return g;
  }
  static GeometrySpec unit_square(int nx, int ny) {
    GeometrySpec g;
    g.nx = nx;
    g.ny = ny;
    return g;
  }
};

struct RegularityReport {
  double c0 = 0.0;
  std::size_t worst_volume = npos;
  bool ok() const noexcept { return c0 > 0.0; }
};

namespace detail {

enum class Side { Left, Right, Bottom, Top };

struct BoundaryTag {
  EdgeKind kind;
  int group;
};

/// Builds a mesh from a raster mask of retained cells. `tagger(side, midpoint,
/// on_box)` tags each exterior edge.
template <class Tagger>
Mesh raster_mesh(const GeometrySpec& g, const std::vector<bool>& keep, Tagger tagger) {
  const double dx = (g.x_max - g.x_min) / g.nx;
  const double dy = (g.y_max - g.y_min) / g.ny;
  GridInfo grid;
  grid.nx = g.nx;
  grid.ny = g.ny;
  grid.x_min = g.x_min;
  grid.y_min = g.y_min;
  grid.dx = dx;
  grid.dy = dy;
  grid.cell_index.assign(keep.size(), npos);

  std::vector<Point> centers;
  std::size_t count = 0;
  for (int iy = 0; iy < g.ny; ++iy) {
    for (int ix = 0; ix < g.nx; ++ix) {
      const std::size_t r = static_cast<std::size_t>(iy) * g.nx + ix;
      if (!keep[r]) continue;
      grid.cell_index[r] = count++;
      centers.push_back({g.x_min + (ix + 0.5) * dx, g.y_min + (iy + 0.5) * dy});
    }
  }
  const double area = dx * dy;
  const double diam = std::hypot(dx, dy);
  std::vector<double> volumes(count, area);
  std::vector<double> diameters(count, diam);

  std::vector<Edge> edges;
  auto exterior = [&](std::size_t i, Side side, Point a, Point b, double half, Vec3 n,
                      bool on_box) {
    Edge e;
    e.i = i;
    e.a = a;
    e.b = b;
    e.measure = std::hypot(b.x - a.x, b.y - a.y);
    e.distance = half;
    e.dist_i = half;
    e.trans = e.measure / half;
    e.normal = n;
    const BoundaryTag tag = tagger(side, e.midpoint(), on_box);
    e.kind = tag.kind;
    e.group = tag.group;
    edges.push_back(e);
  };

  for (int iy = 0; iy < g.ny; ++iy) {
    for (int ix = 0; ix < g.nx; ++ix) {
      const std::size_t i = grid.at(ix, iy);
      if (i == npos) continue;
      const double x0 = g.x_min + ix * dx, x1 = x0 + dx;
      const double y0 = g.y_min + iy * dy, y1 = y0 + dy;

      // right face
      if (const std::size_t j = grid.at(ix + 1, iy); j != npos) {
        Edge e;
        e.i = i;
        e.j = j;
        e.a = {x1, y0};
        e.b = {x1, y1};
        e.measure = dy;
        e.distance = dx;
        e.dist_i = e.dist_j = 0.5 * dx;
        e.trans = dy / dx;
        e.normal = {1.0, 0.0, 0.0};
        edges.push_back(e);
      } else {
        exterior(i, Side::Right, {x1, y0}, {x1, y1}, 0.5 * dx, {1.0, 0.0, 0.0}, ix + 1 == g.nx);
      }
      // top face
      if (const std::size_t j = grid.at(ix, iy + 1); j != npos) {
        Edge e;
        e.i = i;
        e.j = j;
        e.a = {x0, y1};
        e.b = {x1, y1};
        e.measure = dx;
        e.distance = dy;
        e.dist_i = e.dist_j = 0.5 * dy;
        e.trans = dx / dy;
        e.normal = {0.0, 1.0, 0.0};
        edges.push_back(e);
      } else {
        exterior(i, Side::Top, {x0, y1}, {x1, y1}, 0.5 * dy, {0.0, 1.0, 0.0}, iy + 1 == g.ny);
      }
      if (grid.at(ix - 1, iy) == npos)
        exterior(i, Side::Left, {x0, y0}, {x0, y1}, 0.5 * dx, {-1.0, 0.0, 0.0}, ix == 0);
      if (grid.at(ix, iy - 1) == npos)
        exterior(i, Side::Bottom, {x0, y0}, {x1, y0}, 0.5 * dy, {0.0, -1.0, 0.0}, iy == 0);
    }
  }
  return Mesh(std::move(centers), std::move(volumes), std::move(diameters), std::move(edges),
              std::move(grid));
}

inline void check_box(const GeometrySpec& g) {
  if (g.nx < 1 || g.ny < 1) fail(Errc::ZeroResolution, "grid needs at least one cell per direction");
  if (!(g.x_max > g.x_min) || !(g.y_max > g.y_min))
    fail(Errc::DegenerateGeometry, "domain box has nonpositive extent");
}

}  // namespace detail

/// Cell-centered rectangular grid over the box of `spec`.
inline Mesh build_uniform_grid(const GeometrySpec& spec) {
  detail::check_box(spec);
  std::vector<bool> keep(static_cast<std::size_t>(spec.nx) * spec.ny, true);
  const PotentialFaces faces = spec.faces;
  return detail::raster_mesh(spec, keep, [faces](detail::Side side, Point, bool) {
    using detail::Side;
    const int grp = side == Side::Left    ? group::left
                    : side == Side::Right ? group::right
                    : side == Side::Bottom ? group::bottom
                                           : group::top;
    const bool x_face = side == Side::Left || side == Side::Right;
    EdgeKind kind = EdgeKind::Neumann;
    if (faces == PotentialFaces::AllDirichlet || (faces == PotentialFaces::XDirichlet && x_face))
      kind = EdgeKind::Dirichlet;
    return detail::BoundaryTag{kind, grp};
  });
}

/// Number of retained cells reachable from the first one through interior edges.
inline std::size_t connected_volume_count(const Mesh& mesh) {
  const std::size_t n = mesh.num_volumes();
  if (n == 0) return 0;
  std::vector<bool> seen(n, false);
  std::queue<std::size_t> q;
  q.push(0);
  seen[0] = true;
  std::size_t count = 0;
  while (!q.empty()) {
    const std::size_t i = q.front();
    q.pop();
    ++count;
    for (std::size_t e : mesh.cell_edges(i)) {
      const std::size_t j = mesh.neighbor(e, i);
      if (j != npos && !seen[j]) {
        seen[j] = true;
        q.push(j);
      }
    }
  }
  return count;
}

/// Box minus the solid teeth of two comb electrodes.
///
/// Each electrode owns `teeth` solid rectangles attached to its outer wall
/// (x = x_max for the high electrode, x = x_min for the grounded one), evenly
/// pitched in y. The central channel |x| <= gap_half_width stays fluid.
/// Exterior edges on the box top/bottom inside the channel are Neumann; every
/// other exterior edge is an electrode surface (Dirichlet), assigned to the
/// high or grounded electrode by the sign of its midpoint x.
inline Mesh build_electrode_domain(const GeometrySpec& spec) {
  detail::check_box(spec);
  const CombSpec& cb = spec.comb;
  const double height = spec.y_max - spec.y_min;
  if (std::abs(spec.x_min + spec.x_max) > 1e-12 * (spec.x_max - spec.x_min))
    fail(Errc::DegenerateGeometry, "comb box must be centered on x = 0");
  if (cb.teeth < 0 || cb.tooth_width < 0.0 || cb.tooth_depth < 0.0 || !(cb.gap_half_width > 0.0))
    fail(Errc::DegenerateGeometry, "comb parameters must be nonnegative with a positive gap");
  if (!(cb.gap_half_width < spec.x_max))
    fail(Errc::DegenerateGeometry, "gap half width must be smaller than x_max");
  if (cb.teeth > 0 && !(cb.teeth * cb.tooth_width < height))
    fail(Errc::DegenerateGeometry, "teeth do not fit inside the box height");
  if (cb.teeth > 0 && spec.x_max - cb.tooth_depth < cb.gap_half_width)
    fail(Errc::DegenerateGeometry, "teeth overlap the central channel");

  const double dx = (spec.x_max - spec.x_min) / spec.nx;
  const double dy = height / spec.ny;
  std::vector<bool> keep(static_cast<std::size_t>(spec.nx) * spec.ny, true);
  const double pitch = cb.teeth > 0 ? height / cb.teeth : 0.0;
  for (int iy = 0; iy < spec.ny; ++iy) {
    const double yc = spec.y_min + (iy + 0.5) * dy;
    for (int ix = 0; ix < spec.nx; ++ix) {
      const double xc = spec.x_min + (ix + 0.5) * dx;
      if (std::abs(xc) < spec.x_max - cb.tooth_depth) continue;
      for (int k = 0; k < cb.teeth; ++k) {
        const double mid = spec.y_min + (k + 0.5) * pitch;
        if (std::abs(yc - mid) < 0.5 * cb.tooth_width) {
          keep[static_cast<std::size_t>(iy) * spec.nx + ix] = false;
          break;
        }
      }
    }
  }

  const double gap = cb.gap_half_width;
  Mesh mesh = detail::raster_mesh(spec, keep, [gap](detail::Side side, Point mid, bool on_box) {
    using detail::Side;
    const bool horizontal_wall = side == Side::Top || side == Side::Bottom;
    if (on_box && horizontal_wall && std::abs(mid.x) <= gap)
      return detail::BoundaryTag{EdgeKind::Neumann, group::channel_wall};
    return detail::BoundaryTag{EdgeKind::Dirichlet,
                               mid.x > 0.0 ? group::electrode_high : group::electrode_low};
  });
  if (mesh.num_volumes() == 0 || connected_volume_count(mesh) != mesh.num_volumes())
    fail(Errc::DegenerateGeometry, "removing the electrode solid disconnects the fluid domain");
  return mesh;
}

inline Mesh build_mesh(const GeometrySpec& spec) {
  return spec.kind == GeometryKind::UnitSquare ? build_uniform_grid(spec)
                                               : build_electrode_domain(spec);
}

/// C0 = min over volumes i and edges sigma in E_i of d(x_i, sigma) / diam(V_i).
inline RegularityReport check_regularity(const Mesh& mesh) {
  RegularityReport rep;
  rep.c0 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < mesh.num_volumes(); ++i) {
    for (std::size_t e : mesh.cell_edges(i)) {
      const double ratio = mesh.distance_to_edge(e, i) / mesh.diameters()[i];
      if (ratio < rep.c0) {
        rep.c0 = ratio;
        rep.worst_volume = i;
      }
    }
  }
  if (rep.worst_volume == npos) rep.c0 = 0.0;
  return rep;
}

inline const char* tag_name(EdgeKind k) {
  switch (k) {
    case EdgeKind::Interior: return "none";
    case EdgeKind::Dirichlet: return "dirichlet";
    case EdgeKind::Neumann: return "neumann";
  }
  return "none";
}

/// Mesh summary dump: a volume table followed by an edge table.
inline void write_mesh_csv(const Mesh& mesh, std::ostream& os) {
  const auto old_prec = os.precision(17);
  os << "# volumes\nindex,x,y,volume\n";
  for (std::size_t i = 0; i < mesh.num_volumes(); ++i)
    os << i << ',' << mesh.center(i).x << ',' << mesh.center(i).y << ',' << mesh.volume(i) << '\n';
  os << "# edges\nkind,i,j,measure,distance,transmissibility,tag\n";
  for (const Edge& e : mesh.edges()) {
    os << (e.interior() ? "interior" : "exterior") << ',' << e.i << ','
       << (e.interior() ? static_cast<long long>(e.j) : -1LL) << ',' << e.measure << ','
       << e.distance << ',' << e.trans << ',' << tag_name(e.kind) << '\n';
  }
  os.precision(old_prec);
}

}  // namespace pnpf
