#include "cutrom/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <sstream>

#include "cutrom/errors.hpp"

namespace cutrom {

std::array<Point, 3> BackgroundMesh::triangle_points(int t) const {
  const auto& tri = triangles_[static_cast<std::size_t>(t)];
  return {vertices_[static_cast<std::size_t>(tri[0])], vertices_[static_cast<std::size_t>(tri[1])],
          vertices_[static_cast<std::size_t>(tri[2])]};
}

double BackgroundMesh::area(int t) const {
  const auto p = triangle_points(t);
  return 0.5 * ((p[1].x - p[0].x) * (p[2].y - p[0].y) - (p[2].x - p[0].x) * (p[1].y - p[0].y));
}

double BackgroundMesh::element_size(int t) const { return std::sqrt(2.0 * area(t)); }

double BackgroundMesh::longest_edge(int t) const {
  const auto p = triangle_points(t);
  double m = 0.0;
  for (int k = 0; k < 3; ++k) {
    const Point& a = p[static_cast<std::size_t>(k)];
    const Point& b = p[static_cast<std::size_t>((k + 1) % 3)];
    m = std::max(m, std::hypot(b.x - a.x, b.y - a.y));
  }
  return m;
}

BackgroundMesh build_background_mesh(const Rect& rect, double h) {
  const double lx = rect.x1 - rect.x0;
  const double ly = rect.y1 - rect.y0;
  if (!(h > 0.0) || !(lx > 0.0) || !(ly > 0.0) || lx < h || ly < h) {
    std::ostringstream os;
    os << "degenerate rectangle (" << rect.x0 << "," << rect.y0 << ")-(" << rect.x1 << ","
       << rect.y1 << ") for h=" << h;
    throw DegenerateRect(os.str());
  }
  BackgroundMesh m;
  m.rect_ = rect;
  m.target_h_ = h;
  // the 1e-10 slack keeps exact divisions (e.g. 1/0.5) from rounding up
  m.nx_ = static_cast<int>(std::ceil(lx / h - 1e-10));
  m.ny_ = static_cast<int>(std::ceil(ly / h - 1e-10));
  m.hx_ = lx / m.nx_;
  m.hy_ = ly / m.ny_;
  const int nx = m.nx_;
  const int ny = m.ny_;

  m.vertices_.reserve(static_cast<std::size_t>((nx + 1) * (ny + 1)));
  for (int i = 0; i <= nx; ++i) {
    const double x = i == nx ? rect.x1 : rect.x0 + i * m.hx_;
    for (int j = 0; j <= ny; ++j) {
      const double y = j == ny ? rect.y1 : rect.y0 + j * m.hy_;
      m.vertices_.push_back({x, y});
    }
  }
  auto vid = [ny](int i, int j) { return i * (ny + 1) + j; };

  m.triangles_.reserve(static_cast<std::size_t>(2 * nx * ny));
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      const int v00 = vid(i, j), v10 = vid(i + 1, j), v11 = vid(i + 1, j + 1), v01 = vid(i, j + 1);
      m.triangles_.push_back({v00, v10, v11});
      m.triangles_.push_back({v00, v11, v01});
    }
  }

  // facets sorted by midpoint (lexicographic in x, then y)
  std::map<std::pair<int, int>, Facet> by_key;
  for (int t = 0; t < m.num_triangles(); ++t) {
    const auto& tri = m.triangles_[static_cast<std::size_t>(t)];
    for (int k = 0; k < 3; ++k) {
      const int a = tri[static_cast<std::size_t>(k)];
      const int b = tri[static_cast<std::size_t>((k + 1) % 3)];
      const auto ga = m.vertex_grid(a);
      const auto gb = m.vertex_grid(b);
      const std::pair<int, int> key{ga[0] + gb[0], ga[1] + gb[1]};
      auto [it, inserted] = by_key.try_emplace(key);
      Facet& f = it->second;
      if (inserted) {
        f.vertices = {std::min(a, b), std::max(a, b)};
        f.elements = {t, -1};
        f.local_edge = {k, -1};
      } else {
        f.elements[1] = t;
        f.local_edge[1] = k;
      }
    }
  }
  m.facets_.reserve(by_key.size());
  for (auto& [key, f] : by_key) m.facets_.push_back(f);

  m.element_facets_.assign(m.triangles_.size(), {-1, -1, -1});
  for (int fi = 0; fi < m.num_facets(); ++fi) {
    Facet& f = m.facets_[static_cast<std::size_t>(fi)];
    for (int s = 0; s < 2; ++s) {
      if (f.elements[static_cast<std::size_t>(s)] < 0) continue;
      m.element_facets_[static_cast<std::size_t>(f.elements[static_cast<std::size_t>(s)])]
                       [static_cast<std::size_t>(f.local_edge[static_cast<std::size_t>(s)])] = fi;
    }
    if (f.is_boundary()) {
      const auto ga = m.vertex_grid(f.vertices[0]);
      const auto gb = m.vertex_grid(f.vertices[1]);
      if (ga[0] == 0 && gb[0] == 0) {
        f.tag = BoundaryTag::Inlet;
      } else if (ga[0] == nx && gb[0] == nx) {
        f.tag = BoundaryTag::Outlet;
      } else {
        f.tag = BoundaryTag::Wall;
      }
    }
  }

  double hmax = 0.0;
  for (int t = 0; t < m.num_triangles(); ++t) hmax = std::max(hmax, m.element_size(t));
  m.h_ = hmax;
  return m;
}

std::array<double, 3> CutClassification::element_values(const BackgroundMesh& mesh, int t) const {
  const auto& tri = mesh.triangles()[static_cast<std::size_t>(t)];
  return {vertex_values[static_cast<std::size_t>(tri[0])],
          vertex_values[static_cast<std::size_t>(tri[1])],
          vertex_values[static_cast<std::size_t>(tri[2])]};
}

std::vector<int> ghost_facets(const BackgroundMesh& mesh, const CutClassification& cls,
                              GhostFacetPolicy policy) {
  std::vector<int> out;
  for (int fi = 0; fi < mesh.num_facets(); ++fi) {
    const Facet& f = mesh.facets()[static_cast<std::size_t>(fi)];
    if (f.is_boundary()) continue;
    const int a = f.elements[0];
    const int b = f.elements[1];
    if (!cls.is_active(a) || !cls.is_active(b)) continue;
    const bool keep = policy == GhostFacetPolicy::CutCutOnly ? (cls.is_cut(a) && cls.is_cut(b))
                                                             : (cls.is_cut(a) || cls.is_cut(b));
    if (keep) out.push_back(fi);
  }
  return out;
}

CutClassification classify_elements(const BackgroundMesh& mesh, const LevelsetFunction& levelset,
                                    GhostFacetPolicy policy) {
  CutClassification cls;
  cls.snap_tolerance = 1e-10 * mesh.h();
  const double eps = cls.snap_tolerance;
  cls.vertex_values.resize(mesh.vertices().size());
  for (std::size_t v = 0; v < mesh.vertices().size(); ++v) {
    const Point& p = mesh.vertices()[v];
    double chi = levelset(p.x, p.y);
    if (std::abs(chi) < eps) chi = chi < 0.0 ? -eps : eps;
    cls.vertex_values[v] = chi;
  }
  cls.status.resize(mesh.triangles().size());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto vals = cls.element_values(mesh, t);
    int negative = 0;
    for (double v : vals) negative += v < 0.0 ? 1 : 0;
    CutStatus s = negative == 3 ? CutStatus::Fluid : (negative == 0 ? CutStatus::Solid : CutStatus::Cut);
    cls.status[static_cast<std::size_t>(t)] = s;
    switch (s) {
      case CutStatus::Fluid: ++cls.fluid_count; break;
      case CutStatus::Cut: ++cls.cut_count; break;
      case CutStatus::Solid: ++cls.solid_count; break;
    }
    if (s != CutStatus::Solid) cls.active_elements.push_back(t);
  }
  cls.ghost_facets = ghost_facets(mesh, cls, policy);
  return cls;
}

CutClassification classify_elements(const BackgroundMesh& mesh, const OrientedLevelset& levelset,
                                    GhostFacetPolicy policy) {
  return classify_elements(
      mesh, [&levelset](double x, double y) { return levelset(x, y); }, policy);
}

void write_mesh_vtk(std::ostream& os, const BackgroundMesh& mesh, const CutClassification* cls) {
  os << "# vtk DataFile Version 3.0\n"
     << "cutrom background mesh\n"
     << "ASCII\n"
     << "DATASET UNSTRUCTURED_GRID\n";
  os.precision(17);
  os << "POINTS " << mesh.num_vertices() << " double\n";
  for (const Point& p : mesh.vertices()) os << p.x << ' ' << p.y << " 0\n";
  os << "CELLS " << mesh.num_triangles() << ' ' << 4 * mesh.num_triangles() << '\n';
  for (const auto& t : mesh.triangles()) os << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  os << "CELL_TYPES " << mesh.num_triangles() << '\n';
  for (int t = 0; t < mesh.num_triangles(); ++t) os << "5\n";
  if (cls != nullptr) {
    os << "CELL_DATA " << mesh.num_triangles() << '\n'
       << "SCALARS cut_status int 1\n"
       << "LOOKUP_TABLE default\n";
    for (CutStatus s : cls->status) os << static_cast<int>(s) << '\n';
  }
}

}  // namespace cutrom
