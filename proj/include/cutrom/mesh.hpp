#pragma once

// Fixed background triangulation of the bounding rectangle and the per-theta
// element classification against an oriented levelset.

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "cutrom/geometry.hpp"

namespace cutrom {

struct Rect {
  double x0 = -2.0;
  double y0 = -1.0;
  double x1 = 2.0;
  double y1 = 1.0;
  double area() const { return (x1 - x0) * (y1 - y0); }
  friend bool operator==(const Rect&, const Rect&) = default;
};

enum class BoundaryTag : std::uint8_t { Interior = 0, Inlet = 1, Outlet = 2, Wall = 3 };

struct Facet {
  std::array<int, 2> vertices{};
  /// Neighbouring triangles; elements[1] == -1 on the boundary.
  std::array<int, 2> elements{-1, -1};
  /// Local edge index of this facet inside each neighbour.
  std::array<int, 2> local_edge{-1, -1};
  BoundaryTag tag = BoundaryTag::Interior;

  bool is_boundary() const { return elements[1] < 0; }
};

/// Structured triangulation: nx x ny cells, each split along the
/// (i,j)-(i+1,j+1) diagonal. Vertices are numbered lexicographically by
/// (x, y); triangles are counterclockwise; local edge k joins vertex k and
/// vertex k+1 (mod 3).
class BackgroundMesh {
 public:
  const Rect& rect() const { return rect_; }
  double target_h() const { return target_h_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double hx() const { return hx_; }
  double hy() const { return hy_; }

  const std::vector<Point>& vertices() const { return vertices_; }
  const std::vector<std::array<int, 3>>& triangles() const { return triangles_; }
  const std::vector<Facet>& facets() const { return facets_; }
  /// Facet index of local edge k of triangle t.
  const std::vector<std::array<int, 3>>& element_facets() const { return element_facets_; }

  int num_vertices() const { return static_cast<int>(vertices_.size()); }
  int num_triangles() const { return static_cast<int>(triangles_.size()); }
  int num_facets() const { return static_cast<int>(facets_.size()); }

  std::array<Point, 3> triangle_points(int t) const;
  double area(int t) const;
  /// Characteristic element length sqrt(2|T|): the leg length of the
  /// structured right triangles.
  double element_size(int t) const;
  /// Mesh size h used by the stabilization terms: max element_size.
  double h() const { return h_; }
  double longest_edge(int t) const;

  /// (i, j) grid coordinates of a vertex.
  std::array<int, 2> vertex_grid(int v) const { return {v / (ny_ + 1), v % (ny_ + 1)}; }

 private:
  friend BackgroundMesh build_background_mesh(const Rect&, double);

  Rect rect_{};
  double target_h_ = 0.0;
  int nx_ = 0;
  int ny_ = 0;
  double hx_ = 0.0;
  double hy_ = 0.0;
  double h_ = 0.0;
  std::vector<Point> vertices_;
  std::vector<std::array<int, 3>> triangles_;
  std::vector<Facet> facets_;
  std::vector<std::array<int, 3>> element_facets_;
};

/// Throws DegenerateRect if a side is shorter than h (or the rectangle is
/// inverted / h is not positive).
BackgroundMesh build_background_mesh(const Rect& rect, double h);

enum class CutStatus : std::uint8_t { Fluid = 0, Cut = 1, Solid = 2 };

enum class GhostFacetPolicy {
  AnyCutNeighbor,  // facets between two active elements touching a cut element
  CutCutOnly       // only facets whose two neighbours are both cut
};

using LevelsetFunction = std::function<double(double, double)>;

struct CutClassification {
  /// Oriented P1 vertex values after snapping (never exactly zero).
  std::vector<double> vertex_values;
  std::vector<CutStatus> status;
  std::vector<int> active_elements;  // fluid and cut, increasing index
  std::vector<int> ghost_facets;     // increasing facet index
  int fluid_count = 0;
  int cut_count = 0;
  int solid_count = 0;
  double snap_tolerance = 0.0;

  bool is_active(int t) const { return status[static_cast<std::size_t>(t)] != CutStatus::Solid; }
  bool is_cut(int t) const { return status[static_cast<std::size_t>(t)] == CutStatus::Cut; }
  std::array<double, 3> element_values(const BackgroundMesh& mesh, int t) const;
};

/// Classifies every triangle through the P1 interpolant of the oriented
/// levelset (negative = fluid). Vertex values with |chi| < 1e-10 h are pushed
/// to +-1e-10 h, zero going to the solid side.
CutClassification classify_elements(const BackgroundMesh& mesh, const LevelsetFunction& levelset,
                                    GhostFacetPolicy policy = GhostFacetPolicy::AnyCutNeighbor);
CutClassification classify_elements(const BackgroundMesh& mesh, const OrientedLevelset& levelset,
                                    GhostFacetPolicy policy = GhostFacetPolicy::AnyCutNeighbor);

/// Interior facets with both neighbours active and (per policy) a cut neighbour.
std::vector<int> ghost_facets(const BackgroundMesh& mesh, const CutClassification& cls,
                              GhostFacetPolicy policy = GhostFacetPolicy::AnyCutNeighbor);

/// Legacy ASCII VTK unstructured grid; when cls is given, adds the cell field
/// "cut_status" (0 fluid, 1 cut, 2 solid).
void write_mesh_vtk(std::ostream& os, const BackgroundMesh& mesh,
                    const CutClassification* cls = nullptr);

}  // namespace cutrom
