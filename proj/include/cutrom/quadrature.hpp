#pragma once

#include <array>
#include <vector>

#include "cutrom/geometry.hpp"
#include "cutrom/mesh.hpp"

namespace cutrom {

/// Rule on the reference triangle (0,0),(1,0),(0,1); weights sum to 1/2.
struct ReferenceTriangleRule {
  std::vector<std::array<double, 2>> points;
  std::vector<double> weights;
};

/// Rule on [0,1]; weights sum to 1.
struct ReferenceSegmentRule {
  std::vector<double> points;
  std::vector<double> weights;
};

/// Symmetric triangle rules exact for total degree `order` (1..6).
const ReferenceTriangleRule& triangle_rule(int order);
/// Gauss-Legendre with ceil((order+1)/2) points (order 1..12).
const ReferenceSegmentRule& segment_rule(int order);

struct QuadratureRule {
  std::vector<Point> points;
  std::vector<double> weights;
  /// Interface rules only: unit normal pointing from fluid into solid.
  std::vector<Point> normals;

  std::size_t size() const { return points.size(); }
  double total_weight() const;
};

struct CutDecomposition {
  std::vector<std::array<Point, 3>> fluid_triangles;  // counterclockwise
  std::array<Point, 2> segment{};
  Point normal{};  // grad(chi_P1)/|grad(chi_P1)|

  double fluid_area() const;
  double segment_length() const;
};

/// Marching-triangle split of a triangle along the zero line of the linear
/// interpolant of `values` (negative = fluid). Throws NotCut if all values
/// share a sign.
CutDecomposition decompose_cut_triangle(const std::array<Point, 3>& tri,
                                        const std::array<double, 3>& values);

/// Maps a reference rule onto a physical triangle.
void append_mapped_rule(const std::array<Point, 3>& tri, int order, QuadratureRule& out);
/// Maps a reference rule onto the segment a-b.
void append_segment_rule(Point a, Point b, int order, QuadratureRule& out);

/// Volume rule on the fluid part of an active element. Throws SolidElement.
QuadratureRule physical_quadrature(const BackgroundMesh& mesh, const CutClassification& cls,
                                   int element, int order);

/// Rule on the interface segment of a cut element, with normals. Throws NotCut.
QuadratureRule interface_quadrature(const BackgroundMesh& mesh, const CutClassification& cls,
                                    int element, int order);

/// Fluid part of a boundary facet, clipped along the P1 levelset restricted
/// to the facet. Empty if the facet is entirely solid.
QuadratureRule boundary_facet_quadrature(const BackgroundMesh& mesh, const CutClassification& cls,
                                         int facet, int order);

}  // namespace cutrom
