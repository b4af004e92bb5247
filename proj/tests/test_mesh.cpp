#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include <doctest.h>

#include "cutrom/errors.hpp"
#include "cutrom/mesh.hpp"

using namespace cutrom;

namespace {

double signed_area(const std::array<Point, 3>& p) {
  return 0.5 * ((p[1].x - p[0].x) * (p[2].y - p[0].y) - (p[2].x - p[0].x) * (p[1].y - p[0].y));
}

}  // namespace

TEST_CASE("unit square with h = 0.5") {
  const auto m = build_background_mesh({0, 0, 1, 1}, 0.5);
  CHECK(m.nx() == 2);
  CHECK(m.ny() == 2);
  CHECK(m.num_triangles() == 8);
  CHECK(m.num_vertices() == 9);
  CHECK(m.num_facets() == 16);
}

TEST_CASE("reference rectangle with h = 0.07") {
  const auto m = build_background_mesh({-2, -1, 2, 1}, 0.07);
  CHECK(m.nx() == static_cast<int>(std::ceil(4.0 / 0.07)));
  CHECK(m.ny() == static_cast<int>(std::ceil(2.0 / 0.07)));
  CHECK(m.nx() == 58);
  CHECK(m.ny() == 29);
  CHECK(m.num_triangles() == 3364);
  CHECK(m.hx() == doctest::Approx(4.0 / 58).epsilon(1e-15));
  CHECK(m.hy() == doctest::Approx(2.0 / 29).epsilon(1e-15));
  // Euler characteristic of a disk: V - E + F = 1
  CHECK(m.num_vertices() - m.num_facets() + m.num_triangles() == 1);

  double total = 0.0;
  for (int t = 0; t < m.num_triangles(); ++t) {
    const auto p = m.triangle_points(t);
    CHECK(signed_area(p) > 0.0);
    total += m.area(t);
    CHECK(m.element_size(t) <= 0.07 * (1 + 1e-9));
    CHECK(m.longest_edge(t) >= m.element_size(t));
  }
  CHECK(std::abs(total - 8.0) <= 1e-12);
  CHECK(m.h() <= 0.07 * (1 + 1e-9));
}

TEST_CASE("facet topology") {
  const auto m = build_background_mesh({-1, -0.5, 1, 0.5}, 0.25);
  std::map<std::pair<int, int>, int> count;
  for (const auto& tri : m.triangles()) {
    for (int k = 0; k < 3; ++k) {
      const int a = tri[k], b = tri[(k + 1) % 3];
      ++count[{std::min(a, b), std::max(a, b)}];
    }
  }
  CHECK(static_cast<int>(count.size()) == m.num_facets());
  std::map<BoundaryTag, int> tags;
  for (int f = 0; f < m.num_facets(); ++f) {
    const Facet& fc = m.facets()[f];
    const auto key = std::make_pair(std::min(fc.vertices[0], fc.vertices[1]), std::max(fc.vertices[0], fc.vertices[1]));
    CHECK(count[key] == (fc.is_boundary() ? 1 : 2));
    CHECK((fc.tag == BoundaryTag::Interior) == !fc.is_boundary());
    ++tags[fc.tag];
    for (int s = 0; s < (fc.is_boundary() ? 1 : 2); ++s) {
      CHECK(m.element_facets()[fc.elements[s]][fc.local_edge[s]] == f);
    }
    const Point a = m.vertices()[fc.vertices[0]], b = m.vertices()[fc.vertices[1]];
    if (fc.tag == BoundaryTag::Inlet) CHECK((a.x == -1.0 && b.x == -1.0));
    if (fc.tag == BoundaryTag::Outlet) CHECK((a.x == 1.0 && b.x == 1.0));
    if (fc.tag == BoundaryTag::Wall) CHECK((std::abs(a.y) == 0.5 && a.y == b.y));
  }
  CHECK(tags[BoundaryTag::Inlet] == m.ny());
  CHECK(tags[BoundaryTag::Outlet] == m.ny());
  CHECK(tags[BoundaryTag::Wall] == 2 * m.nx());
}

TEST_CASE("degenerate rectangles") {
  CHECK_THROWS_AS(build_background_mesh({0, 0, 1, 1}, 0.0), DegenerateRect);
  CHECK_THROWS_AS(build_background_mesh({0, 0, 1, 1}, -0.1), DegenerateRect);
  CHECK_THROWS_AS(build_background_mesh({1, 0, 0, 1}, 0.1), DegenerateRect);
  CHECK_THROWS_AS(build_background_mesh({0, 0, 1, 0.05}, 0.1), DegenerateRect);
}

TEST_CASE("mesh construction is deterministic") {
  const auto a = build_background_mesh({-2, -1, 2, 1}, 0.14);
  const auto b = build_background_mesh({-2, -1, 2, 1}, 0.14);
  CHECK(a.triangles() == b.triangles());
  CHECK(a.vertices() == b.vertices());
}

TEST_CASE("all-fluid classification") {
  const auto m = build_background_mesh({0, 0, 1, 1}, 0.25);
  const auto cls = classify_elements(m, [](double, double) { return -1.0; });
  CHECK(cls.fluid_count == m.num_triangles());
  CHECK(cls.cut_count == 0);
  CHECK(cls.solid_count == 0);
  CHECK(static_cast<int>(cls.active_elements.size()) == m.num_triangles());
  CHECK(cls.ghost_facets.empty());
}

TEST_CASE("half-plane classification against a brute-force scan") {
  const auto m = build_background_mesh({-1, -1, 1, 1}, 0.2);
  const auto cls = classify_elements(m, [](double x, double) { return x - 0.05; });
  for (int t = 0; t < m.num_triangles(); ++t) {
    double lo = 1e9, hi = -1e9;
    for (const Point& p : m.triangle_points(t)) {
      lo = std::min(lo, p.x);
      hi = std::max(hi, p.x);
    }
    const CutStatus expect = hi < 0.05 ? CutStatus::Fluid : (lo > 0.05 ? CutStatus::Solid : CutStatus::Cut);
    CHECK(cls.status[t] == expect);
  }
  std::set<int> brute;
  for (int f = 0; f < m.num_facets(); ++f) {
    const Facet& fc = m.facets()[f];
    if (fc.is_boundary()) continue;
    const int a = fc.elements[0], b = fc.elements[1];
    if (cls.is_active(a) && cls.is_active(b) && (cls.is_cut(a) || cls.is_cut(b))) brute.insert(f);
  }
  CHECK(std::set<int>(cls.ghost_facets.begin(), cls.ghost_facets.end()) == brute);
  CHECK(static_cast<int>(cls.ghost_facets.size()) <= 3 * cls.cut_count);

  const auto cut_only = ghost_facets(m, cls, GhostFacetPolicy::CutCutOnly);
  for (int f : cut_only) {
    const Facet& fc = m.facets()[f];
    CHECK((cls.is_cut(fc.elements[0]) && cls.is_cut(fc.elements[1])));
  }
  CHECK(cut_only.size() <= cls.ghost_facets.size());
}

TEST_CASE("cylinder classification on the reference mesh") {
  const auto m = build_background_mesh({-2, -1, 2, 1}, 0.07);
  const auto ls = orient_fluid_sign(LevelsetFamily::cylinder(0.2), 0.0, {0.0, 0.0});
  const auto cls = classify_elements(m, ls);
  CHECK(cls.solid_count >= 1);
  CHECK(cls.cut_count >= 3);
  CHECK(cls.fluid_count + cls.cut_count + cls.solid_count == m.num_triangles());
  for (int t = 0; t < m.num_triangles(); ++t) {
    if (cls.status[t] == CutStatus::Fluid) continue;
    double x0 = 1e9, x1 = -1e9, y0 = 1e9, y1 = -1e9;
    for (const Point& p : m.triangle_points(t)) {
      x0 = std::min(x0, p.x), x1 = std::max(x1, p.x), y0 = std::min(y0, p.y), y1 = std::max(y1, p.y);
    }
    CHECK(x1 >= -1.7);
    CHECK(x0 <= -1.3);
    CHECK(y1 >= -0.2);
    CHECK(y0 <= 0.2);
  }
  for (int f : cls.ghost_facets) {
    const Facet& fc = m.facets()[f];
    CHECK(!fc.is_boundary());
    CHECK((cls.is_cut(fc.elements[0]) || cls.is_cut(fc.elements[1])));
  }
}

TEST_CASE("vertex values on the interface are snapped to the solid side") {
  const auto m = build_background_mesh({-1, -1, 1, 1}, 0.5);
  const auto cls = classify_elements(m, [](double x, double) { return x; });
  for (double v : cls.vertex_values) CHECK(v != 0.0);
  // vertices on x = 0 move to the solid side: left neighbours become slivers
  for (int t = 0; t < m.num_triangles(); ++t) {
    double hi = -1e9;
    for (const Point& p : m.triangle_points(t)) hi = std::max(hi, p.x);
    if (hi < 0.0) CHECK(cls.status[t] == CutStatus::Fluid);
    if (hi == 0.0) CHECK(cls.status[t] == CutStatus::Cut);
    if (hi > 0.0) CHECK(cls.status[t] != CutStatus::Fluid);
  }
  for (int v = 0; v < m.num_vertices(); ++v) {
    if (m.vertices()[v].x == 0.0) CHECK(cls.vertex_values[v] > 0.0);
    if (m.vertices()[v].x == 0.0) CHECK(cls.vertex_values[v] <= 1e-10 * m.h() * (1 + 1e-12));
  }
}

TEST_CASE("mesh VTK header grammar") {
  const auto m = build_background_mesh({0, 0, 1, 1}, 0.5);
  const auto cls = classify_elements(m, [](double x, double) { return x - 0.3; });
  std::ostringstream os;
  write_mesh_vtk(os, m, &cls);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "# vtk DataFile Version 3.0");
  std::getline(is, line);
  std::getline(is, line);
  CHECK(line == "ASCII");
  std::getline(is, line);
  CHECK(line == "DATASET UNSTRUCTURED_GRID");
  CHECK(os.str().find("POINTS 9 double") != std::string::npos);
  CHECK(os.str().find("CELLS 8 32") != std::string::npos);
  CHECK(os.str().find("CELL_DATA 8") != std::string::npos);
  CHECK(os.str().find("cut_status") != std::string::npos);
}
