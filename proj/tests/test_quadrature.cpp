#include <cmath>
#include <numbers>
#include <random>

#include <doctest.h>

#include "cutrom/errors.hpp"
#include "cutrom/quadrature.hpp"

using namespace cutrom;

namespace {

// exact integral of x^a y^b over the reference triangle: a! b! / (a + b + 2)!
double monomial_integral(int a, int b) {
  return std::tgamma(a + 1.0) * std::tgamma(b + 1.0) / std::tgamma(a + b + 3.0);
}

double tri_area(const std::array<Point, 3>& p) {
  return 0.5 * std::abs((p[1].x - p[0].x) * (p[2].y - p[0].y) - (p[2].x - p[0].x) * (p[1].y - p[0].y));
}

struct Totals {
  double area = 0.0;
  double length = 0.0;
};

Totals cylinder_totals(double h) {
  const auto m = build_background_mesh({-2, -1, 2, 1}, h);
  const auto cls = classify_elements(m, orient_fluid_sign(LevelsetFamily::cylinder(0.2), 0.0, {0.0, 0.0}));
  Totals t;
  for (int e : cls.active_elements) {
    t.area += physical_quadrature(m, cls, e, 2).total_weight();
    if (cls.is_cut(e)) t.length += interface_quadrature(m, cls, e, 2).total_weight();
  }
  return t;
}

}  // namespace

TEST_CASE("triangle rules are exact to their order") {
  for (int order = 1; order <= 6; ++order) {
    const auto& r = triangle_rule(order);
    double sum = 0.0;
    for (double w : r.weights) {
      CHECK(w > 0.0);
      sum += w;
    }
    CHECK(sum == doctest::Approx(0.5).epsilon(1e-15));
    for (int a = 0; a <= order; ++a) {
      for (int b = 0; a + b <= order; ++b) {
        double q = 0.0;
        for (std::size_t i = 0; i < r.points.size(); ++i) {
          q += r.weights[i] * std::pow(r.points[i][0], a) * std::pow(r.points[i][1], b);
        }
        CHECK(q == doctest::Approx(monomial_integral(a, b)).epsilon(1e-13));
      }
    }
  }
  double q = 0.0;
  const auto& r6 = triangle_rule(6);
  for (std::size_t i = 0; i < r6.points.size(); ++i) {
    q += r6.weights[i] * std::pow(r6.points[i][0] * r6.points[i][1], 2);
  }
  CHECK(q == doctest::Approx(1.0 / 180.0).epsilon(1e-13));
  CHECK_THROWS(triangle_rule(0));
  CHECK_THROWS(triangle_rule(7));
}

TEST_CASE("segment rules") {
  const auto& r = segment_rule(3);
  double q = 0.0;
  for (std::size_t i = 0; i < r.points.size(); ++i) q += r.weights[i] * std::pow(r.points[i], 3);
  CHECK(q == doctest::Approx(0.25).epsilon(1e-15));
  for (int order = 1; order <= 12; ++order) {
    const auto& s = segment_rule(order);
    CHECK(static_cast<int>(s.points.size()) == (order + 2) / 2);
    double m = 0.0;
    for (std::size_t i = 0; i < s.points.size(); ++i) m += s.weights[i] * std::pow(s.points[i], order);
    CHECK(m == doctest::Approx(1.0 / (order + 1)).epsilon(1e-13));
  }
}

TEST_CASE("marching triangle on the unit right triangle") {
  const std::array<Point, 3> tri{Point{0, 0}, Point{1, 0}, Point{0, 1}};
  const auto one = decompose_cut_triangle(tri, {-1, 1, 1});
  CHECK(one.fluid_area() == doctest::Approx(0.125).epsilon(1e-15));
  CHECK(one.segment_length() == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));
  const auto two = decompose_cut_triangle(tri, {-1, -1, 1});
  CHECK(two.fluid_area() == doctest::Approx(0.375).epsilon(1e-15));
  // normal follows grad(chi) = (2, 2) for values (-1, 1, 1)
  CHECK(one.normal.x == doctest::Approx(std::sqrt(0.5)));
  CHECK(one.normal.y == doctest::Approx(std::sqrt(0.5)));
  CHECK_THROWS_AS(decompose_cut_triangle(tri, {-1, -1, -1}), NotCut);
  CHECK_THROWS_AS(decompose_cut_triangle(tri, {1, 2, 3}), NotCut);
}

TEST_CASE("random cuts: fluid and solid areas add up") {
  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::array<Point, 3> tri{Point{u(rng), u(rng)}, Point{u(rng), u(rng)}, Point{u(rng), u(rng)}};
    if (tri_area(tri) < 1e-3) continue;
    // counterclockwise
    if ((tri[1].x - tri[0].x) * (tri[2].y - tri[0].y) - (tri[2].x - tri[0].x) * (tri[1].y - tri[0].y) < 0) {
      std::swap(tri[1], tri[2]);
    }
    std::array<double, 3> v{u(rng), u(rng), u(rng)};
    const bool neg = v[0] < 0 || v[1] < 0 || v[2] < 0;
    const bool pos = v[0] > 0 || v[1] > 0 || v[2] > 0;
    if (!(neg && pos)) continue;
    const auto fluid = decompose_cut_triangle(tri, v);
    const auto solid = decompose_cut_triangle(tri, {-v[0], -v[1], -v[2]});
    CHECK(fluid.fluid_area() + solid.fluid_area() == doctest::Approx(tri_area(tri)).epsilon(1e-14));
    // segment end points lie on the zero line of the linear interpolant
    for (const Point& p : fluid.segment) {
      const double det = (tri[1].x - tri[0].x) * (tri[2].y - tri[0].y) - (tri[2].x - tri[0].x) * (tri[1].y - tri[0].y);
      const double l1 = ((p.x - tri[0].x) * (tri[2].y - tri[0].y) - (tri[2].x - tri[0].x) * (p.y - tri[0].y)) / det;
      const double l2 = ((tri[1].x - tri[0].x) * (p.y - tri[0].y) - (p.x - tri[0].x) * (tri[1].y - tri[0].y)) / det;
      const double chi = (1 - l1 - l2) * v[0] + l1 * v[1] + l2 * v[2];
      CHECK(std::abs(chi) <= 1e-13);
    }
    QuadratureRule r;
    for (const auto& sub : fluid.fluid_triangles) {
      CHECK(tri_area(sub) >= 0.0);
      append_mapped_rule(sub, 3, r);
    }
    for (double w : r.weights) CHECK(w > 0.0);
    CHECK(r.total_weight() == doctest::Approx(fluid.fluid_area()).epsilon(1e-13));
  }
}

TEST_CASE("half-plane fluid area and interface length are exact") {
  const auto m = build_background_mesh({-1, -1, 1, 1}, 0.15);
  const auto cls = classify_elements(m, [](double x, double) { return x - 0.1234; });
  double area = 0.0, length = 0.0;
  for (int e : cls.active_elements) {
    const auto q = physical_quadrature(m, cls, e, 2);
    if (cls.status[e] == CutStatus::Fluid) CHECK(q.total_weight() == doctest::Approx(m.area(e)).epsilon(1e-14));
    area += q.total_weight();
    if (cls.is_cut(e)) {
      const auto s = interface_quadrature(m, cls, e, 3);
      for (const Point& n : s.normals) {
        CHECK(std::hypot(n.x, n.y) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(n.x == doctest::Approx(1.0).epsilon(1e-12));
      }
      length += s.total_weight();
    }
  }
  CHECK(area == doctest::Approx(2.0 * 1.1234).epsilon(1e-13));
  CHECK(length == doctest::Approx(2.0).epsilon(1e-13));
}

TEST_CASE("quadrature on solid or uncut elements is rejected") {
  const auto m = build_background_mesh({-1, -1, 1, 1}, 0.5);
  const auto cls = classify_elements(m, [](double x, double) { return x - 0.1; });
  for (int t = 0; t < m.num_triangles(); ++t) {
    if (cls.status[t] == CutStatus::Solid) CHECK_THROWS_AS(physical_quadrature(m, cls, t, 2), SolidElement);
    if (cls.status[t] != CutStatus::Cut) CHECK_THROWS_AS(interface_quadrature(m, cls, t, 2), NotCut);
  }
}

TEST_CASE("boundary facet clipping") {
  const auto m = build_background_mesh({-1, -1, 1, 1}, 0.25);
  const auto cls = classify_elements(m, [](double x, double) { return x - 0.1; });
  double wall = 0.0;
  for (int f = 0; f < m.num_facets(); ++f) {
    const Facet& fc = m.facets()[f];
    if (fc.tag != BoundaryTag::Wall) continue;
    wall += boundary_facet_quadrature(m, cls, f, 2).total_weight();
  }
  // two walls, each fluid for x in [-1, 0.1]
  CHECK(wall == doctest::Approx(2.0 * 1.1).epsilon(1e-13));
}

TEST_CASE("cylinder area and perimeter converge at second order") {
  const double area = 8.0 - 0.04 * std::numbers::pi;
  const double perimeter = 0.4 * std::numbers::pi;
  const Totals c = cylinder_totals(0.14), f = cylinder_totals(0.07), ff = cylinder_totals(0.035);
  // |phi - I phi| <= |D^2 phi| d^2 / 8 with d = sqrt(2) h, moving the zero line
  // by at most that over |grad phi| = 2R along a perimeter of 2 pi R
  const double h = build_background_mesh({-2, -1, 2, 1}, 0.07).h();
  const double bound = 2.0 * std::numbers::pi * 0.2 * (2.0 * 2.0 * h * h / 8.0) / (2.0 * 0.2);
  CHECK(std::abs(f.area - area) <= bound);
  const double ra1 = std::abs(c.area - area) / std::abs(f.area - area);
  const double ra2 = std::abs(f.area - area) / std::abs(ff.area - area);
  const double rl1 = std::abs(c.length - perimeter) / std::abs(f.length - perimeter);
  const double rl2 = std::abs(f.length - perimeter) / std::abs(ff.length - perimeter);
  MESSAGE("area ratios " << ra1 << ", " << ra2 << "; length ratios " << rl1 << ", " << rl2);
  CHECK(ra2 >= 3.5);
  CHECK(ra2 <= 4.5);
  CHECK(rl2 >= 3.5);
  CHECK(rl2 <= 4.5);
}

TEST_CASE("cylinder interface normals point into the solid") {
  const auto m = build_background_mesh({-2, -1, 2, 1}, 0.07);
  const double theta = 0.3;
  const auto cls = classify_elements(m, orient_fluid_sign(LevelsetFamily::cylinder(0.2), theta, {0.0, 0.0}));
  for (int e : cls.active_elements) {
    if (!cls.is_cut(e)) continue;
    const auto q = interface_quadrature(m, cls, e, 3);
    for (std::size_t i = 0; i < q.size(); ++i) {
      const double d = q.normals[i].x * (q.points[i].x + 1.5) + q.normals[i].y * (q.points[i].y - theta);
      CHECK(d < 0.0);
    }
  }
}
