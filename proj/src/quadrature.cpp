#include "cutrom/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "cutrom/errors.hpp"

namespace cutrom {
namespace {

// Barycentric orbit helpers; a rule is stored as (lambda1, lambda2) = (xi, eta).
void add_orbit3(ReferenceTriangleRule& r, double w, double a, double b) {
  // permutations of (a, a, b)
  const std::array<std::array<double, 3>, 3> bary{{{a, a, b}, {a, b, a}, {b, a, a}}};
  for (const auto& l : bary) {
    r.points.push_back({l[1], l[2]});
    r.weights.push_back(w);
  }
}

void add_orbit6(ReferenceTriangleRule& r, double w, double a, double b, double c) {
  const std::array<std::array<double, 3>, 6> bary{
      {{a, b, c}, {a, c, b}, {b, a, c}, {b, c, a}, {c, a, b}, {c, b, a}}};
  for (const auto& l : bary) {
    r.points.push_back({l[1], l[2]});
    r.weights.push_back(w);
  }
}

void normalize(ReferenceTriangleRule& r) {
  double s = 0.0;
  for (double w : r.weights) s += w;
  for (double& w : r.weights) w *= 0.5 / s;
}

ReferenceTriangleRule make_triangle_rule(int order) {
  ReferenceTriangleRule r;
  if (order <= 1) {
    r.points.push_back({1.0 / 3.0, 1.0 / 3.0});
    r.weights.push_back(1.0);
  } else if (order == 2) {
    add_orbit3(r, 1.0, 1.0 / 6.0, 2.0 / 3.0);
  } else if (order <= 4) {
    add_orbit3(r, 0.223381589678011, 0.445948490915965, 0.108103018168070);
    add_orbit3(r, 0.109951743655322, 0.091576213509771, 0.816847572980459);
  } else if (order == 5) {
    r.points.push_back({1.0 / 3.0, 1.0 / 3.0});
    r.weights.push_back(0.225);
    add_orbit3(r, 0.132394152788506, 0.470142064105115, 0.059715871789770);
    add_orbit3(r, 0.125939180544827, 0.101286507323456, 0.797426985353087);
  } else {
    add_orbit3(r, 0.116786275726379, 0.249286745170910, 0.501426509658179);
    add_orbit3(r, 0.050844906370207, 0.063089014491502, 0.873821971016996);
    add_orbit6(r, 0.082851075618374, 0.053145049844817, 0.310352451033784, 0.636502499121399);
  }
  normalize(r);
  return r;
}

ReferenceSegmentRule make_gauss_legendre(int n) {
  ReferenceSegmentRule r;
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    r.points.push_back(0.5 * (1.0 - x));
    r.weights.push_back(1.0 / ((1.0 - x * x) * dp * dp));
  }
  return r;
}

double signed_area(const std::array<Point, 3>& t) {
  return 0.5 * ((t[1].x - t[0].x) * (t[2].y - t[0].y) - (t[2].x - t[0].x) * (t[1].y - t[0].y));
}

void push_ccw(std::vector<std::array<Point, 3>>& out, Point a, Point b, Point c) {
  std::array<Point, 3> t{a, b, c};
  if (signed_area(t) < 0.0) std::swap(t[1], t[2]);
  out.push_back(t);
}

Point crossing(Point a, Point b, double va, double vb) {
  const double s = va / (va - vb);
  return {a.x + s * (b.x - a.x), a.y + s * (b.y - a.y)};
}

double dist(Point a, Point b) { return std::hypot(b.x - a.x, b.y - a.y); }

}  // namespace

const ReferenceTriangleRule& triangle_rule(int order) {
  static const std::array<ReferenceTriangleRule, 6> rules{make_triangle_rule(1), make_triangle_rule(2),
                                                          make_triangle_rule(3), make_triangle_rule(4),
                                                          make_triangle_rule(5), make_triangle_rule(6)};
  if (order < 1 || order > 6) {
    throw ValidationError("triangle quadrature order must be in 1..6, got " + std::to_string(order));
  }
  return rules[static_cast<std::size_t>(order - 1)];
}

const ReferenceSegmentRule& segment_rule(int order) {
  static const std::array<ReferenceSegmentRule, 7> rules{
      make_gauss_legendre(1), make_gauss_legendre(2), make_gauss_legendre(3), make_gauss_legendre(4),
      make_gauss_legendre(5), make_gauss_legendre(6), make_gauss_legendre(7)};
  if (order < 1 || order > 12) {
    throw ValidationError("segment quadrature order must be in 1..12, got " + std::to_string(order));
  }
  return rules[static_cast<std::size_t>((order + 2) / 2 - 1)];
}

double QuadratureRule::total_weight() const {
  double s = 0.0;
  for (double w : weights) s += w;
  return s;
}

double CutDecomposition::fluid_area() const {
  double a = 0.0;
  for (const auto& t : fluid_triangles) a += signed_area(t);
  return a;
}

double CutDecomposition::segment_length() const { return dist(segment[0], segment[1]); }

CutDecomposition decompose_cut_triangle(const std::array<Point, 3>& tri,
                                        const std::array<double, 3>& values) {
  int nfluid = 0;
  for (double v : values) nfluid += v < 0.0 ? 1 : 0;
  if (nfluid == 0 || nfluid == 3) throw NotCut("triangle is not cut by the levelset");

  CutDecomposition d;
  // the vertex alone on its side
  int lone = 0;
  for (int i = 0; i < 3; ++i) {
    const bool fluid = values[static_cast<std::size_t>(i)] < 0.0;
    if ((nfluid == 1) == fluid) lone = i;
  }
  const int j = (lone + 1) % 3;
  const int k = (lone + 2) % 3;
  const auto P = [&](int i) { return tri[static_cast<std::size_t>(i)]; };
  const auto V = [&](int i) { return values[static_cast<std::size_t>(i)]; };
  const Point qj = crossing(P(lone), P(j), V(lone), V(j));
  const Point qk = crossing(P(lone), P(k), V(lone), V(k));
  d.segment = {qj, qk};

  if (nfluid == 1) {
    push_ccw(d.fluid_triangles, P(lone), qj, qk);
  } else {
    // quad j -> k -> qk -> qj, split along the shorter diagonal
    if (dist(P(j), qk) <= dist(P(k), qj)) {
      push_ccw(d.fluid_triangles, P(j), P(k), qk);
      push_ccw(d.fluid_triangles, P(j), qk, qj);
    } else {
      push_ccw(d.fluid_triangles, P(j), P(k), qj);
      push_ccw(d.fluid_triangles, P(k), qk, qj);
    }
  }

  // gradient of the linear interpolant
  const double det = (P(1).x - P(0).x) * (P(2).y - P(0).y) - (P(2).x - P(0).x) * (P(1).y - P(0).y);
  const double d1 = V(1) - V(0);
  const double d2 = V(2) - V(0);
  const double gx = (d1 * (P(2).y - P(0).y) - d2 * (P(1).y - P(0).y)) / det;
  const double gy = (d2 * (P(1).x - P(0).x) - d1 * (P(2).x - P(0).x)) / det;
  const double g = std::hypot(gx, gy);
  d.normal = {gx / g, gy / g};
  return d;
}

void append_mapped_rule(const std::array<Point, 3>& tri, int order, QuadratureRule& out) {
  const auto& ref = triangle_rule(order);
  const double jac = 2.0 * std::abs(signed_area(tri));
  for (std::size_t q = 0; q < ref.points.size(); ++q) {
    const double xi = ref.points[q][0];
    const double eta = ref.points[q][1];
    out.points.push_back({tri[0].x + xi * (tri[1].x - tri[0].x) + eta * (tri[2].x - tri[0].x),
                          tri[0].y + xi * (tri[1].y - tri[0].y) + eta * (tri[2].y - tri[0].y)});
    out.weights.push_back(ref.weights[q] * jac);
  }
}

void append_segment_rule(Point a, Point b, int order, QuadratureRule& out) {
  const auto& ref = segment_rule(order);
  const double len = dist(a, b);
  for (std::size_t q = 0; q < ref.points.size(); ++q) {
    const double s = ref.points[q];
    out.points.push_back({a.x + s * (b.x - a.x), a.y + s * (b.y - a.y)});
    out.weights.push_back(ref.weights[q] * len);
  }
}

QuadratureRule physical_quadrature(const BackgroundMesh& mesh, const CutClassification& cls,
                                   int element, int order) {
  QuadratureRule rule;
  const auto tri = mesh.triangle_points(element);
  switch (cls.status[static_cast<std::size_t>(element)]) {
    case CutStatus::Fluid:
      append_mapped_rule(tri, order, rule);
      break;
    case CutStatus::Cut: {
      const auto d = decompose_cut_triangle(tri, cls.element_values(mesh, element));
      for (const auto& t : d.fluid_triangles) append_mapped_rule(t, order, rule);
      break;
    }
    case CutStatus::Solid: {
      std::ostringstream os;
      os << "element " << element << " is solid";
      throw SolidElement(os.str());
    }
  }
  return rule;
}

QuadratureRule interface_quadrature(const BackgroundMesh& mesh, const CutClassification& cls,
                                    int element, int order) {
  if (!cls.is_cut(element)) {
    std::ostringstream os;
    os << "element " << element << " is not cut";
    throw NotCut(os.str());
  }
  const auto d = decompose_cut_triangle(mesh.triangle_points(element), cls.element_values(mesh, element));
  QuadratureRule rule;
  append_segment_rule(d.segment[0], d.segment[1], order, rule);
  rule.normals.assign(rule.points.size(), d.normal);
  return rule;
}

QuadratureRule boundary_facet_quadrature(const BackgroundMesh& mesh, const CutClassification& cls,
                                         int facet, int order) {
  const Facet& f = mesh.facets()[static_cast<std::size_t>(facet)];
  Point a = mesh.vertices()[static_cast<std::size_t>(f.vertices[0])];
  Point b = mesh.vertices()[static_cast<std::size_t>(f.vertices[1])];
  const double va = cls.vertex_values[static_cast<std::size_t>(f.vertices[0])];
  const double vb = cls.vertex_values[static_cast<std::size_t>(f.vertices[1])];
  QuadratureRule rule;
  if (va >= 0.0 && vb >= 0.0) return rule;
  if (va >= 0.0) {
    a = crossing(a, b, va, vb);
  } else if (vb >= 0.0) {
    b = crossing(a, b, va, vb);
  }
  append_segment_rule(a, b, order, rule);
  return rule;
}

}  // namespace cutrom
