#include <algorithm>
#include <map>
#include <random>
#include <sstream>

#include <doctest.h>

#include "cutrom/errors.hpp"
#include "cutrom/fe_space.hpp"

using namespace cutrom;

namespace {

bool point_in_triangle(const std::array<Point, 3>& t, Point p) {
  auto cross = [](Point a, Point b, Point c) { return (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y); };
  const double d0 = cross(t[0], t[1], p), d1 = cross(t[1], t[2], p), d2 = cross(t[2], t[0], p);
  const double tol = 1e-12;
  return d0 >= -tol && d1 >= -tol && d2 >= -tol;
}

}  // namespace

TEST_CASE("dof counts on two triangles") {
  const auto m = build_background_mesh({0, 0, 1, 1}, 1.0);
  const DofSystem d(m);
  CHECK(m.num_vertices() == 4);
  CHECK(m.num_facets() == 5);
  CHECK(d.nu() == 18);
  CHECK(d.np() == 4);
  CHECK(d.size() == 22);
}

TEST_CASE("dof numbering is conforming and deterministic") {
  const auto m = build_background_mesh({-2, -1, 2, 1}, 0.25);
  const DofSystem d(m), e(m);
  CHECK(d.nu() == 2 * (m.num_vertices() + m.num_facets()));
  CHECK(d.np() == m.num_vertices());
  std::map<std::pair<long, long>, int> node_at;
  for (int t = 0; t < m.num_triangles(); ++t) {
    CHECK(d.element_nodes(t) == e.element_nodes(t));
    const auto pts = m.triangle_points(t);
    const auto nodes = d.element_nodes(t);
    for (int k = 0; k < 3; ++k) {
      const Point mid{0.5 * (pts[k].x + pts[(k + 1) % 3].x), 0.5 * (pts[k].y + pts[(k + 1) % 3].y)};
      CHECK(d.node(nodes[3 + k]).x == doctest::Approx(mid.x));
      CHECK(d.node(nodes[3 + k]).y == doctest::Approx(mid.y));
    }
    for (int a = 0; a < 6; ++a) {
      const Point p = d.node(nodes[a]);
      const auto key = std::make_pair(std::lround(p.x * 1e9), std::lround(p.y * 1e9));
      auto [it, fresh] = node_at.emplace(key, nodes[a]);
      CHECK(it->second == nodes[a]);  // one global index per location
    }
  }
  CHECK(static_cast<int>(node_at.size()) == d.num_nodes());
}

TEST_CASE("active dofs against a node-in-element scan") {
  const auto m = build_background_mesh({-1, -1, 1, 1}, 0.2);
  const DofSystem d(m);
  const auto cls = classify_elements(m, [](double x, double y) { return x + 0.3 * y - 0.15; });
  const auto a = active_dofs(d, cls);
  for (int n = 0; n < d.num_nodes(); ++n) {
    bool inside = false;
    for (int t : cls.active_elements) inside = inside || point_in_triangle(m.triangle_points(t), d.node(n));
    CHECK(static_cast<bool>(a.velocity[2 * n]) == inside);
    CHECK(static_cast<bool>(a.velocity[2 * n + 1]) == inside);
    if (n < m.num_vertices()) CHECK(static_cast<bool>(a.pressure[n]) == inside);
  }

  const auto all = classify_elements(m, [](double, double) { return -1.0; });
  const auto full = active_dofs(d, all);
  CHECK(full.velocity_count == d.nu());
  CHECK(full.pressure_count == d.np());
  const auto none = active_dofs(d, classify_elements(m, [](double, double) { return 1.0; }));
  CHECK(none.velocity_count == 0);
  CHECK(none.pressure_count == 0);
}

TEST_CASE("compact numbering round trips") {
  const auto m = build_background_mesh({-1, -1, 1, 1}, 0.25);
  const DofSystem d(m);
  const auto cls = classify_elements(m, [](double x, double y) { return x * x + y * y - 0.3; });
  const CutSpace s(d, cls);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  Vector c(s.size());
  for (auto& v : c) v = g(rng);
  CHECK((s.restrict(s.extend(c)) - c).norm() == 0.0);
  const Vector bu = s.extend_velocity(c.head(s.num_velocity()));
  const Vector bp = s.extend_pressure(c.tail(s.num_pressure()));
  CHECK((s.restrict_velocity(bu) - c.head(s.num_velocity())).norm() == 0.0);
  CHECK((s.restrict_pressure(bp) - c.tail(s.num_pressure())).norm() == 0.0);
  for (int i = 0; i < d.nu(); ++i) {
    if (!s.active().velocity[i]) CHECK(bu[i] == 0.0);
  }
  for (int i = 0; i < s.size(); ++i) CHECK(s.compact(s.global_indices()[i]) == i);
  CHECK(std::is_sorted(s.global_indices().begin(), s.global_indices().end()));
  CHECK_THROWS_AS(s.extend(Vector::Zero(3)), ShapeMismatch);
  CHECK_THROWS_AS(s.restrict_velocity(Vector::Zero(3)), ShapeMismatch);

  const auto all = classify_elements(m, [](double, double) { return -1.0; });
  const CutSpace id(d, all);
  CHECK(id.size() == d.size());
  for (int i = 0; i < d.size(); ++i) CHECK(id.compact(i) == i);
}

TEST_CASE("strong boundary sets and lifting") {
  const auto m = build_background_mesh({-2, -1, 2, 1}, 0.5);
  const DofSystem d(m);
  const auto all = classify_elements(m, [](double, double) { return -1.0; });
  const auto act = active_dofs(d, all);
  const auto bc = strong_bcs(d, act, {1.0, 0.0});
  // inlet: both components of the 2 ny + 1 inlet nodes
  CHECK(static_cast<int>(bc.inlet.size()) == 2 * (2 * m.ny() + 1));
  for (int dof : bc.inlet) CHECK(d.node(dof / 2).x == -2.0);
  for (int dof : bc.wall) {
    CHECK(dof % 2 == 1);
    CHECK(std::abs(d.node(dof / 2).y) == 1.0);
    CHECK(d.node(dof / 2).x > -2.0);
  }
  // walls: 2 nx + 1 nodes per wall, minus the inlet corner
  CHECK(static_cast<int>(bc.wall.size()) == 2 * (2 * m.nx()));
  const auto u = bc.all();
  CHECK(std::is_sorted(u.begin(), u.end()));
  CHECK(u.size() == bc.inlet.size() + bc.wall.size());

  const Vector l = lifting_field(d, {1.0, 0.0});
  for (int n = 0; n < d.num_nodes(); ++n) {
    CHECK(l[2 * n] == 1.0);
    CHECK(l[2 * n + 1] == 0.0);
  }
  CHECK_THROWS_AS(lifting_field(d, {0.0, 1.0}), IncompatibleLifting);

  const auto sup = all_boundary_velocity_dofs(d, act);
  CHECK(static_cast<int>(sup.size()) == 2 * 2 * (2 * m.nx() + 2 * m.ny()));
}

TEST_CASE("strong constraints on an identity matrix") {
  SparseMatrix a(4, 4);
  a.setIdentity();
  Vector rhs(4);
  rhs << 1, 2, 3, 4;
  apply_strong_bcs(a, rhs, {2}, {7.0});
  CHECK((Matrix(a) - Matrix::Identity(4, 4)).norm() == 0.0);
  CHECK(rhs[0] == 1.0);
  CHECK(rhs[1] == 2.0);
  CHECK(rhs[2] == 7.0);
  CHECK(rhs[3] == 4.0);
}

TEST_CASE("strong elimination matches a Lagrange multiplier solve") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int n = 9;
  Matrix dense = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) dense(i, j) = (i == j) ? 5.0 + u(rng) : ((i + j) % 3 == 0 ? u(rng) : 0.0);
  }
  Vector b(n);
  for (auto& v : b) v = u(rng);
  const std::vector<int> fixed{1, 4, 8};
  const std::vector<double> vals{0.5, -1.25, 2.0};

  Matrix kkt = Matrix::Zero(n + 3, n + 3);
  Vector r(n + 3);
  kkt.topLeftCorner(n, n) = dense;
  r.head(n) = b;
  for (int k = 0; k < 3; ++k) {
    kkt(n + k, fixed[k]) = 1.0;
    kkt(fixed[k], n + k) = 1.0;
    r[n + k] = vals[k];
  }
  const Vector ref = kkt.fullPivLu().solve(r).head(n);

  SparseMatrix a = dense.sparseView();
  Vector rhs = b;
  apply_strong_bcs(a, rhs, fixed, vals);
  const Vector x = Matrix(a).fullPivLu().solve(rhs);
  CHECK((x - ref).norm() <= 1e-12 * ref.norm());
  for (int k = 0; k < 3; ++k) CHECK(x[fixed[k]] == vals[k]);
  // symmetric elimination: constrained columns are cleared too
  for (int k = 0; k < 3; ++k) {
    for (int i = 0; i < n; ++i) {
      if (i != fixed[k]) CHECK(a.coeff(i, fixed[k]) == 0.0);
    }
  }
  CHECK_THROWS_AS(apply_strong_bcs(a, rhs, {1, 2}, {1.0}), ShapeMismatch);
}

TEST_CASE("dof CSV dump") {
  const auto m = build_background_mesh({0, 0, 1, 1}, 1.0);
  const DofSystem d(m);
  std::ostringstream os;
  write_dof_csv(os, d);
  std::istringstream is(os.str());
  std::string line;
  int rows = 0;
  std::getline(is, line);
  CHECK(line == "node,kind,x,y,boundary,dof_x,dof_y");
  while (std::getline(is, line)) ++rows;
  CHECK(rows == d.num_nodes());
}
