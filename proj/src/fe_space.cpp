#include "cutrom/fe_space.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "cutrom/errors.hpp"

namespace cutrom {

DofSystem::DofSystem(const BackgroundMesh& mesh) : mesh_(&mesh) {
  const int nv = mesh.num_vertices();
  const int nf = mesh.num_facets();
  nodes_.reserve(static_cast<std::size_t>(nv + nf));
  node_boundary_.assign(static_cast<std::size_t>(nv + nf), 0);
  for (int v = 0; v < nv; ++v) {
    nodes_.push_back(mesh.vertices()[static_cast<std::size_t>(v)]);
    const auto g = mesh.vertex_grid(v);
    std::uint8_t mask = 0;
    if (g[0] == 0) mask |= kOnInlet;
    if (g[0] == mesh.nx()) mask |= kOnOutlet;
    if (g[1] == 0 || g[1] == mesh.ny()) mask |= kOnWall;
    node_boundary_[static_cast<std::size_t>(v)] = mask;
  }
  for (int f = 0; f < nf; ++f) {
    const Facet& facet = mesh.facets()[static_cast<std::size_t>(f)];
    const Point& a = mesh.vertices()[static_cast<std::size_t>(facet.vertices[0])];
    const Point& b = mesh.vertices()[static_cast<std::size_t>(facet.vertices[1])];
    nodes_.push_back({0.5 * (a.x + b.x), 0.5 * (a.y + b.y)});
    std::uint8_t mask = 0;
    switch (facet.tag) {
      case BoundaryTag::Inlet: mask = kOnInlet; break;
      case BoundaryTag::Outlet: mask = kOnOutlet; break;
      case BoundaryTag::Wall: mask = kOnWall; break;
      case BoundaryTag::Interior: break;
    }
    node_boundary_[static_cast<std::size_t>(nv + f)] = mask;
  }
  element_nodes_.resize(static_cast<std::size_t>(mesh.num_triangles()));
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles()[static_cast<std::size_t>(t)];
    const auto& ef = mesh.element_facets()[static_cast<std::size_t>(t)];
    element_nodes_[static_cast<std::size_t>(t)] = {tri[0], tri[1], tri[2], nv + ef[0], nv + ef[1], nv + ef[2]};
  }
}

std::array<int, 12> DofSystem::element_velocity_dofs(int t) const {
  const auto& n = element_nodes(t);
  std::array<int, 12> d{};
  for (std::size_t a = 0; a < 6; ++a) {
    d[2 * a] = 2 * n[a];
    d[2 * a + 1] = 2 * n[a] + 1;
  }
  return d;
}

std::array<int, 3> DofSystem::element_pressure_dofs(int t) const {
  return mesh_->triangles()[static_cast<std::size_t>(t)];
}

ActiveDofs active_dofs(const DofSystem& dofs, const CutClassification& cls) {
  ActiveDofs a;
  a.velocity.assign(static_cast<std::size_t>(dofs.nu()), 0);
  a.pressure.assign(static_cast<std::size_t>(dofs.np()), 0);
  for (int t : cls.active_elements) {
    for (int d : dofs.element_velocity_dofs(t)) a.velocity[static_cast<std::size_t>(d)] = 1;
    for (int d : dofs.element_pressure_dofs(t)) a.pressure[static_cast<std::size_t>(d)] = 1;
  }
  a.velocity_count = static_cast<int>(std::count(a.velocity.begin(), a.velocity.end(), 1));
  a.pressure_count = static_cast<int>(std::count(a.pressure.begin(), a.pressure.end(), 1));
  return a;
}

std::vector<int> BcSpec::all() const {
  std::vector<int> out = inlet;
  out.insert(out.end(), wall.begin(), wall.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

BcSpec strong_bcs(const DofSystem& dofs, const ActiveDofs& active, Point u_in) {
  BcSpec bc;
  bc.u_in = u_in;
  for (int n = 0; n < dofs.num_nodes(); ++n) {
    const auto mask = dofs.node_boundary(n);
    if (mask == 0) continue;
    const int dx = DofSystem::velocity_dof(n, 0);
    const int dy = DofSystem::velocity_dof(n, 1);
    if ((mask & DofSystem::kOnInlet) != 0) {
      if (active.velocity[static_cast<std::size_t>(dx)] != 0) {
        bc.inlet.push_back(dx);
        bc.inlet.push_back(dy);
      }
    } else if ((mask & DofSystem::kOnWall) != 0) {
      if (active.velocity[static_cast<std::size_t>(dy)] != 0) bc.wall.push_back(dy);
    }
  }
  return bc;
}

std::vector<int> all_boundary_velocity_dofs(const DofSystem& dofs, const ActiveDofs& active) {
  std::vector<int> out;
  for (int n = 0; n < dofs.num_nodes(); ++n) {
    if (dofs.node_boundary(n) == 0) continue;
    for (int c = 0; c < 2; ++c) {
      const int d = DofSystem::velocity_dof(n, c);
      if (active.velocity[static_cast<std::size_t>(d)] != 0) out.push_back(d);
    }
  }
  return out;
}

Vector lifting_field(const DofSystem& dofs, Point u_in) {
  if (u_in.y != 0.0) {
    throw IncompatibleLifting("a constant lifting needs u_in tangential to the horizontal walls");
  }
  Vector l(dofs.nu());
  for (int n = 0; n < dofs.num_nodes(); ++n) {
    l[2 * n] = u_in.x;
    l[2 * n + 1] = u_in.y;
  }
  return l;
}

Vector interpolate_velocity(const DofSystem& dofs, const std::function<Point(double, double)>& f) {
  Vector u(dofs.nu());
  for (int n = 0; n < dofs.num_nodes(); ++n) {
    const Point v = f(dofs.node(n).x, dofs.node(n).y);
    u[2 * n] = v.x;
    u[2 * n + 1] = v.y;
  }
  return u;
}

Vector interpolate_pressure(const DofSystem& dofs, const std::function<double(double, double)>& f) {
  Vector p(dofs.np());
  for (int v = 0; v < dofs.np(); ++v) p[v] = f(dofs.node(v).x, dofs.node(v).y);
  return p;
}

CutSpace::CutSpace(const DofSystem& dofs, const CutClassification& cls)
    : dofs_(&dofs), cls_(cls), active_(active_dofs(dofs, cls)) {
  compact_.assign(static_cast<std::size_t>(dofs.size()), -1);
  global_.reserve(static_cast<std::size_t>(active_.velocity_count + active_.pressure_count));
  for (int d = 0; d < dofs.nu(); ++d) {
    if (active_.velocity[static_cast<std::size_t>(d)] == 0) continue;
    compact_[static_cast<std::size_t>(d)] = static_cast<int>(global_.size());
    global_.push_back(d);
  }
  for (int d = 0; d < dofs.np(); ++d) {
    if (active_.pressure[static_cast<std::size_t>(d)] == 0) continue;
    compact_[static_cast<std::size_t>(dofs.nu() + d)] = static_cast<int>(global_.size());
    global_.push_back(dofs.nu() + d);
  }
}

Vector CutSpace::restrict(const Vector& background) const {
  if (background.size() != dofs_->size()) throw ShapeMismatch("restrict: expected a combined background vector");
  Vector out(size());
  for (int i = 0; i < size(); ++i) out[i] = background[global_[static_cast<std::size_t>(i)]];
  return out;
}

Vector CutSpace::extend(const Vector& compact) const {
  if (compact.size() != size()) throw ShapeMismatch("extend: expected a compact vector");
  Vector out = Vector::Zero(dofs_->size());
  for (int i = 0; i < size(); ++i) out[global_[static_cast<std::size_t>(i)]] = compact[i];
  return out;
}

Vector CutSpace::restrict_velocity(const Vector& background_u) const {
  if (background_u.size() != dofs_->nu()) throw ShapeMismatch("restrict_velocity: size mismatch");
  Vector out(num_velocity());
  for (int i = 0; i < num_velocity(); ++i) out[i] = background_u[global_[static_cast<std::size_t>(i)]];
  return out;
}

Vector CutSpace::extend_velocity(const Vector& compact_u) const {
  if (compact_u.size() != num_velocity()) throw ShapeMismatch("extend_velocity: size mismatch");
  Vector out = Vector::Zero(dofs_->nu());
  for (int i = 0; i < num_velocity(); ++i) out[global_[static_cast<std::size_t>(i)]] = compact_u[i];
  return out;
}

Vector CutSpace::restrict_pressure(const Vector& background_p) const {
  if (background_p.size() != dofs_->np()) throw ShapeMismatch("restrict_pressure: size mismatch");
  Vector out(num_pressure());
  const int nu = dofs_->nu();
  for (int i = 0; i < num_pressure(); ++i) {
    out[i] = background_p[global_[static_cast<std::size_t>(num_velocity() + i)] - nu];
  }
  return out;
}

Vector CutSpace::extend_pressure(const Vector& compact_p) const {
  if (compact_p.size() != num_pressure()) throw ShapeMismatch("extend_pressure: size mismatch");
  Vector out = Vector::Zero(dofs_->np());
  const int nu = dofs_->nu();
  for (int i = 0; i < num_pressure(); ++i) {
    out[global_[static_cast<std::size_t>(num_velocity() + i)] - nu] = compact_p[i];
  }
  return out;
}

SparseMatrix CutSpace::to_background(const SparseMatrix& op) const {
  const int nr = op.rows() == num_velocity() ? dofs_->nu() : dofs_->size();
  const int nc = op.cols() == num_velocity() ? dofs_->nu() : dofs_->size();
  if ((op.rows() != num_velocity() && op.rows() != size()) ||
      (op.cols() != num_velocity() && op.cols() != size())) {
    throw ShapeMismatch("to_background: operator is not compact-indexed");
  }
  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(op.nonZeros()));
  for (int c = 0; c < op.outerSize(); ++c) {
    for (SparseMatrix::InnerIterator it(op, c); it; ++it) {
      trip.emplace_back(global_[static_cast<std::size_t>(it.row())], global_[static_cast<std::size_t>(c)],
                        it.value());
    }
  }
  SparseMatrix out(nr, nc);
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

void apply_strong_bcs(SparseMatrix& a, Vector& rhs, const std::vector<int>& dofs,
                      const std::vector<double>& values) {
  if (a.rows() != a.cols() || rhs.size() != a.rows()) throw ShapeMismatch("apply_strong_bcs: shape mismatch");
  if (!values.empty() && values.size() != dofs.size()) throw ShapeMismatch("apply_strong_bcs: value count");
  std::vector<char> fixed(static_cast<std::size_t>(a.rows()), 0);
  std::vector<double> g(static_cast<std::size_t>(a.rows()), 0.0);
  for (std::size_t i = 0; i < dofs.size(); ++i) {
    fixed[static_cast<std::size_t>(dofs[i])] = 1;
    g[static_cast<std::size_t>(dofs[i])] = values.empty() ? 0.0 : values[i];
  }
  // guarantee a diagonal slot for every constrained row
  bool missing = false;
  for (int d : dofs) {
    if (a.coeff(d, d) == 0.0) {
      missing = true;
      break;
    }
  }
  if (missing) {
    for (int d : dofs) a.coeffRef(d, d) += 0.0;
    a.makeCompressed();
  }
  for (int c = 0; c < a.outerSize(); ++c) {
    const bool cfix = fixed[static_cast<std::size_t>(c)] != 0;
    for (SparseMatrix::InnerIterator it(a, c); it; ++it) {
      const bool rfix = fixed[static_cast<std::size_t>(it.row())] != 0;
      if (cfix && !rfix) rhs[it.row()] -= it.value() * g[static_cast<std::size_t>(c)];
      if (cfix || rfix) it.valueRef() = (it.row() == c) ? 1.0 : 0.0;
    }
  }
  for (int d : dofs) rhs[d] = g[static_cast<std::size_t>(d)];
}

void write_dof_csv(std::ostream& os, const DofSystem& dofs) {
  os << "node,kind,x,y,boundary,dof_x,dof_y\n";
  os.precision(17);
  for (int n = 0; n < dofs.num_nodes(); ++n) {
    const Point& p = dofs.node(n);
    os << n << ',' << (dofs.node_kind(n) == NodeKind::Vertex ? "vertex" : "edge") << ',' << p.x << ','
       << p.y << ',' << static_cast<int>(dofs.node_boundary(n)) << ',' << 2 * n << ',' << 2 * n + 1 << '\n';
  }
}

}  // namespace cutrom
