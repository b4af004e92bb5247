#include "cutrom/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "cutrom/errors.hpp"

namespace cutrom {
namespace {

constexpr int kVel = 12;
constexpr int kLoc = 15;
constexpr int kGhostVel = 24;
constexpr int kGhostLoc = 30;

double dot2(const std::array<double, 2>& a, Point b) { return a[0] * b.x + a[1] * b.y; }

// (H n) for a symmetric Hessian stored as (xx, xy, yy)
std::array<double, 2> hess_times(const std::array<double, 3>& h, Point n) {
  return {h[0] * n.x + h[1] * n.y, h[1] * n.x + h[2] * n.y};
}

void emit(std::vector<Triplet>& trip, const int* ld, int n, const double* k) {
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) trip.emplace_back(ld[i], ld[j], k[i * n + j]);
  }
}

}  // namespace

ElementGeometry::ElementGeometry(const std::array<Point, 3>& v) : vertices(v) {
  const double a = v[1].x - v[0].x, b = v[2].x - v[0].x;
  const double c = v[1].y - v[0].y, d = v[2].y - v[0].y;
  const double det = a * d - b * c;
  area = 0.5 * det;
  h_t = std::sqrt(2.0 * std::abs(area));
  grad_lambda[1] = {d / det, -b / det};
  grad_lambda[2] = {-c / det, a / det};
  grad_lambda[0] = {-grad_lambda[1].x - grad_lambda[2].x, -grad_lambda[1].y - grad_lambda[2].y};
  for (int i = 0; i < 3; ++i) {
    const Point g = grad_lambda[static_cast<std::size_t>(i)];
    hessian[static_cast<std::size_t>(i)] = {4.0 * g.x * g.x, 4.0 * g.x * g.y, 4.0 * g.y * g.y};
  }
  for (int k = 0; k < 3; ++k) {
    const Point g = grad_lambda[static_cast<std::size_t>(k)];
    const Point q = grad_lambda[static_cast<std::size_t>((k + 1) % 3)];
    hessian[static_cast<std::size_t>(3 + k)] = {8.0 * g.x * q.x, 4.0 * (g.x * q.y + q.x * g.y), 8.0 * g.y * q.y};
  }
}

std::array<double, 3> ElementGeometry::barycentric(Point x) const {
  const double dx = x.x - vertices[0].x;
  const double dy = x.y - vertices[0].y;
  const double l1 = grad_lambda[1].x * dx + grad_lambda[1].y * dy;
  const double l2 = grad_lambda[2].x * dx + grad_lambda[2].y * dy;
  return {1.0 - l1 - l2, l1, l2};
}

P2Values ElementGeometry::eval(Point x) const {
  P2Values v;
  v.lambda = barycentric(x);
  for (std::size_t i = 0; i < 3; ++i) {
    const double l = v.lambda[i];
    v.n[i] = l * (2.0 * l - 1.0);
    v.dn[i] = {(4.0 * l - 1.0) * grad_lambda[i].x, (4.0 * l - 1.0) * grad_lambda[i].y};
  }
  for (std::size_t k = 0; k < 3; ++k) {
    const std::size_t k1 = (k + 1) % 3;
    const double la = v.lambda[k], lb = v.lambda[k1];
    v.n[3 + k] = 4.0 * la * lb;
    v.dn[3 + k] = {4.0 * (lb * grad_lambda[k].x + la * grad_lambda[k1].x),
                   4.0 * (lb * grad_lambda[k].y + la * grad_lambda[k1].y)};
  }
  return v;
}

Assembler::Assembler(const CutSpace& space, PhysicsParams physics, StabilizationParams stab,
                     AssemblyOptions options)
    : space_(&space), physics_(std::move(physics)), stab_(stab), options_(options) {
  const BackgroundMesh& mesh = space.mesh();
  const CutClassification& cls = space.classification();
  h_ = options_.h > 0.0 ? options_.h : mesh.h();
  if (!(physics_.mu > 0.0)) throw ValidationError("viscosity must be positive");

  cache_of_element_.assign(static_cast<std::size_t>(mesh.num_triangles()), -1);
  elements_.reserve(cls.active_elements.size());
  for (int t : cls.active_elements) {
    ElementCache e;
    e.element = t;
    e.geom = ElementGeometry(mesh.triangle_points(t));
    const QuadratureRule vol = physical_quadrature(mesh, cls, t, options_.volume_order);
    for (std::size_t q = 0; q < vol.size(); ++q) {
      e.volume.push_back({vol.points[q], vol.weights[q], e.geom.eval(vol.points[q])});
    }
    if (cls.is_cut(t)) {
      const QuadratureRule ifc = interface_quadrature(mesh, cls, t, options_.interface_order);
      e.normal = ifc.normals.front();
      for (std::size_t q = 0; q < ifc.size(); ++q) {
        e.interface.push_back({ifc.points[q], ifc.weights[q], e.geom.eval(ifc.points[q])});
      }
    }
    cache_of_element_[static_cast<std::size_t>(t)] = static_cast<int>(elements_.size());
    elements_.push_back(std::move(e));
  }

  for (int f = 0; f < mesh.num_facets(); ++f) {
    const Facet& facet = mesh.facets()[static_cast<std::size_t>(f)];
    if (!facet.is_boundary() || !cls.is_active(facet.elements[0])) continue;
    const QuadratureRule rule = boundary_facet_quadrature(mesh, cls, f, options_.interface_order);
    if (rule.size() == 0) continue;
    BoundaryFacetCache b;
    b.element = facet.elements[0];
    b.cache = cache_of_element_[static_cast<std::size_t>(b.element)];
    b.tag = facet.tag;
    const Point& va = mesh.vertices()[static_cast<std::size_t>(facet.vertices[0])];
    const Point& vb = mesh.vertices()[static_cast<std::size_t>(facet.vertices[1])];
    if (va.x == vb.x) {
      b.normal = {va.x <= mesh.rect().x0 ? -1.0 : 1.0, 0.0};
    } else {
      b.normal = {0.0, va.y <= mesh.rect().y0 ? -1.0 : 1.0};
    }
    const ElementGeometry& g = elements_[static_cast<std::size_t>(b.cache)].geom;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      b.points.push_back({rule.points[q], rule.weights[q], g.eval(rule.points[q])});
    }
    boundary_.push_back(std::move(b));
  }

  for (int f : cls.ghost_facets) {
    const Facet& facet = mesh.facets()[static_cast<std::size_t>(f)];
    GhostFacetCache g;
    g.cache = {cache_of_element_[static_cast<std::size_t>(facet.elements[0])],
               cache_of_element_[static_cast<std::size_t>(facet.elements[1])]};
    const Point& a = mesh.vertices()[static_cast<std::size_t>(facet.vertices[0])];
    const Point& b = mesh.vertices()[static_cast<std::size_t>(facet.vertices[1])];
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    Point n{(b.y - a.y) / len, -(b.x - a.x) / len};
    const auto& g0 = elements_[static_cast<std::size_t>(g.cache[0])].geom;
    const auto& g1 = elements_[static_cast<std::size_t>(g.cache[1])].geom;
    const double c0x = (g0.vertices[0].x + g0.vertices[1].x + g0.vertices[2].x) / 3.0;
    const double c0y = (g0.vertices[0].y + g0.vertices[1].y + g0.vertices[2].y) / 3.0;
    const double c1x = (g1.vertices[0].x + g1.vertices[1].x + g1.vertices[2].x) / 3.0;
    const double c1y = (g1.vertices[0].y + g1.vertices[1].y + g1.vertices[2].y) / 3.0;
    if ((c1x - c0x) * n.x + (c1y - c0y) * n.y < 0.0) n = {-n.x, -n.y};
    g.normal = n;
    QuadratureRule rule;
    append_segment_rule(a, b, options_.ghost_order, rule);
    g.points = rule.points;
    g.weights = rule.weights;
    for (const Point& x : rule.points) g.values.push_back({g0.eval(x), g1.eval(x)});
    ghosts_.push_back(std::move(g));
  }
}

unsigned Assembler::default_terms() const {
  unsigned m = terms::kAll;
  if (!physics_.convection) m &= ~(terms::kConvection | terms::kInletConvection | terms::kGhostBeta);
  if (!physics_.inlet_convection_term) m &= ~terms::kInletConvection;
  if (!physics_.forcing) m &= ~terms::kForcing;
  if (!physics_.traction) m &= ~terms::kTraction;
  if (stab_.gamma_beta == 0.0) m &= ~terms::kGhostBeta;
  return m;
}

std::array<int, 15> Assembler::local_dofs(int element) const {
  const DofSystem& dofs = space_->dofs();
  std::array<int, 15> ld{};
  const auto vd = dofs.element_velocity_dofs(element);
  const auto pd = dofs.element_pressure_dofs(element);
  for (std::size_t i = 0; i < 12; ++i) ld[i] = space_->compact(vd[i]);
  for (std::size_t i = 0; i < 3; ++i) ld[12 + i] = space_->compact(dofs.nu() + pd[i]);
  return ld;
}

double Assembler::velocity_max(const ElementCache& e, const Vector& x, int* argmax) const {
  const auto ld = local_dofs(e.element);
  double best = -1.0;
  int arg = 0;
  for (int a = 0; a < 6; ++a) {
    const double m = std::hypot(x[ld[static_cast<std::size_t>(2 * a)]], x[ld[static_cast<std::size_t>(2 * a + 1)]]);
    if (m > best) {
      best = m;
      arg = a;
    }
  }
  if (argmax != nullptr) *argmax = arg;
  return best;
}

std::vector<double> Assembler::element_velocity_max(const Vector& w) const {
  Vector x = Vector::Zero(space_->size());
  x.head(w.size()) = w;
  std::vector<double> out(static_cast<std::size_t>(space_->mesh().num_triangles()), 0.0);
  for (const auto& e : elements_) out[static_cast<std::size_t>(e.element)] = velocity_max(e, x, nullptr);
  return out;
}

void Assembler::assemble_element(const ElementCache& e, const Vector& x, unsigned mask, bool jac,
                                 Vector& r, std::vector<Triplet>* trip) const {
  const auto ld = local_dofs(e.element);
  double w[6][2], p[3];
  for (int a = 0; a < 6; ++a) {
    w[a][0] = x[ld[static_cast<std::size_t>(2 * a)]];
    w[a][1] = x[ld[static_cast<std::size_t>(2 * a + 1)]];
  }
  for (int i = 0; i < 3; ++i) p[i] = x[ld[static_cast<std::size_t>(12 + i)]];
  double R[kLoc] = {};
  double K[kLoc * kLoc] = {};
  const double mu = physics_.mu;
  const bool visc = (mask & terms::kViscous) != 0;
  const bool conv = (mask & terms::kConvection) != 0;
  const bool pres = (mask & terms::kPressure) != 0;
  const bool forc = (mask & terms::kForcing) != 0 && physics_.forcing;
  const bool exact = options_.jacobian == JacobianMode::Exact;

  if (visc || conv || pres || forc) {
    for (const QuadPoint& qp : e.volume) {
      const P2Values& v = qp.v;
      double wv[2] = {0.0, 0.0}, G[2][2] = {{0.0, 0.0}, {0.0, 0.0}}, pv = 0.0;
      for (int a = 0; a < 6; ++a) {
        for (int c = 0; c < 2; ++c) {
          wv[c] += v.n[static_cast<std::size_t>(a)] * w[a][c];
          G[c][0] += w[a][c] * v.dn[static_cast<std::size_t>(a)][0];
          G[c][1] += w[a][c] * v.dn[static_cast<std::size_t>(a)][1];
        }
      }
      for (int i = 0; i < 3; ++i) pv += v.lambda[static_cast<std::size_t>(i)] * p[i];
      const double div = G[0][0] + G[1][1];
      const double cv[2] = {wv[0] * G[0][0] + wv[1] * G[0][1], wv[0] * G[1][0] + wv[1] * G[1][1]};
      Point f{0.0, 0.0};
      if (forc) f = physics_.forcing(qp.x.x, qp.x.y);
      const double fv[2] = {f.x, f.y};
      const double wq = qp.w;
      for (int a = 0; a < 6; ++a) {
        const double na = v.n[static_cast<std::size_t>(a)];
        const auto& da = v.dn[static_cast<std::size_t>(a)];
        for (int c = 0; c < 2; ++c) {
          double s = 0.0;
          if (visc) s += mu * (G[c][0] * da[0] + G[c][1] * da[1]);
          if (conv) s += cv[c] * na;
          if (pres) s -= pv * da[static_cast<std::size_t>(c)];
          if (forc) s -= fv[c] * na;
          R[2 * a + c] += wq * s;
        }
      }
      if (pres) {
        for (int i = 0; i < 3; ++i) R[12 + i] += wq * v.lambda[static_cast<std::size_t>(i)] * div;
      }
      if (!jac) continue;
      for (int a = 0; a < 6; ++a) {
        const double na = v.n[static_cast<std::size_t>(a)];
        const auto& da = v.dn[static_cast<std::size_t>(a)];
        for (int b = 0; b < 6; ++b) {
          const double nb = v.n[static_cast<std::size_t>(b)];
          const auto& db = v.dn[static_cast<std::size_t>(b)];
          const double lap = visc ? mu * (da[0] * db[0] + da[1] * db[1]) : 0.0;
          const double adv = conv ? na * (wv[0] * db[0] + wv[1] * db[1]) : 0.0;
          for (int c = 0; c < 2; ++c) {
            K[(2 * a + c) * kLoc + 2 * b + c] += wq * (lap + adv);
            if (conv) {
              for (int d = 0; d < 2; ++d) K[(2 * a + c) * kLoc + 2 * b + d] += wq * na * nb * G[c][d];
            }
          }
        }
        if (pres) {
          for (int j = 0; j < 3; ++j) {
            const double lj = v.lambda[static_cast<std::size_t>(j)];
            for (int c = 0; c < 2; ++c) {
              K[(2 * a + c) * kLoc + 12 + j] -= wq * lj * da[static_cast<std::size_t>(c)];
              K[(12 + j) * kLoc + 2 * a + c] += wq * lj * da[static_cast<std::size_t>(c)];
            }
          }
        }
      }
    }
  }

  const bool nits = (mask & terms::kNitsche) != 0;
  if (!e.interface.empty() && (nits || pres)) {
    const Point n = e.normal;
    const double nn[2] = {n.x, n.y};
    int amax = 0;
    const double umax = nits ? velocity_max(e, x, &amax) : 0.0;
    const double phi_t = mu + stab_.c_u * e.geom.h_t * umax;
    const double pen = stab_.gamma * mu / h_;
    const double pen_n = stab_.gamma_phi * phi_t / h_;
    for (const QuadPoint& qp : e.interface) {
      const P2Values& v = qp.v;
      double wv[2] = {0.0, 0.0}, Gn[2] = {0.0, 0.0}, pv = 0.0;
      double dnn[6];
      for (int a = 0; a < 6; ++a) {
        dnn[a] = dot2(v.dn[static_cast<std::size_t>(a)], n);
        for (int c = 0; c < 2; ++c) {
          wv[c] += v.n[static_cast<std::size_t>(a)] * w[a][c];
          Gn[c] += w[a][c] * dnn[a];
        }
      }
      for (int i = 0; i < 3; ++i) pv += v.lambda[static_cast<std::size_t>(i)] * p[i];
      const double wn = wv[0] * n.x + wv[1] * n.y;
      const double wq = qp.w;
      for (int a = 0; a < 6; ++a) {
        const double na = v.n[static_cast<std::size_t>(a)];
        for (int c = 0; c < 2; ++c) {
          double s = 0.0;
          if (nits) s += -mu * Gn[c] * na - mu * wv[c] * dnn[a] + pen * wv[c] * na + pen_n * wn * nn[c] * na;
          if (pres) s += pv * nn[c] * na;
          R[2 * a + c] += wq * s;
        }
      }
      if (pres) {
        for (int i = 0; i < 3; ++i) R[12 + i] -= wq * v.lambda[static_cast<std::size_t>(i)] * wn;
      }
      if (!jac) continue;
      for (int a = 0; a < 6; ++a) {
        const double na = v.n[static_cast<std::size_t>(a)];
        if (nits) {
          for (int b = 0; b < 6; ++b) {
            const double nb = v.n[static_cast<std::size_t>(b)];
            const double diag = -mu * dnn[b] * na - mu * nb * dnn[a] + pen * na * nb;
            for (int c = 0; c < 2; ++c) {
              K[(2 * a + c) * kLoc + 2 * b + c] += wq * diag;
              for (int d = 0; d < 2; ++d) K[(2 * a + c) * kLoc + 2 * b + d] += wq * pen_n * nb * nn[d] * nn[c] * na;
            }
          }
          if (exact && umax > 0.0) {
            const double scale = stab_.gamma_phi * stab_.c_u * e.geom.h_t / h_ / umax;
            for (int c = 0; c < 2; ++c) {
              for (int d = 0; d < 2; ++d) {
                K[(2 * a + c) * kLoc + 2 * amax + d] += wq * scale * wn * nn[c] * na * w[amax][d];
              }
            }
          }
        }
        if (pres) {
          for (int j = 0; j < 3; ++j) {
            const double lj = v.lambda[static_cast<std::size_t>(j)];
            for (int c = 0; c < 2; ++c) {
              K[(2 * a + c) * kLoc + 12 + j] += wq * lj * nn[c] * na;
              K[(12 + j) * kLoc + 2 * a + c] -= wq * lj * na * nn[c];
            }
          }
        }
      }
    }
  }

  for (int i = 0; i < kLoc; ++i) r[ld[static_cast<std::size_t>(i)]] += R[i];
  if (jac) emit(*trip, ld.data(), kLoc, K);
}

void Assembler::assemble_boundary(const BoundaryFacetCache& b, const Vector& x, unsigned mask,
                                  bool jac, Vector& r, std::vector<Triplet>* trip) const {
  const bool inlet = (mask & terms::kInletConvection) != 0 && b.tag == BoundaryTag::Inlet;
  const bool trac = (mask & terms::kTraction) != 0 && physics_.traction &&
                    (b.tag == BoundaryTag::Outlet || b.tag == BoundaryTag::Wall);
  if (!inlet && !trac) return;
  const auto ld = local_dofs(b.element);
  double w[6][2];
  for (int a = 0; a < 6; ++a) {
    w[a][0] = x[ld[static_cast<std::size_t>(2 * a)]];
    w[a][1] = x[ld[static_cast<std::size_t>(2 * a + 1)]];
  }
  double R[kLoc] = {};
  double K[kLoc * kLoc] = {};
  const double uin[2] = {physics_.u_in.x, physics_.u_in.y};
  const double nn[2] = {b.normal.x, b.normal.y};
  for (const QuadPoint& qp : b.points) {
    const P2Values& v = qp.v;
    double wv[2] = {0.0, 0.0};
    for (int a = 0; a < 6; ++a) {
      for (int c = 0; c < 2; ++c) wv[c] += v.n[static_cast<std::size_t>(a)] * w[a][c];
    }
    const double wn = wv[0] * nn[0] + wv[1] * nn[1];
    double t[2] = {0.0, 0.0};
    if (trac) {
      const Point tp = physics_.traction(qp.x.x, qp.x.y, b.normal);
      t[0] = tp.x;
      t[1] = tp.y;
    }
    for (int a = 0; a < 6; ++a) {
      const double na = v.n[static_cast<std::size_t>(a)];
      for (int c = 0; c < 2; ++c) {
        if (inlet) R[2 * a + c] -= qp.w * wn * uin[c] * na;
        if (trac) R[2 * a + c] -= qp.w * t[c] * na;
      }
      if (!jac || !inlet) continue;
      for (int bb = 0; bb < 6; ++bb) {
        const double nb = v.n[static_cast<std::size_t>(bb)];
        for (int c = 0; c < 2; ++c) {
          for (int d = 0; d < 2; ++d) K[(2 * a + c) * kLoc + 2 * bb + d] -= qp.w * nb * nn[d] * uin[c] * na;
        }
      }
    }
  }
  for (int i = 0; i < kLoc; ++i) r[ld[static_cast<std::size_t>(i)]] += R[i];
  if (jac) emit(*trip, ld.data(), kLoc, K);
}

void Assembler::assemble_ghost(const GhostFacetCache& g, const Vector& x, unsigned mask, bool jac,
                               Vector& r, std::vector<Triplet>* trip) const {
  const bool gu = (mask & terms::kGhostU) != 0;
  const bool gmu = (mask & terms::kGhostMu) != 0;
  const bool gp = (mask & terms::kGhostP) != 0;
  const bool gb = (mask & terms::kGhostBeta) != 0 && stab_.gamma_beta != 0.0;
  if (!gu && !gmu && !gp && !gb) return;
  const bool exact = options_.jacobian == JacobianMode::Exact;
  const double mu = physics_.mu;
  const double h = h_;

  const ElementCache* e[2] = {&elements_[static_cast<std::size_t>(g.cache[0])],
                              &elements_[static_cast<std::size_t>(g.cache[1])]};
  int ld[kGhostLoc];
  for (int s = 0; s < 2; ++s) {
    const auto l = local_dofs(e[s]->element);
    for (int i = 0; i < 12; ++i) ld[12 * s + i] = l[static_cast<std::size_t>(i)];
    for (int i = 0; i < 3; ++i) ld[kGhostVel + 3 * s + i] = l[static_cast<std::size_t>(12 + i)];
  }
  double wl[kGhostVel], pl[6];
  for (int i = 0; i < kGhostVel; ++i) wl[i] = x[ld[i]];
  for (int i = 0; i < 6; ++i) pl[i] = x[ld[kGhostVel + i]];

  // element velocity maxima and their gradients w.r.t. the 24 local velocity dofs
  double umax[2], ht[2], phi[2];
  int amax[2];
  double dU[2][kGhostVel] = {};
  for (int s = 0; s < 2; ++s) {
    umax[s] = velocity_max(*e[s], x, &amax[s]);
    ht[s] = e[s]->geom.h_t;
    phi[s] = mu + stab_.c_u * ht[s] * umax[s];
    if (umax[s] > 0.0) {
      for (int c = 0; c < 2; ++c) dU[s][12 * s + 2 * amax[s] + c] = wl[12 * s + 2 * amax[s] + c] / umax[s];
    }
  }
  const int smax = umax[0] >= umax[1] ? 0 : 1;
  const double uf = umax[smax];

  const Point n = g.normal;
  // per-side constant second-derivative data
  double hnn[2][6], hn[2][6][2];
  for (int s = 0; s < 2; ++s) {
    for (int a = 0; a < 6; ++a) {
      const auto hv = hess_times(e[s]->geom.hessian[static_cast<std::size_t>(a)], n);
      hn[s][a][0] = hv[0];
      hn[s][a][1] = hv[1];
      hnn[s][a] = hv[0] * n.x + hv[1] * n.y;
    }
  }
  double jp[6];
  for (int s = 0; s < 2; ++s) {
    const double sg = s == 0 ? 1.0 : -1.0;
    for (int i = 0; i < 3; ++i) {
      const Point gl = e[s]->geom.grad_lambda[static_cast<std::size_t>(i)];
      jp[3 * s + i] = sg * (gl.x * n.x + gl.y * n.y);
    }
  }

  double R[kGhostLoc] = {};
  static thread_local std::vector<double> Kbuf;
  Kbuf.assign(static_cast<std::size_t>(kGhostLoc * kGhostLoc), 0.0);
  double* K = Kbuf.data();

  auto penalty = [&](double s, const double* J) {
    double v = 0.0;
    for (int i = 0; i < kGhostVel; ++i) v += J[i] * wl[i];
    for (int i = 0; i < kGhostVel; ++i) R[i] += s * v * J[i];
    if (!jac) return v;
    for (int i = 0; i < kGhostVel; ++i) {
      if (J[i] == 0.0) continue;
      for (int j = 0; j < kGhostVel; ++j) K[i * kGhostLoc + j] += s * J[i] * J[j];
    }
    return v;
  };

  for (std::size_t q = 0; q < g.points.size(); ++q) {
    const double wq = g.weights[q];
    const auto& vals = g.values[q];
    double J1[2][kGhostVel] = {}, J2[2][kGhostVel] = {}, Jd0[kGhostVel] = {}, Jd1[kGhostVel] = {};
    for (int s = 0; s < 2; ++s) {
      const double sg = s == 0 ? 1.0 : -1.0;
      for (int a = 0; a < 6; ++a) {
        const auto& da = vals[static_cast<std::size_t>(s)].dn[static_cast<std::size_t>(a)];
        const double dn = da[0] * n.x + da[1] * n.y;
        for (int c = 0; c < 2; ++c) {
          const int i = 12 * s + 2 * a + c;
          J1[c][i] = sg * dn;
          J2[c][i] = sg * hnn[s][a];
          Jd0[i] = sg * da[static_cast<std::size_t>(c)];
          Jd1[i] = sg * hn[s][a][c];
        }
      }
    }

    if (gmu) {
      for (int c = 0; c < 2; ++c) {
        penalty(wq * stab_.gamma_mu * mu * h, J1[c]);
        penalty(wq * stab_.gamma_mu * mu * h * h * h, J2[c]);
      }
    }

    if (gu) {
      const double phif = 0.5 * (phi[0] + phi[1]);
      for (int j = 0; j <= std::min(stab_.ghost_u_max_j, 1); ++j) {
        const double hp = j == 0 ? h : h * h * h;
        const double* J = j == 0 ? Jd0 : Jd1;
        const double v = penalty(wq * stab_.gamma_u * phif * hp, J);
        if (jac && exact) {
          const double s = wq * stab_.gamma_u * hp * 0.5 * stab_.c_u * v;
          for (int i = 0; i < kGhostVel; ++i) {
            if (J[i] == 0.0) continue;
            for (int m = 0; m < kGhostVel; ++m) {
              K[i * kGhostLoc + m] += s * J[i] * (ht[0] * dU[0][m] + ht[1] * dU[1][m]);
            }
          }
        }
      }
    }

    if (gp) {
      const double ratio = h * uf / mu;
      const double omega = stab_.gamma_p * h * h * h / mu / std::max(ratio, 1.0);
      double v = 0.0;
      for (int i = 0; i < 6; ++i) v += jp[i] * pl[i];
      for (int i = 0; i < 6; ++i) R[kGhostVel + i] += wq * omega * v * jp[i];
      if (jac) {
        for (int i = 0; i < 6; ++i) {
          for (int j = 0; j < 6; ++j) K[(kGhostVel + i) * kGhostLoc + kGhostVel + j] += wq * omega * jp[i] * jp[j];
        }
        if (exact && ratio > 1.0) {
          const double domega = -stab_.gamma_p * h * h / (uf * uf);
          for (int i = 0; i < 6; ++i) {
            for (int m = 0; m < kGhostVel; ++m) {
              K[(kGhostVel + i) * kGhostLoc + m] += wq * v * jp[i] * domega * dU[smax][m];
            }
          }
        }
      }
    }

    if (gb) {
      const auto& v0 = vals[0];
      double wv[2] = {0.0, 0.0};
      for (int a = 0; a < 6; ++a) {
        for (int c = 0; c < 2; ++c) wv[c] += v0.n[static_cast<std::size_t>(a)] * wl[2 * a + c];
      }
      // Hn[c][k] = jump of d_k d_n w_c
      double Hn[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
      for (int s = 0; s < 2; ++s) {
        const double sg = s == 0 ? 1.0 : -1.0;
        for (int a = 0; a < 6; ++a) {
          for (int c = 0; c < 2; ++c) {
            for (int k = 0; k < 2; ++k) Hn[c][k] += sg * hn[s][a][k] * wl[12 * s + 2 * a + c];
          }
        }
      }
      double Jb[2][kGhostVel] = {};
      double V[2];
      for (int c = 0; c < 2; ++c) {
        V[c] = wv[0] * Hn[c][0] + wv[1] * Hn[c][1];
        for (int s = 0; s < 2; ++s) {
          const double sg = s == 0 ? 1.0 : -1.0;
          for (int a = 0; a < 6; ++a) Jb[c][12 * s + 2 * a + c] = sg * (wv[0] * hn[s][a][0] + wv[1] * hn[s][a][1]);
        }
      }
      const double phib = 0.5 * (ht[0] * ht[0] / phi[0] + ht[1] * ht[1] / phi[1]);
      const double omega = stab_.gamma_beta * phib * uf * uf * h;
      for (int c = 0; c < 2; ++c) {
        for (int i = 0; i < kGhostVel; ++i) R[i] += wq * omega * V[c] * Jb[c][i];
      }
      if (jac) {
        for (int c = 0; c < 2; ++c) {
          // dV_c/dw: through the jump (Jb) and through the advecting velocity
          double dV[kGhostVel];
          for (int m = 0; m < kGhostVel; ++m) dV[m] = Jb[c][m];
          if (exact) {
            for (int b = 0; b < 6; ++b) {
              for (int d = 0; d < 2; ++d) dV[2 * b + d] += v0.n[static_cast<std::size_t>(b)] * Hn[c][d];
            }
          }
          for (int i = 0; i < kGhostVel; ++i) {
            if (Jb[c][i] == 0.0) continue;
            for (int m = 0; m < kGhostVel; ++m) K[i * kGhostLoc + m] += wq * omega * Jb[c][i] * dV[m];
          }
          if (!exact) continue;
          // dJb_c/dw through the advecting velocity
          for (int s = 0; s < 2; ++s) {
            const double sg = s == 0 ? 1.0 : -1.0;
            for (int a = 0; a < 6; ++a) {
              const int i = 12 * s + 2 * a + c;
              for (int b = 0; b < 6; ++b) {
                for (int d = 0; d < 2; ++d) {
                  K[i * kGhostLoc + 2 * b + d] += wq * omega * V[c] * sg * v0.n[static_cast<std::size_t>(b)] * hn[s][a][d];
                }
              }
            }
          }
        }
        if (exact) {
          double domega[kGhostVel];
          for (int m = 0; m < kGhostVel; ++m) {
            double dphib = 0.0;
            for (int s = 0; s < 2; ++s) {
              dphib -= 0.5 * ht[s] * ht[s] / (phi[s] * phi[s]) * stab_.c_u * ht[s] * dU[s][m];
            }
            domega[m] = stab_.gamma_beta * h * (uf * uf * dphib + 2.0 * phib * uf * dU[smax][m]);
          }
          for (int c = 0; c < 2; ++c) {
            for (int i = 0; i < kGhostVel; ++i) {
              if (Jb[c][i] == 0.0) continue;
              for (int m = 0; m < kGhostVel; ++m) K[i * kGhostLoc + m] += wq * V[c] * Jb[c][i] * domega[m];
            }
          }
        }
      }
    }
  }

  for (int i = 0; i < kGhostLoc; ++i) r[ld[i]] += R[i];
  if (jac) emit(*trip, ld, kGhostLoc, K);
}

Linearization Assembler::residual(const Vector& x, bool with_jacobian, unsigned mask) const {
  if (x.size() != space_->size()) throw ShapeMismatch("residual: state has the wrong length");
  Linearization out;
  out.residual = Vector::Zero(space_->size());
  std::vector<Triplet> trip;
  if (with_jacobian) {
    trip.reserve(elements_.size() * kLoc * kLoc + ghosts_.size() * kGhostLoc * kGhostLoc);
  }
  std::vector<Triplet>* tp = with_jacobian ? &trip : nullptr;
  for (const auto& e : elements_) assemble_element(e, x, mask, with_jacobian, out.residual, tp);
  for (const auto& b : boundary_) assemble_boundary(b, x, mask, with_jacobian, out.residual, tp);
  for (const auto& g : ghosts_) assemble_ghost(g, x, mask, with_jacobian, out.residual, tp);
  if (with_jacobian) {
    out.jacobian.resize(space_->size(), space_->size());
    out.jacobian.setFromTriplets(trip.begin(), trip.end());
    out.jacobian.makeCompressed();
  }
  return out;
}

SparseMatrix Assembler::mass() const {
  std::vector<Triplet> trip;
  trip.reserve(elements_.size() * 72);
  for (const auto& e : elements_) {
    const auto ld = local_dofs(e.element);
    double K[12 * 12] = {};
    for (const QuadPoint& qp : e.volume) {
      for (int a = 0; a < 6; ++a) {
        for (int b = 0; b < 6; ++b) {
          const double m = qp.w * qp.v.n[static_cast<std::size_t>(a)] * qp.v.n[static_cast<std::size_t>(b)];
          K[(2 * a) * 12 + 2 * b] += m;
          K[(2 * a + 1) * 12 + 2 * b + 1] += m;
        }
      }
    }
    emit(trip, ld.data(), 12, K);
  }
  SparseMatrix m(space_->num_velocity(), space_->num_velocity());
  m.setFromTriplets(trip.begin(), trip.end());
  m.makeCompressed();
  return m;
}

std::pair<SparseMatrix, SparseMatrix> Assembler::convection_operators(const Vector& w) const {
  if (w.size() != space_->num_velocity()) throw ShapeMismatch("convection_operators: velocity length");
  Vector x = Vector::Zero(space_->size());
  x.head(w.size()) = w;
  const unsigned mask = terms::kConvection | (physics_.inlet_convection_term ? terms::kInletConvection : 0u);
  Linearization lin = residual(x, true, mask);
  const int nv = space_->num_velocity();
  SparseMatrix jc = lin.jacobian.topLeftCorner(nv, nv);
  // Picard operator: drop the ((u.grad)w, v) part
  std::vector<Triplet> trip;
  for (const auto& e : elements_) {
    const auto ld = local_dofs(e.element);
    double wl[6][2];
    for (int a = 0; a < 6; ++a) {
      wl[a][0] = x[ld[static_cast<std::size_t>(2 * a)]];
      wl[a][1] = x[ld[static_cast<std::size_t>(2 * a + 1)]];
    }
    double K[12 * 12] = {};
    for (const QuadPoint& qp : e.volume) {
      double wv[2] = {0.0, 0.0};
      for (int a = 0; a < 6; ++a) {
        for (int c = 0; c < 2; ++c) wv[c] += qp.v.n[static_cast<std::size_t>(a)] * wl[a][c];
      }
      for (int a = 0; a < 6; ++a) {
        for (int b = 0; b < 6; ++b) {
          const auto& db = qp.v.dn[static_cast<std::size_t>(b)];
          const double adv = qp.w * qp.v.n[static_cast<std::size_t>(a)] * (wv[0] * db[0] + wv[1] * db[1]);
          K[(2 * a) * 12 + 2 * b] += adv;
          K[(2 * a + 1) * 12 + 2 * b + 1] += adv;
        }
      }
    }
    emit(trip, ld.data(), 12, K);
  }
  SparseMatrix picard(nv, nv);
  picard.setFromTriplets(trip.begin(), trip.end());
  if ((mask & terms::kInletConvection) != 0) {
    Linearization inl = residual(x, true, terms::kInletConvection);
    picard += SparseMatrix(inl.jacobian.topLeftCorner(nv, nv));
  }
  picard.makeCompressed();
  jc.makeCompressed();
  return {picard, jc};
}

SparseMatrix Assembler::pressure_coupling() const {
  // continuity rows of the pressure terms carry -b_h(q, v)
  Linearization lin = residual(Vector::Zero(space_->size()), true, terms::kPressure);
  const int nv = space_->num_velocity();
  const int np = space_->num_pressure();
  SparseMatrix b = -SparseMatrix(lin.jacobian.bottomLeftCorner(np, nv));
  b.makeCompressed();
  return b;
}

SparseMatrix Assembler::supremizer_matrix() const {
  const BackgroundMesh& mesh = space_->mesh();
  const CutClassification& cls = space_->classification();
  const int order = options_.supremizer_order;
  std::vector<Triplet> trip;
  for (const auto& e : elements_) {
    const auto ld = local_dofs(e.element);
    double K[12 * 12] = {};
    const QuadratureRule vol = physical_quadrature(mesh, cls, e.element, order);
    for (std::size_t q = 0; q < vol.size(); ++q) {
      const P2Values v = e.geom.eval(vol.points[q]);
      for (int a = 0; a < 6; ++a) {
        for (int b = 0; b < 6; ++b) {
          const auto& da = v.dn[static_cast<std::size_t>(a)];
          const auto& db = v.dn[static_cast<std::size_t>(b)];
          const double s = vol.weights[q] * (da[0] * db[0] + da[1] * db[1]);
          K[(2 * a) * 12 + 2 * b] += s;
          K[(2 * a + 1) * 12 + 2 * b + 1] += s;
        }
      }
    }
    if (!e.interface.empty()) {
      const QuadratureRule ifc = interface_quadrature(mesh, cls, e.element, order);
      const double pen = stab_.lambda_s / h_;
      for (std::size_t q = 0; q < ifc.size(); ++q) {
        const P2Values v = e.geom.eval(ifc.points[q]);
        for (int a = 0; a < 6; ++a) {
          const double dna = dot2(v.dn[static_cast<std::size_t>(a)], e.normal);
          for (int b = 0; b < 6; ++b) {
            const double dnb = dot2(v.dn[static_cast<std::size_t>(b)], e.normal);
            const double na = v.n[static_cast<std::size_t>(a)];
            const double nb = v.n[static_cast<std::size_t>(b)];
            const double s = ifc.weights[q] * (-dnb * na - dna * nb + pen * na * nb);
            K[(2 * a) * 12 + 2 * b] += s;
            K[(2 * a + 1) * 12 + 2 * b + 1] += s;
          }
        }
      }
    }
    emit(trip, ld.data(), 12, K);
  }
  const double h = h_;
  for (const auto& g : ghosts_) {
    const ElementCache* e[2] = {&elements_[static_cast<std::size_t>(g.cache[0])],
                                &elements_[static_cast<std::size_t>(g.cache[1])]};
    int ld[kGhostVel];
    for (int s = 0; s < 2; ++s) {
      const auto l = local_dofs(e[s]->element);
      for (int i = 0; i < 12; ++i) ld[12 * s + i] = l[static_cast<std::size_t>(i)];
    }
    double K[kGhostVel * kGhostVel] = {};
    for (std::size_t q = 0; q < g.points.size(); ++q) {
      double J1[kGhostVel] = {}, J2[kGhostVel] = {};
      for (int s = 0; s < 2; ++s) {
        const double sg = s == 0 ? 1.0 : -1.0;
        for (int a = 0; a < 6; ++a) {
          const auto& da = g.values[q][static_cast<std::size_t>(s)].dn[static_cast<std::size_t>(a)];
          const auto hv = hess_times(e[s]->geom.hessian[static_cast<std::size_t>(a)], g.normal);
          // component 0 slots; component 1 handled by the block structure below
          J1[12 * s + 2 * a] = sg * (da[0] * g.normal.x + da[1] * g.normal.y);
          J2[12 * s + 2 * a] = sg * (hv[0] * g.normal.x + hv[1] * g.normal.y);
        }
      }
      const double w1 = g.weights[q] * stab_.gamma_s0 * h * h * h;
      const double w2 = g.weights[q] * stab_.gamma_s1 * h * h * h * h * h;
      for (int i = 0; i < kGhostVel; i += 2) {
        for (int j = 0; j < kGhostVel; j += 2) {
          const double s = w1 * J1[i] * J1[j] + w2 * J2[i] * J2[j];
          K[i * kGhostVel + j] += s;
          K[(i + 1) * kGhostVel + j + 1] += s;
        }
      }
    }
    emit(trip, ld, kGhostVel, K);
  }
  SparseMatrix k(space_->num_velocity(), space_->num_velocity());
  k.setFromTriplets(trip.begin(), trip.end());
  k.makeCompressed();
  return k;
}

Vector Assembler::supremizer_rhs(const Vector& p) const {
  if (p.size() != space_->num_pressure()) throw ShapeMismatch("supremizer_rhs: pressure length");
  const BackgroundMesh& mesh = space_->mesh();
  const CutClassification& cls = space_->classification();
  const int nv = space_->num_velocity();
  Vector rhs = Vector::Zero(nv);
  for (const auto& e : elements_) {
    const auto ld = local_dofs(e.element);
    Point gp{0.0, 0.0};
    for (int i = 0; i < 3; ++i) {
      const double pi = p[ld[static_cast<std::size_t>(12 + i)] - nv];
      gp.x += pi * e.geom.grad_lambda[static_cast<std::size_t>(i)].x;
      gp.y += pi * e.geom.grad_lambda[static_cast<std::size_t>(i)].y;
    }
    const QuadratureRule vol = physical_quadrature(mesh, cls, e.element, options_.supremizer_order);
    for (std::size_t q = 0; q < vol.size(); ++q) {
      const P2Values v = e.geom.eval(vol.points[q]);
      for (int a = 0; a < 6; ++a) {
        const double na = vol.weights[q] * v.n[static_cast<std::size_t>(a)];
        rhs[ld[static_cast<std::size_t>(2 * a)]] -= gp.x * na;
        rhs[ld[static_cast<std::size_t>(2 * a + 1)]] -= gp.y * na;
      }
    }
  }
  return rhs;
}

SparseMatrix assemble_background_velocity_mass(const DofSystem& dofs, int order) {
  const BackgroundMesh& mesh = dofs.mesh();
  const auto& ref = triangle_rule(order);
  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(mesh.num_triangles()) * 72);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const ElementGeometry g(mesh.triangle_points(t));
    QuadratureRule rule;
    append_mapped_rule(g.vertices, order, rule);
    double K[6][6] = {};
    for (std::size_t q = 0; q < ref.points.size(); ++q) {
      const P2Values v = g.eval(rule.points[q]);
      for (int a = 0; a < 6; ++a) {
        for (int b = 0; b < 6; ++b) K[a][b] += rule.weights[q] * v.n[static_cast<std::size_t>(a)] * v.n[static_cast<std::size_t>(b)];
      }
    }
    const auto& nodes = dofs.element_nodes(t);
    for (int a = 0; a < 6; ++a) {
      for (int b = 0; b < 6; ++b) {
        for (int c = 0; c < 2; ++c) {
          trip.emplace_back(2 * nodes[static_cast<std::size_t>(a)] + c, 2 * nodes[static_cast<std::size_t>(b)] + c, K[a][b]);
        }
      }
    }
  }
  SparseMatrix m(dofs.nu(), dofs.nu());
  m.setFromTriplets(trip.begin(), trip.end());
  m.makeCompressed();
  return m;
}

SparseMatrix assemble_background_pressure_mass(const DofSystem& dofs, int order) {
  const BackgroundMesh& mesh = dofs.mesh();
  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(mesh.num_triangles()) * 9);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const ElementGeometry g(mesh.triangle_points(t));
    QuadratureRule rule;
    append_mapped_rule(g.vertices, order, rule);
    double K[3][3] = {};
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const auto l = g.barycentric(rule.points[q]);
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) K[i][j] += rule.weights[q] * l[static_cast<std::size_t>(i)] * l[static_cast<std::size_t>(j)];
      }
    }
    const auto& tri = mesh.triangles()[static_cast<std::size_t>(t)];
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) trip.emplace_back(tri[static_cast<std::size_t>(i)], tri[static_cast<std::size_t>(j)], K[i][j]);
    }
  }
  SparseMatrix m(dofs.np(), dofs.np());
  m.setFromTriplets(trip.begin(), trip.end());
  m.makeCompressed();
  return m;
}

void write_coo(std::ostream& os, const SparseMatrix& a) {
  os.precision(17);
  os << "% rows " << a.rows() << " cols " << a.cols() << " nnz " << a.nonZeros() << '\n';
  for (int c = 0; c < a.outerSize(); ++c) {
    for (SparseMatrix::InnerIterator it(a, c); it; ++it) os << it.row() << ' ' << c << ' ' << it.value() << '\n';
  }
}

}  // namespace cutrom
