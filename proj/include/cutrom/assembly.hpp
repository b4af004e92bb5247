#pragma once

// Discrete forms on one active space. All operators and residuals use the
// compact numbering of CutSpace: [active velocity | active pressure].
// Velocity arguments are always the full field (homogeneous part plus
// lifting).

#include <array>
#include <functional>
#include <vector>

#include "cutrom/fe_space.hpp"
#include "cutrom/linalg.hpp"
#include "cutrom/quadrature.hpp"

namespace cutrom {

struct StabilizationParams {
  double gamma = 10.0;      // Nitsche penalty
  double gamma_phi = 10.0;  // Nitsche normal penalty
  double gamma_u = 1e-3;    // divergence ghost penalty
  double gamma_p = 0.1;     // pressure ghost penalty
  double gamma_mu = 0.1;    // viscous ghost penalty
  double gamma_beta = 0.0;  // convective ghost penalty
  double alpha = 0.1;       // kept for completeness; no form uses it
  double c_u = 1.0;
  double lambda_s = 10.0;   // supremizer Nitsche penalty
  double gamma_s0 = 0.1;    // supremizer ghost, first normal derivative
  double gamma_s1 = 0.01;   // supremizer ghost, second normal derivative
  int ghost_u_max_j = 1;    // 0 or 1
  friend bool operator==(const StabilizationParams&, const StabilizationParams&) = default;
};

using VectorField = std::function<Point(double, double)>;
/// Traction t(x, y, n) prescribed on the natural boundary (outlet, and the
/// tangential component on walls).
using TractionField = std::function<Point(double, double, Point)>;

struct PhysicsParams {
  double mu = 0.05;
  Point u_in{1.0, 0.0};
  bool convection = true;
  bool inlet_convection_term = true;
  VectorField forcing;      // empty: zero
  TractionField traction;   // empty: zero (do-nothing outlet, free slip)
};

enum class JacobianMode { Exact, Frozen };

struct AssemblyOptions {
  int volume_order = 5;
  int interface_order = 5;
  int supremizer_order = 3;
  int ghost_order = 5;
  double h = 0.0;  // <= 0: use mesh.h()
  JacobianMode jacobian = JacobianMode::Exact;
};

/// Bit flags selecting terms of the residual.
namespace terms {
constexpr unsigned kViscous = 1u << 0;
constexpr unsigned kNitsche = 1u << 1;
constexpr unsigned kPressure = 1u << 2;   // b_h in momentum and continuity
constexpr unsigned kConvection = 1u << 3;
constexpr unsigned kInletConvection = 1u << 4;
constexpr unsigned kForcing = 1u << 5;
constexpr unsigned kTraction = 1u << 6;
constexpr unsigned kGhostU = 1u << 7;
constexpr unsigned kGhostMu = 1u << 8;
constexpr unsigned kGhostP = 1u << 9;
constexpr unsigned kGhostBeta = 1u << 10;
constexpr unsigned kAll = (1u << 11) - 1;
}  // namespace terms

struct Linearization {
  Vector residual;
  SparseMatrix jacobian;  // empty when not requested
};

/// P2/P1 basis values at one point of one element.
struct P2Values {
  std::array<double, 6> n{};
  std::array<std::array<double, 2>, 6> dn{};
  std::array<double, 3> lambda{};
};

struct ElementGeometry {
  std::array<Point, 3> vertices{};
  std::array<Point, 3> grad_lambda{};
  /// Hessian (xx, xy, yy) of each P2 basis function; constant per element.
  std::array<std::array<double, 3>, 6> hessian{};
  double area = 0.0;
  double h_t = 0.0;

  explicit ElementGeometry(const std::array<Point, 3>& v);
  ElementGeometry() = default;
  std::array<double, 3> barycentric(Point x) const;
  P2Values eval(Point x) const;
};

class Assembler {
 public:
  Assembler(const CutSpace& space, PhysicsParams physics, StabilizationParams stab,
            AssemblyOptions options = {});

  const CutSpace& space() const { return *space_; }
  const PhysicsParams& physics() const { return physics_; }
  const StabilizationParams& stabilization() const { return stab_; }
  const AssemblyOptions& options() const { return options_; }
  double h() const { return h_; }

  /// Default term set implied by the physics flags.
  unsigned default_terms() const;

  /// Residual (and optionally Jacobian) of the selected terms at the compact
  /// state x = [full velocity | pressure].
  Linearization residual(const Vector& x, bool with_jacobian, unsigned mask) const;
  Linearization residual(const Vector& x, bool with_jacobian) const {
    return residual(x, with_jacobian, default_terms());
  }

  /// Velocity mass on the fluid part (velocity x velocity block).
  SparseMatrix mass() const;
  /// Picard operator ((w.grad)u, v) and full linearization of the
  /// convection term at w (velocity x velocity blocks).
  std::pair<SparseMatrix, SparseMatrix> convection_operators(const Vector& w) const;
  /// Pressure coupling B[q, v] = b_h(q, v) (pressure rows x velocity cols).
  SparseMatrix pressure_coupling() const;

  /// Supremizer operator on the active velocity block and its right-hand
  /// side for compact pressure p.
  SparseMatrix supremizer_matrix() const;
  Vector supremizer_rhs(const Vector& p) const;

  /// max over element nodes of |w| for every active element (indexed by
  /// element id; zero on solid elements).
  std::vector<double> element_velocity_max(const Vector& w) const;

 private:
  struct QuadPoint {
    Point x;
    double w;
    P2Values v;
  };
  struct ElementCache {
    int element = -1;
    ElementGeometry geom;
    std::vector<QuadPoint> volume;
    std::vector<QuadPoint> interface;
    Point normal{};
  };
  struct BoundaryFacetCache {
    int element = -1;
    int cache = -1;
    BoundaryTag tag = BoundaryTag::Interior;
    Point normal{};
    std::vector<QuadPoint> points;
  };
  struct GhostFacetCache {
    std::array<int, 2> cache{};
    Point normal{};  // from side 0 into side 1
    std::vector<Point> points;
    std::vector<double> weights;
    std::vector<std::array<P2Values, 2>> values;
  };

  void assemble_element(const ElementCache& e, const Vector& x, unsigned mask, bool jac,
                        Vector& r, std::vector<Triplet>* trip) const;
  void assemble_boundary(const BoundaryFacetCache& b, const Vector& x, unsigned mask, bool jac,
                         Vector& r, std::vector<Triplet>* trip) const;
  void assemble_ghost(const GhostFacetCache& g, const Vector& x, unsigned mask, bool jac,
                      Vector& r, std::vector<Triplet>* trip) const;

  std::array<int, 15> local_dofs(int element) const;
  double velocity_max(const ElementCache& e, const Vector& x, int* argmax) const;

  const CutSpace* space_;
  PhysicsParams physics_;
  StabilizationParams stab_;
  AssemblyOptions options_;
  double h_ = 0.0;
  std::vector<ElementCache> elements_;
  std::vector<int> cache_of_element_;
  std::vector<BoundaryFacetCache> boundary_;
  std::vector<GhostFacetCache> ghosts_;
};

/// Velocity mass over the whole rectangle (background numbering, nu x nu).
SparseMatrix assemble_background_velocity_mass(const DofSystem& dofs, int order = 5);
/// P1 pressure mass over the whole rectangle (np x np).
SparseMatrix assemble_background_pressure_mass(const DofSystem& dofs, int order = 5);

/// Coordinate-format dump "row col value" of a sparse operator.
void write_coo(std::ostream& os, const SparseMatrix& a);

}  // namespace cutrom
