#pragma once

// P2 vector velocity / P1 pressure numbering on the background mesh, the
// active subset for one classification, and strong boundary constraints.
//
// Combined background layout: [velocity (nu) | pressure (np)], with velocity
// dof 2*node + component and pressure dof = vertex index. Nodes are the mesh
// vertices followed by the edge midpoints (edge node = num_vertices + facet).

#include <array>
#include <functional>
#include <iosfwd>
#include <vector>

#include "cutrom/linalg.hpp"
#include "cutrom/mesh.hpp"

namespace cutrom {

enum class NodeKind : std::uint8_t { Vertex = 0, Edge = 1 };

class DofSystem {
 public:
  explicit DofSystem(const BackgroundMesh& mesh);

  const BackgroundMesh& mesh() const { return *mesh_; }
  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  int nu() const { return 2 * num_nodes(); }
  int np() const { return mesh_->num_vertices(); }
  int size() const { return nu() + np(); }

  const Point& node(int n) const { return nodes_[static_cast<std::size_t>(n)]; }
  NodeKind node_kind(int n) const { return n < mesh_->num_vertices() ? NodeKind::Vertex : NodeKind::Edge; }
  /// Bitmask of kOnInlet / kOnOutlet / kOnWall (corners carry two bits).
  std::uint8_t node_boundary(int n) const { return node_boundary_[static_cast<std::size_t>(n)]; }

  static constexpr std::uint8_t kOnInlet = 1;
  static constexpr std::uint8_t kOnOutlet = 2;
  static constexpr std::uint8_t kOnWall = 4;

  /// Six P2 nodes: three vertices, then the midpoints of local edges 0,1,2.
  const std::array<int, 6>& element_nodes(int t) const { return element_nodes_[static_cast<std::size_t>(t)]; }
  /// Twelve velocity dofs ordered 2*local_node + component.
  std::array<int, 12> element_velocity_dofs(int t) const;
  /// Three pressure dofs (vertex indices).
  std::array<int, 3> element_pressure_dofs(int t) const;

  static int velocity_dof(int node, int comp) { return 2 * node + comp; }

 private:
  const BackgroundMesh* mesh_;
  std::vector<Point> nodes_;
  std::vector<std::uint8_t> node_boundary_;
  std::vector<std::array<int, 6>> element_nodes_;
};

struct ActiveDofs {
  std::vector<char> velocity;  // nu entries
  std::vector<char> pressure;  // np entries
  int velocity_count = 0;
  int pressure_count = 0;
};

ActiveDofs active_dofs(const DofSystem& dofs, const CutClassification& cls);

/// Strong constraints on combined background indices.
struct BcSpec {
  Point u_in{1.0, 0.0};
  std::vector<int> inlet;  // both components of active inlet nodes
  std::vector<int> wall;   // y component of active wall nodes not on the inlet
  /// Sorted union of inlet and wall.
  std::vector<int> all() const;
};

BcSpec strong_bcs(const DofSystem& dofs, const ActiveDofs& active, Point u_in);

/// Zero Dirichlet on every active velocity dof of the outer boundary
/// (supremizer problem).
std::vector<int> all_boundary_velocity_dofs(const DofSystem& dofs, const ActiveDofs& active);

/// Constant lifting u_in on every velocity dof. Throws IncompatibleLifting
/// when u_in has a wall-normal component.
Vector lifting_field(const DofSystem& dofs, Point u_in);

/// Nodal interpolant of a vector field on every velocity dof (used for
/// manufactured data).
Vector interpolate_velocity(const DofSystem& dofs, const std::function<Point(double, double)>& f);
Vector interpolate_pressure(const DofSystem& dofs, const std::function<double(double, double)>& f);

/// Active subspace of one classification with a compact numbering:
/// active velocity dofs (increasing) then active pressure dofs (increasing).
/// Keeps a reference to the dof system and a copy of the classification.
class CutSpace {
 public:
  CutSpace(const DofSystem& dofs, const CutClassification& cls);

  const DofSystem& dofs() const { return *dofs_; }
  const BackgroundMesh& mesh() const { return dofs_->mesh(); }
  const CutClassification& classification() const { return cls_; }
  const ActiveDofs& active() const { return active_; }

  int size() const { return static_cast<int>(global_.size()); }
  int num_velocity() const { return active_.velocity_count; }
  int num_pressure() const { return active_.pressure_count; }

  /// Compact index of a combined background index, -1 if inactive.
  int compact(int global) const { return compact_[static_cast<std::size_t>(global)]; }
  const std::vector<int>& global_indices() const { return global_; }

  Vector restrict(const Vector& background) const;
  Vector extend(const Vector& compact) const;
  /// Background velocity block (nu) -> compact velocity block.
  Vector restrict_velocity(const Vector& background_u) const;
  Vector extend_velocity(const Vector& compact_u) const;
  Vector restrict_pressure(const Vector& background_p) const;
  Vector extend_pressure(const Vector& compact_p) const;

  /// Background-indexed copy of a compact operator (rows/cols of inactive
  /// dofs stay empty).
  SparseMatrix to_background(const SparseMatrix& compact_op) const;

 private:
  const DofSystem* dofs_;
  CutClassification cls_;
  ActiveDofs active_;
  std::vector<int> compact_;
  std::vector<int> global_;
};

/// Dirichlet rows become identity rows with the prescribed value; the
/// columns are eliminated symmetrically and moved to the right-hand side.
/// `dofs` are row indices of `a`, `values` the prescribed values (empty means
/// homogeneous).
void apply_strong_bcs(SparseMatrix& a, Vector& rhs, const std::vector<int>& dofs,
                      const std::vector<double>& values = {});

/// CSV dump: node, kind (vertex/edge), x, y, boundary mask, dof_x, dof_y.
void write_dof_csv(std::ostream& os, const DofSystem& dofs);

}  // namespace cutrom
