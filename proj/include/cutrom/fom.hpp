#pragma once

// Full-order solves for one parameter value.

#include <memory>
#include <optional>
#include <vector>

#include "cutrom/assembly.hpp"
#include "cutrom/fe_space.hpp"
#include "cutrom/linalg.hpp"
#include "cutrom/mesh.hpp"

namespace cutrom {

struct NewtonOptions {
  double tol = 1e-10;        // relative to the load norm
  double abs_floor = 1e-12;  // absolute slack added to the test
  int max_iter = 25;
  int growth_limit = 3;      // consecutive residual increases before giving up
  int max_halvings = 6;      // backtracking steps per iteration
  bool continuation = false; // viscosity ramp 4 mu, 2 mu, mu
};

struct NewtonReport {
  bool converged = false;
  int iterations = 0;
  double reference = 0.0;
  std::vector<double> history;  // residual norm per iterate, starting guess first
};

struct SteadySolution {
  Vector u0;  // homogeneous velocity, background length nu
  Vector p;   // pressure, background length np
  NewtonReport report;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> u0;  // background nu per time level (level 0 = initial state)
  std::vector<Vector> p;   // background np per time level
  std::vector<int> newton_iterations;  // per step
  int failed_step = -1;                // first step whose Newton failed, -1 if none
  std::vector<double> failure_history;
};

/// 0 = t0 < ... < tN = T with constant step tau; the last step is clipped so
/// the grid ends exactly at T.
std::vector<double> time_grid(double tau, double final_time);

class FomProblem {
 public:
  FomProblem(const DofSystem& dofs, const LevelsetFunction& levelset, PhysicsParams physics,
             StabilizationParams stab, AssemblyOptions options = {},
             GhostFacetPolicy policy = GhostFacetPolicy::AnyCutNeighbor);
  /// Uses an explicit lifting (background nu) instead of the constant u_in.
  FomProblem(const DofSystem& dofs, const LevelsetFunction& levelset, PhysicsParams physics,
             StabilizationParams stab, AssemblyOptions options, GhostFacetPolicy policy,
             Vector lifting);

  const DofSystem& dofs() const { return *dofs_; }
  const CutClassification& classification() const { return space_->classification(); }
  const CutSpace& space() const { return *space_; }
  const Assembler& assembler() const { return *assembler_; }
  const BcSpec& bcs() const { return bcs_; }
  /// Compact indices of the strongly constrained velocity dofs.
  const std::vector<int>& constrained() const { return constrained_; }
  const Vector& lifting() const { return lifting_; }

  /// Compact state [u0 + lifting | p] from background homogeneous fields.
  /// Throws InactiveState if u0 or p has nonzero inactive entries.
  Vector compact_state(const Vector& u0, const Vector& p) const;
  /// Splits a compact state back into background (u0, p).
  std::pair<Vector, Vector> background_fields(const Vector& x) const;

  /// Residual of the homogenized problem in background numbering:
  /// R(u0, p) = A(u0 + l, p) - L, rows [velocity | pressure].
  Linearization background_residual(const Vector& u0, const Vector& p, bool with_jacobian) const;
  /// Norm of the load F = -R(0, 0) over the unconstrained rows.
  double load_norm() const;

  SteadySolution solve_steady(const NewtonOptions& opt, const Vector* initial_u0 = nullptr,
                              const Vector* initial_p = nullptr) const;

  /// Backward Euler from (u0, p) at t = 0 (zero if null).
  Trajectory solve_unsteady(const std::vector<double>& times, const NewtonOptions& opt,
                            const Vector* initial_u0 = nullptr) const;

  /// Solves the supremizer problem for a background pressure.
  Vector solve_supremizer(const Vector& p) const;

  /// Velocity mass on the fluid part, compact velocity block.
  const SparseMatrix& physical_mass() const;

  /// Zeroes the constrained rows of a compact residual.
  void mask_constrained(Vector& r) const;

 private:
  void init(Vector lifting);
  /// Newton on a compact state with an optional mass shift (unsteady step).
  NewtonReport newton(Vector& x, const NewtonOptions& opt, double reference, const Assembler& asmb,
                      const SparseMatrix* mass, const Vector* previous, double tau) const;

  const DofSystem* dofs_;
  PhysicsParams physics_;
  StabilizationParams stab_;
  AssemblyOptions options_;
  std::unique_ptr<CutSpace> space_;
  std::unique_ptr<Assembler> assembler_;
  BcSpec bcs_;
  std::vector<int> constrained_;
  Vector lifting_;
  mutable std::optional<SparseMatrix> mass_;
  mutable std::unique_ptr<SparseDirectSolver> supremizer_solver_;
  mutable std::vector<int> supremizer_bc_;
};

}  // namespace cutrom
