#pragma once

// POD with supremizer enrichment and the Galerkin-projected online solvers.

#include <vector>

#include "cutrom/fom.hpp"
#include "cutrom/linalg.hpp"

namespace cutrom {

struct PodResult {
  Matrix modes;        // N-hat x N, orthonormal in the given inner product
  Vector eigenvalues;  // all correlation eigenvalues, descending, clipped at 0
  int rank = 0;        // eigenvalues above the clipping threshold
};

/// Relative threshold below which correlation eigenvalues count as zero.
inline constexpr double kPodClip = 1e-14;

/// Correlation matrix C = S^T M S (dense, symmetric).
Matrix correlation_matrix(const Matrix& snapshots, const SparseMatrix& inner);

/// Method of snapshots. n_modes < 0 keeps every mode above the clipping
/// threshold; otherwise exactly n_modes are returned (RankDeficient if the
/// n-th eigenvalue is clipped).
PodResult pod(const Matrix& snapshots, const SparseMatrix& inner, int n_modes = -1);
/// Keeps min(max_modes, rank) modes.
PodResult pod_up_to(const Matrix& snapshots, const SparseMatrix& inner, int max_modes);

/// Two passes of modified Gram-Schmidt in the inner product `inner`.
/// Throws RankDeficient when a column collapses.
void orthonormalize(Matrix& columns, const SparseMatrix& inner);

struct ReducedBasis {
  Matrix velocity;    // nu x N_u
  Matrix supremizer;  // nu x N_s
  Matrix pressure;    // np x N_p
  Vector lambda_u, lambda_s, lambda_p;

  /// Largest N usable online (velocity and pressure share N).
  int max_n(bool with_supremizers) const;
  /// [L_u | L_s] with n columns from each, or L_u alone.
  Matrix velocity_space(int n, bool with_supremizers) const;
  Matrix pressure_space(int n) const;
};

/// Column concatenation [L_u | L_s]; no cross-orthonormalization.
Matrix enrich_with_supremizers(const Matrix& lu, const Matrix& ls);

enum class ReducedMass {
  Background,  // background mass restricted to the active dofs
  Physical,    // mass on the fluid part only, as in the full-order stepper
};

struct ReducedLinearization {
  Vector residual;
  Matrix jacobian;
};

struct ReducedSolution {
  Vector coefficients;  // [velocity (n_u) | pressure (n_p)]
  NewtonReport report;
};

struct ReducedTrajectory {
  std::vector<double> times;
  std::vector<Vector> coefficients;  // level 0 = initial state
  std::vector<int> newton_iterations;
  int failed_step = -1;
  std::vector<double> failure_history;
};

/// Galerkin projection of one full-order problem onto a fixed basis.
class ReducedProblem {
 public:
  /// `velocity_basis` is nu x n_u (typically [L_u | L_s]), `pressure_basis`
  /// np x n_p, both in background numbering. `background_mass` is the nu x nu
  /// velocity mass on the whole rectangle (read only for ReducedMass::Background).
  ReducedProblem(const FomProblem& fom, Matrix velocity_basis, Matrix pressure_basis,
                 const SparseMatrix& background_mass, ReducedMass mass = ReducedMass::Background);

  int velocity_size() const { return static_cast<int>(basis_u_.cols()); }
  int pressure_size() const { return static_cast<int>(basis_p_.cols()); }
  int size() const { return velocity_size() + pressure_size(); }

  /// Compact full-order state for reduced coefficients.
  Vector full_state(const Vector& coefficients) const;

  /// Projected residual and Jacobian at the given coefficients.
  ReducedLinearization residual(const Vector& coefficients, bool with_jacobian) const;
  /// Norm of the projected load (residual at zero coefficients).
  double load_norm() const;

  /// Projected coupling block L_u^T B^T L_p (n_u x n_p).
  Matrix coupling_block() const;
  /// Reduced inf-sup constant: min over reduced q of max over reduced v of
  /// b(q, v) / (|v|_K |q|_M), with K the supremizer operator and M the
  /// background pressure mass restricted to the active dofs. Zero when the
  /// velocity Gram matrix is singular.
  double inf_sup_constant(const SparseMatrix& background_pressure_mass) const;
  const Matrix& mass() const { return mass_; }

  /// Galerkin projection of a full-order state (background u0, p) onto the
  /// basis in the background inner products.
  Vector project(const Vector& u0, const Vector& p, const SparseMatrix& mass_u,
                 const SparseMatrix& mass_p) const;

  ReducedSolution solve_steady(const NewtonOptions& opt, const Vector* initial = nullptr) const;
  ReducedTrajectory solve_unsteady(const std::vector<double>& times, const NewtonOptions& opt,
                                   const Vector* initial = nullptr) const;

  /// Background homogeneous velocity and pressure, zeroed outside the active set.
  std::pair<Vector, Vector> reconstruct(const Vector& coefficients) const;

 private:
  NewtonReport newton(Vector& c, const NewtonOptions& opt, double reference, const Vector* previous,
                      double tau) const;

  const FomProblem* fom_;
  Matrix basis_u_;  // background
  Matrix basis_p_;
  Matrix phi_u_;    // compact velocity rows
  Matrix phi_p_;    // compact pressure rows
  Matrix phi_;      // block diagonal (n_active x size), column-major
  std::vector<double> phi_rows_;  // phi_ in row-major order
  Vector lift_;     // compact velocity lifting
  std::vector<int> constrained_;
  Matrix mass_;     // n_u x n_u
};

/// (velocity L_u c_u + lifting, pressure L_p c_p) in background numbering.
std::pair<Vector, Vector> reconstruct(const Vector& coefficients, const Matrix& velocity_basis,
                                      const Matrix& pressure_basis, const Vector& lifting);

/// sqrt(e^T M e) / sqrt(f^T M f) with e = mask (reference - approx) and
/// f = mask reference; mask entries are 0/1 per dof. Throws ZeroReference.
double relative_error_L2(const Vector& reference, const Vector& approx, const SparseMatrix& mass,
                         const std::vector<char>& mask);

}  // namespace cutrom
