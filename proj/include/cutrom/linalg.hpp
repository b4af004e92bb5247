#pragma once

#include <memory>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace cutrom {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
using Triplet = Eigen::Triplet<double, int>;

/// Sparse direct LU. Uses UMFPACK when the build found it, Eigen::SparseLU
/// otherwise. The symbolic analysis is reused while the pattern is unchanged.
class SparseDirectSolver {
 public:
  SparseDirectSolver();
  ~SparseDirectSolver();
  SparseDirectSolver(SparseDirectSolver&&) noexcept;
  SparseDirectSolver& operator=(SparseDirectSolver&&) noexcept;

  /// Throws LinearSolverFailure if the matrix is singular.
  void factorize(const SparseMatrix& a);
  Vector solve(const Vector& b) const;
  Matrix solve(const Matrix& b) const;

  static const char* backend();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace cutrom
