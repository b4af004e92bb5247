#include "cutrom/linalg.hpp"

#include <algorithm>
#include <vector>

#include "cutrom/errors.hpp"

#ifdef CUTROM_HAVE_UMFPACK
#include <Eigen/UmfPackSupport>
#else
#include <Eigen/SparseLU>
#endif

namespace cutrom {

struct SparseDirectSolver::Impl {
#ifdef CUTROM_HAVE_UMFPACK
  Eigen::UmfPackLU<SparseMatrix> lu;
#else
  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
#endif
  SparseMatrix matrix;  // UmfPackLU refers back to the factorized matrix during solves
  std::vector<int> outer;
  std::vector<int> inner;
  bool analyzed = false;

  bool same_pattern(const SparseMatrix& a) const {
    const auto n = static_cast<std::size_t>(a.cols()) + 1;
    const auto nnz = static_cast<std::size_t>(a.nonZeros());
    return analyzed && outer.size() == n && inner.size() == nnz &&
           std::equal(outer.begin(), outer.end(), a.outerIndexPtr()) &&
           std::equal(inner.begin(), inner.end(), a.innerIndexPtr());
  }
  void remember(const SparseMatrix& a) {
    outer.assign(a.outerIndexPtr(), a.outerIndexPtr() + a.cols() + 1);
    inner.assign(a.innerIndexPtr(), a.innerIndexPtr() + a.nonZeros());
    analyzed = true;
  }
};

SparseDirectSolver::SparseDirectSolver() : impl_(std::make_unique<Impl>()) {}
SparseDirectSolver::~SparseDirectSolver() = default;
SparseDirectSolver::SparseDirectSolver(SparseDirectSolver&&) noexcept = default;
SparseDirectSolver& SparseDirectSolver::operator=(SparseDirectSolver&&) noexcept = default;

const char* SparseDirectSolver::backend() {
#ifdef CUTROM_HAVE_UMFPACK
  return "umfpack";
#else
  return "eigen-sparselu";
#endif
}

void SparseDirectSolver::factorize(const SparseMatrix& a) {
  if (a.rows() != a.cols()) throw ShapeMismatch("sparse solve needs a square matrix");
  if (!a.isCompressed()) throw LinearSolverFailure("sparse solve needs a compressed matrix");
  impl_->matrix = a;
  if (!impl_->same_pattern(a)) {
    impl_->lu.analyzePattern(impl_->matrix);
    impl_->remember(a);
  }
  impl_->lu.factorize(impl_->matrix);
  if (impl_->lu.info() != Eigen::Success) {
    impl_->analyzed = false;
    throw LinearSolverFailure("sparse LU factorization failed");
  }
}

Vector SparseDirectSolver::solve(const Vector& b) const {
  Vector x = impl_->lu.solve(b);
  if (impl_->lu.info() != Eigen::Success || !x.allFinite()) {
    throw LinearSolverFailure("sparse LU solve failed");
  }
  return x;
}

Matrix SparseDirectSolver::solve(const Matrix& b) const {
  Matrix x(b.rows(), b.cols());
  for (Eigen::Index j = 0; j < b.cols(); ++j) x.col(j) = solve(Vector(b.col(j)));
  return x;
}

}  // namespace cutrom
