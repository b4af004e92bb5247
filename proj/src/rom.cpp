#include "cutrom/rom.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "cutrom/errors.hpp"
#include "cutrom/kernels/kernels.hpp"

namespace cutrom {
namespace {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

kernels::CscView view(const SparseMatrix& a) {
  return {static_cast<std::size_t>(a.rows()), static_cast<std::size_t>(a.cols()), a.outerIndexPtr(),
          a.innerIndexPtr(), a.valuePtr()};
}

std::span<const double> span_of(const Matrix& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}

std::span<const double> column(const Matrix& m, Eigen::Index j) {
  return {m.data() + j * m.rows(), static_cast<std::size_t>(m.rows())};
}

std::span<double> column(Matrix& m, Eigen::Index j) {
  return {m.data() + j * m.rows(), static_cast<std::size_t>(m.rows())};
}

// y = A x for one column.
void apply(const SparseMatrix& a, std::span<const double> x, std::span<double> y) {
  std::fill(y.begin(), y.end(), 0.0);
  kernels::csc_times_dense(view(a), x, y, 1);
}

// c = a^T b with the kernel gram.
Matrix gram(const Matrix& a, const Matrix& b) {
  Matrix c(a.cols(), b.cols());
  kernels::gram(span_of(a), static_cast<std::size_t>(a.cols()), span_of(b),
                static_cast<std::size_t>(b.cols()), static_cast<std::size_t>(a.rows()),
                {c.data(), static_cast<std::size_t>(c.size())});
  return c;
}

Vector gram(const Matrix& a, const Vector& b) {
  Vector c(a.cols());
  kernels::gram(span_of(a), static_cast<std::size_t>(a.cols()),
                {b.data(), static_cast<std::size_t>(b.size())}, 1, static_cast<std::size_t>(a.rows()),
                {c.data(), static_cast<std::size_t>(c.size())});
  return c;
}

// A * X for a column-major X, via the row-major kernel.
Matrix sparse_times(const SparseMatrix& a, const std::vector<double>& x_rows, std::size_t k) {
  std::vector<double> y(static_cast<std::size_t>(a.rows()) * k, 0.0);
  kernels::csc_times_dense(view(a), x_rows, y, k);
  return Eigen::Map<const RowMajorMatrix>(y.data(), a.rows(), static_cast<Eigen::Index>(k));
}

std::vector<double> row_major_copy(const Matrix& m) {
  std::vector<double> out(static_cast<std::size_t>(m.size()));
  Eigen::Map<RowMajorMatrix>(out.data(), m.rows(), m.cols()) = m;
  return out;
}

}  // namespace

Matrix correlation_matrix(const Matrix& snapshots, const SparseMatrix& inner) {
  if (inner.rows() != snapshots.rows() || inner.cols() != snapshots.rows()) {
    throw ShapeMismatch("correlation_matrix: inner product does not match the snapshot length");
  }
  const Eigen::Index m = snapshots.cols();
  Matrix ms(snapshots.rows(), m);
  for (Eigen::Index j = 0; j < m; ++j) apply(inner, column(snapshots, j), column(ms, j));
  Matrix c = gram(snapshots, ms);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index i = 0; i < j; ++i) c(j, i) = c(i, j);
  }
  return c;
}

void orthonormalize(Matrix& columns, const SparseMatrix& inner) {
  const Eigen::Index n = columns.cols();
  Matrix mq(columns.rows(), n);
  Vector mv(columns.rows());
  std::span<double> mv_span{mv.data(), static_cast<std::size_t>(mv.size())};
  for (Eigen::Index j = 0; j < n; ++j) {
    auto v = column(columns, j);
    apply(inner, v, mv_span);
    const double start = std::sqrt(std::max(kernels::dot(v, mv_span), 0.0));
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index i = 0; i < j; ++i) {
        const double r = kernels::dot(column(mq, i), v);
        kernels::axpy(-r, column(columns, i), v);
      }
    }
    apply(inner, v, mv_span);
    const double norm = std::sqrt(std::max(kernels::dot(v, mv_span), 0.0));
    if (!(norm > 1e-12 * start) || !(norm > 0.0)) {
      std::ostringstream os;
      os << "column " << j << " is linearly dependent on the previous ones";
      throw RankDeficient(os.str());
    }
    columns.col(j) /= norm;
    mq.col(j) = mv / norm;
  }
}

namespace {

PodResult pod_impl(const Matrix& snapshots, const SparseMatrix& inner, int n_modes, bool cap) {
  if (snapshots.cols() == 0) throw RankDeficient("pod: empty snapshot matrix");
  Matrix c = correlation_matrix(snapshots, inner);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(c);
  if (eig.info() != Eigen::Success) throw RankDeficient("pod: eigendecomposition failed");
  const Eigen::Index m = c.rows();
  PodResult res;
  res.eigenvalues.resize(m);
  Matrix q(m, m);
  for (Eigen::Index k = 0; k < m; ++k) {
    res.eigenvalues[k] = eig.eigenvalues()[m - 1 - k];
    q.col(k) = eig.eigenvectors().col(m - 1 - k);
  }
  const double lambda1 = res.eigenvalues[0];
  if (!(lambda1 > 0.0)) throw RankDeficient("pod: all snapshots vanish in the inner product");
  for (Eigen::Index k = 0; k < m; ++k) {
    if (res.eigenvalues[k] < kPodClip * lambda1) res.eigenvalues[k] = 0.0;
    if (res.eigenvalues[k] > 0.0) ++res.rank;
  }
  int n = n_modes < 0 ? res.rank : n_modes;
  if (cap) n = std::min(n, res.rank);
  if (n > res.rank) {
    std::ostringstream os;
    os << "pod: requested " << n << " modes but only " << res.rank
       << " eigenvalues are above the clipping threshold";
    throw RankDeficient(os.str());
  }
  res.modes = snapshots * q.leftCols(n);
  for (int k = 0; k < n; ++k) res.modes.col(k) /= std::sqrt(res.eigenvalues[k]);
  orthonormalize(res.modes, inner);
  return res;
}

}  // namespace

PodResult pod(const Matrix& snapshots, const SparseMatrix& inner, int n_modes) {
  return pod_impl(snapshots, inner, n_modes, false);
}

PodResult pod_up_to(const Matrix& snapshots, const SparseMatrix& inner, int max_modes) {
  if (max_modes < 0) throw ValidationError("pod_up_to: max_modes must be >= 0");
  return pod_impl(snapshots, inner, max_modes, true);
}

int ReducedBasis::max_n(bool with_supremizers) const {
  auto n = std::min(velocity.cols(), pressure.cols());
  if (with_supremizers) n = std::min(n, supremizer.cols());
  return static_cast<int>(n);
}

Matrix ReducedBasis::velocity_space(int n, bool with_supremizers) const {
  if (n < 0 || n > max_n(with_supremizers)) {
    throw ValidationError("requested " + std::to_string(n) + " modes, basis has " +
                          std::to_string(max_n(with_supremizers)));
  }
  if (!with_supremizers) return velocity.leftCols(n);
  return enrich_with_supremizers(velocity.leftCols(n), supremizer.leftCols(n));
}

Matrix ReducedBasis::pressure_space(int n) const {
  if (n < 0 || n > pressure.cols()) throw ValidationError("requested too many pressure modes");
  return pressure.leftCols(n);
}

Matrix enrich_with_supremizers(const Matrix& lu, const Matrix& ls) {
  if (ls.cols() == 0) return lu;
  if (lu.rows() != ls.rows()) throw ShapeMismatch("enrich: velocity and supremizer lengths differ");
  Matrix out(lu.rows(), lu.cols() + ls.cols());
  out << lu, ls;
  return out;
}

ReducedProblem::ReducedProblem(const FomProblem& fom, Matrix velocity_basis, Matrix pressure_basis,
                               const SparseMatrix& background_mass, ReducedMass mass)
    : fom_(&fom), basis_u_(std::move(velocity_basis)), basis_p_(std::move(pressure_basis)) {
  const auto& dofs = fom.dofs();
  if (basis_u_.rows() != dofs.nu() || basis_p_.rows() != dofs.np()) {
    throw ShapeMismatch("reduced basis does not match the background dof counts");
  }
  const CutSpace& space = fom.space();
  const int nv = space.num_velocity();
  const int np = space.num_pressure();
  const Eigen::Index ku = basis_u_.cols();
  const Eigen::Index kp = basis_p_.cols();
  phi_u_.resize(nv, ku);
  for (Eigen::Index j = 0; j < ku; ++j) phi_u_.col(j) = space.restrict_velocity(basis_u_.col(j));
  phi_p_.resize(np, kp);
  for (Eigen::Index j = 0; j < kp; ++j) phi_p_.col(j) = space.restrict_pressure(basis_p_.col(j));
  phi_ = Matrix::Zero(nv + np, ku + kp);
  phi_.topLeftCorner(nv, ku) = phi_u_;
  phi_.bottomRightCorner(np, kp) = phi_p_;
  phi_rows_ = row_major_copy(phi_);
  lift_ = space.restrict_velocity(fom.lifting());
  constrained_ = fom.constrained();

  if (mass == ReducedMass::Physical) {
    mass_ = gram(phi_u_, sparse_times(fom.physical_mass(), row_major_copy(phi_u_),
                                      static_cast<std::size_t>(ku)));
  } else {
    if (background_mass.rows() != dofs.nu() || background_mass.cols() != dofs.nu()) {
      throw ShapeMismatch("background mass must be nu x nu");
    }
    Matrix masked = Matrix::Zero(dofs.nu(), ku);
    for (Eigen::Index j = 0; j < ku; ++j) masked.col(j) = space.extend_velocity(phi_u_.col(j));
    mass_ = gram(masked, sparse_times(background_mass, row_major_copy(masked),
                                      static_cast<std::size_t>(ku)));
  }
  mass_ = 0.5 * (mass_ + mass_.transpose()).eval();
}

Vector ReducedProblem::full_state(const Vector& c) const {
  if (c.size() != size()) throw ShapeMismatch("reduced coefficients have the wrong length");
  Vector x = phi_ * c;
  x.head(lift_.size()) += lift_;
  return x;
}

ReducedLinearization ReducedProblem::residual(const Vector& c, bool with_jacobian) const {
  const Vector x = full_state(c);
  Linearization lin = fom_->assembler().residual(x, with_jacobian);
  fom_->mask_constrained(lin.residual);
  ReducedLinearization out;
  out.residual = gram(phi_, lin.residual);
  if (with_jacobian) {
    const auto k = static_cast<std::size_t>(size());
    std::vector<double> y(static_cast<std::size_t>(lin.jacobian.rows()) * k, 0.0);
    kernels::csc_times_dense(view(lin.jacobian), phi_rows_, y, k);
    for (int r : constrained_) std::fill_n(y.begin() + static_cast<std::ptrdiff_t>(r * k), k, 0.0);
    const Matrix jphi = Eigen::Map<const RowMajorMatrix>(y.data(), lin.jacobian.rows(), size());
    out.jacobian = gram(phi_, jphi);
  }
  return out;
}

double ReducedProblem::load_norm() const { return residual(Vector::Zero(size()), false).residual.norm(); }

Matrix ReducedProblem::coupling_block() const {
  const SparseMatrix b = fom_->assembler().pressure_coupling();
  const Matrix bphi = sparse_times(b, row_major_copy(phi_u_), static_cast<std::size_t>(phi_u_.cols()));
  return gram(phi_p_, bphi).transpose();
}

double ReducedProblem::inf_sup_constant(const SparseMatrix& background_pressure_mass) const {
  const CutSpace& space = fom_->space();
  if (background_pressure_mass.rows() != fom_->dofs().np()) {
    throw ShapeMismatch("inf_sup_constant: pressure mass must be np x np");
  }
  if (pressure_size() == 0) return 0.0;
  const SparseMatrix k = fom_->assembler().supremizer_matrix();
  const Matrix xv = gram(phi_u_, sparse_times(k, row_major_copy(phi_u_), static_cast<std::size_t>(velocity_size())));
  Matrix masked(fom_->dofs().np(), pressure_size());
  for (Eigen::Index j = 0; j < masked.cols(); ++j) masked.col(j) = space.extend_pressure(phi_p_.col(j));
  const Matrix xp = gram(masked, sparse_times(background_pressure_mass, row_major_copy(masked),
                                              static_cast<std::size_t>(pressure_size())));
  const Matrix c = coupling_block();
  Eigen::LDLT<Matrix> ldlt(0.5 * (xv + xv.transpose()));
  if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0.0)) return 0.0;
  Matrix s = c.transpose() * ldlt.solve(c);
  s = 0.5 * (s + s.transpose()).eval();
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> eig(s, 0.5 * (xp + xp.transpose()));
  if (eig.info() != Eigen::Success) return 0.0;
  return std::sqrt(std::max(eig.eigenvalues().minCoeff(), 0.0));
}

Vector ReducedProblem::project(const Vector& u0, const Vector& p, const SparseMatrix& mass_u,
                               const SparseMatrix& mass_p) const {
  Vector c(size());
  const Matrix mu = mass_u * basis_u_;
  const Matrix gu = basis_u_.transpose() * mu;
  c.head(velocity_size()) = gu.ldlt().solve(mu.transpose() * u0);
  if (pressure_size() > 0) {
    const Matrix mp = mass_p * basis_p_;
    const Matrix gp = basis_p_.transpose() * mp;
    c.tail(pressure_size()) = gp.ldlt().solve(mp.transpose() * p);
  }
  return c;
}

NewtonReport ReducedProblem::newton(Vector& c, const NewtonOptions& opt, double reference,
                                    const Vector* previous, double tau) const {
  const int nu = velocity_size();
  auto eval = [&](const Vector& y) {
    ReducedLinearization lin = residual(y, true);
    if (previous != nullptr) {
      lin.residual *= tau;
      lin.residual.head(nu) += mass_ * (y.head(nu) - previous->head(nu));
      lin.jacobian *= tau;
      lin.jacobian.topLeftCorner(nu, nu) += mass_;
    }
    return lin;
  };
  NewtonReport rep;
  rep.reference = reference;
  const double target = opt.tol * reference + opt.abs_floor;
  ReducedLinearization lin = eval(c);
  double norm = lin.residual.norm();
  rep.history.push_back(norm);
  int growth = 0;
  while (true) {
    if (norm <= target) {
      rep.converged = true;
      break;
    }
    if (rep.iterations >= opt.max_iter || !std::isfinite(norm)) break;
    Eigen::FullPivLU<Matrix> lu(lin.jacobian);
    const Vector delta = -lu.solve(lin.residual);
    if (!delta.allFinite()) break;
    double step = 1.0;
    Vector trial = c + delta;
    ReducedLinearization tl = eval(trial);
    double tn = tl.residual.norm();
    for (int k = 0; k < opt.max_halvings && !(tn < norm); ++k) {
      step *= 0.5;
      trial = c + step * delta;
      tl = eval(trial);
      tn = tl.residual.norm();
    }
    c = std::move(trial);
    lin = std::move(tl);
    ++rep.iterations;
    growth = tn > norm ? growth + 1 : 0;
    norm = tn;
    rep.history.push_back(norm);
    if (growth >= opt.growth_limit) break;
  }
  return rep;
}

ReducedSolution ReducedProblem::solve_steady(const NewtonOptions& opt, const Vector* initial) const {
  ReducedSolution sol;
  sol.coefficients = initial != nullptr ? *initial : Vector::Zero(size());
  if (sol.coefficients.size() != size()) throw ShapeMismatch("initial reduced state length");
  const double reference = load_norm();
  sol.report = newton(sol.coefficients, opt, reference, nullptr, 1.0);
  if (!sol.report.converged) {
    std::ostringstream os;
    os << "reduced Newton did not converge in " << sol.report.iterations << " iterations (residual "
       << sol.report.history.back() << ", reference " << reference << ")";
    throw NewtonDiverged(os.str(), sol.report.history);
  }
  return sol;
}

ReducedTrajectory ReducedProblem::solve_unsteady(const std::vector<double>& times,
                                                 const NewtonOptions& opt,
                                                 const Vector* initial) const {
  if (times.size() < 2) throw ValidationError("time grid needs at least one step");
  Vector c = initial != nullptr ? *initial : Vector::Zero(size());
  if (c.size() != size()) throw ShapeMismatch("initial reduced state length");
  const double load = load_norm();
  ReducedTrajectory tr;
  tr.times.push_back(times.front());
  tr.coefficients.push_back(c);
  for (std::size_t n = 0; n + 1 < times.size(); ++n) {
    const double tau = times[n + 1] - times[n];
    if (!(tau > 0.0)) throw ValidationError("time grid must be strictly increasing");
    const Vector prev = c;
    const NewtonReport rep = newton(c, opt, tau * load, &prev, tau);
    if (!rep.converged) {
      tr.failed_step = static_cast<int>(n) + 1;
      tr.failure_history = rep.history;
      break;
    }
    tr.newton_iterations.push_back(rep.iterations);
    tr.times.push_back(times[n + 1]);
    tr.coefficients.push_back(c);
  }
  return tr;
}

std::pair<Vector, Vector> ReducedProblem::reconstruct(const Vector& c) const {
  if (c.size() != size()) throw ShapeMismatch("reduced coefficients have the wrong length");
  const CutSpace& space = fom_->space();
  return {space.extend_velocity(phi_u_ * c.head(velocity_size())),
          space.extend_pressure(phi_p_ * c.tail(pressure_size()))};
}

std::pair<Vector, Vector> reconstruct(const Vector& c, const Matrix& velocity_basis,
                                      const Matrix& pressure_basis, const Vector& lifting) {
  const auto ku = velocity_basis.cols();
  const auto kp = pressure_basis.cols();
  if (c.size() != ku + kp || lifting.size() != velocity_basis.rows()) {
    throw ShapeMismatch("reconstruct: sizes do not match the basis");
  }
  return {velocity_basis * c.head(ku) + lifting, pressure_basis * c.tail(kp)};
}

double relative_error_L2(const Vector& reference, const Vector& approx, const SparseMatrix& mass,
                         const std::vector<char>& mask) {
  const auto n = reference.size();
  if (approx.size() != n || mass.rows() != n || mass.cols() != n ||
      static_cast<Eigen::Index>(mask.size()) != n) {
    throw ShapeMismatch("relative_error_L2: sizes differ");
  }
  Vector e(n), f(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool on = mask[static_cast<std::size_t>(i)] != 0;
    f[i] = on ? reference[i] : 0.0;
    e[i] = on ? reference[i] - approx[i] : 0.0;
  }
  const double ref = f.dot(mass * f);
  if (!(ref > 0.0)) throw ZeroReference("reference field has zero norm on the active dofs");
  return std::sqrt(std::max(e.dot(mass * e), 0.0) / ref);
}

}  // namespace cutrom
