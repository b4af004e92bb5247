#include "cutrom/fom.hpp"

#include <cmath>
#include <sstream>

#include "cutrom/errors.hpp"

namespace cutrom {

std::vector<double> time_grid(double tau, double final_time) {
  if (!(tau > 0.0) || !(final_time > 0.0)) throw ValidationError("time grid needs tau > 0 and T > 0");
  const int n = static_cast<int>(std::ceil(final_time / tau - 1e-9));
  std::vector<double> t(static_cast<std::size_t>(n) + 1);
  for (int k = 0; k < n; ++k) t[static_cast<std::size_t>(k)] = k * tau;
  t[static_cast<std::size_t>(n)] = final_time;
  return t;
}

FomProblem::FomProblem(const DofSystem& dofs, const LevelsetFunction& levelset, PhysicsParams physics,
                       StabilizationParams stab, AssemblyOptions options, GhostFacetPolicy policy)
    : dofs_(&dofs), physics_(std::move(physics)), stab_(stab), options_(options) {
  space_ = std::make_unique<CutSpace>(dofs, classify_elements(dofs.mesh(), levelset, policy));
  init(lifting_field(dofs, physics_.u_in));
}

FomProblem::FomProblem(const DofSystem& dofs, const LevelsetFunction& levelset, PhysicsParams physics,
                       StabilizationParams stab, AssemblyOptions options, GhostFacetPolicy policy,
                       Vector lifting)
    : dofs_(&dofs), physics_(std::move(physics)), stab_(stab), options_(options) {
  space_ = std::make_unique<CutSpace>(dofs, classify_elements(dofs.mesh(), levelset, policy));
  init(std::move(lifting));
}

void FomProblem::init(Vector lifting) {
  if (lifting.size() != dofs_->nu()) throw ShapeMismatch("lifting must have one entry per velocity dof");
  if (space_->classification().active_elements.empty()) {
    throw ValidationError("the levelset leaves no fluid element on the mesh");
  }
  lifting_ = std::move(lifting);
  assembler_ = std::make_unique<Assembler>(*space_, physics_, stab_, options_);
  bcs_ = strong_bcs(*dofs_, space_->active(), physics_.u_in);
  for (int d : bcs_.all()) constrained_.push_back(space_->compact(d));
}

Vector FomProblem::compact_state(const Vector& u0, const Vector& p) const {
  if (u0.size() != dofs_->nu() || p.size() != dofs_->np()) throw ShapeMismatch("compact_state: sizes");
  const auto& act = space_->active();
  for (int i = 0; i < dofs_->nu(); ++i) {
    if (act.velocity[static_cast<std::size_t>(i)] == 0 && u0[i] != 0.0) {
      throw InactiveState("velocity has a nonzero entry at inactive dof " + std::to_string(i));
    }
  }
  for (int i = 0; i < dofs_->np(); ++i) {
    if (act.pressure[static_cast<std::size_t>(i)] == 0 && p[i] != 0.0) {
      throw InactiveState("pressure has a nonzero entry at inactive dof " + std::to_string(i));
    }
  }
  const int nv = space_->num_velocity();
  Vector x(space_->size());
  x.head(nv) = space_->restrict_velocity(u0 + lifting_);
  x.tail(space_->num_pressure()) = space_->restrict_pressure(p);
  return x;
}

std::pair<Vector, Vector> FomProblem::background_fields(const Vector& x) const {
  const int nv = space_->num_velocity();
  Vector w = space_->extend_velocity(x.head(nv));
  Vector u0 = w - lifting_;
  const auto& act = space_->active();
  for (int i = 0; i < dofs_->nu(); ++i) {
    if (act.velocity[static_cast<std::size_t>(i)] == 0) u0[i] = 0.0;
  }
  return {u0, space_->extend_pressure(x.tail(space_->num_pressure()))};
}

void FomProblem::mask_constrained(Vector& r) const {
  for (int c : constrained_) r[c] = 0.0;
}

Linearization FomProblem::background_residual(const Vector& u0, const Vector& p, bool with_jacobian) const {
  const Vector x = compact_state(u0, p);
  Linearization lin = assembler_->residual(x, with_jacobian);
  Linearization out;
  out.residual = space_->extend(lin.residual);
  if (with_jacobian) out.jacobian = space_->to_background(lin.jacobian);
  return out;
}

double FomProblem::load_norm() const {
  Vector x = compact_state(Vector::Zero(dofs_->nu()), Vector::Zero(dofs_->np()));
  Vector r = assembler_->residual(x, false).residual;
  mask_constrained(r);
  return r.norm();
}

const SparseMatrix& FomProblem::physical_mass() const {
  if (!mass_) mass_ = assembler_->mass();
  return *mass_;
}

NewtonReport FomProblem::newton(Vector& x, const NewtonOptions& opt, double reference,
                                const Assembler& asmb, const SparseMatrix* mass, const Vector* previous,
                                double tau) const {
  const int nv = space_->num_velocity();
  SparseMatrix mass_full;
  if (mass != nullptr) {
    std::vector<Triplet> trip;
    for (int c = 0; c < mass->outerSize(); ++c) {
      for (SparseMatrix::InnerIterator it(*mass, c); it; ++it) trip.emplace_back(it.row(), c, it.value());
    }
    mass_full.resize(space_->size(), space_->size());
    mass_full.setFromTriplets(trip.begin(), trip.end());
  }
  auto eval = [&](const Vector& y) {
    Linearization lin = asmb.residual(y, true);
    if (mass != nullptr) {
      lin.residual *= tau;
      lin.residual.head(nv) += (*mass) * (y.head(nv) - previous->head(nv));
      lin.jacobian = tau * lin.jacobian + mass_full;
      lin.jacobian.makeCompressed();
    }
    mask_constrained(lin.residual);
    return lin;
  };

  NewtonReport rep;
  rep.reference = reference;
  const double target = opt.tol * reference + opt.abs_floor;
  Linearization lin = eval(x);
  double norm = lin.residual.norm();
  rep.history.push_back(norm);
  SparseDirectSolver solver;
  int growth = 0;
  while (true) {
    if (norm <= target) {
      rep.converged = true;
      break;
    }
    if (rep.iterations >= opt.max_iter || !std::isfinite(norm)) break;
    Vector rhs = -lin.residual;
    apply_strong_bcs(lin.jacobian, rhs, constrained_);
    solver.factorize(lin.jacobian);
    const Vector delta = solver.solve(rhs);
    double step = 1.0;
    Vector trial = x + delta;
    Linearization tl = eval(trial);
    double tn = tl.residual.norm();
    for (int k = 0; k < opt.max_halvings && !(tn < norm); ++k) {
      step *= 0.5;
      trial = x + step * delta;
      tl = eval(trial);
      tn = tl.residual.norm();
    }
    x = std::move(trial);
    lin = std::move(tl);
    ++rep.iterations;
    growth = tn > norm ? growth + 1 : 0;
    norm = tn;
    rep.history.push_back(norm);
    if (growth >= opt.growth_limit) break;
  }
  return rep;
}

SteadySolution FomProblem::solve_steady(const NewtonOptions& opt, const Vector* initial_u0,
                                        const Vector* initial_p) const {
  const Vector zu = Vector::Zero(dofs_->nu());
  const Vector zp = Vector::Zero(dofs_->np());
  Vector x = compact_state(initial_u0 != nullptr ? *initial_u0 : zu, initial_p != nullptr ? *initial_p : zp);
  const Vector lift_c = space_->restrict_velocity(lifting_);
  for (int c : constrained_) x[c] = lift_c[c];

  if (opt.continuation) {
    for (double factor : {4.0, 2.0}) {
      PhysicsParams ph = physics_;
      ph.mu *= factor;
      const Assembler coarse(*space_, ph, stab_, options_);
      Vector y = x;
      NewtonOptions o = opt;
      o.tol = std::max(opt.tol, 1e-6);
      Vector r0 = coarse.residual(compact_state(zu, zp), false).residual;
      mask_constrained(r0);
      const NewtonReport rep = newton(y, o, r0.norm(), coarse, nullptr, nullptr, 1.0);
      if (rep.converged) x = y;
    }
  }

  const double reference = load_norm();
  NewtonReport rep = newton(x, opt, reference, *assembler_, nullptr, nullptr, 1.0);
  if (!rep.converged) {
    std::ostringstream os;
    os << "steady Newton did not converge in " << rep.iterations << " iterations (residual "
       << rep.history.back() << ", reference " << reference << ")";
    throw NewtonDiverged(os.str(), rep.history);
  }
  SteadySolution sol;
  auto [u0, p] = background_fields(x);
  sol.u0 = std::move(u0);
  sol.p = std::move(p);
  sol.report = std::move(rep);
  return sol;
}

Trajectory FomProblem::solve_unsteady(const std::vector<double>& times, const NewtonOptions& opt,
                                      const Vector* initial_u0) const {
  if (times.size() < 2) throw ValidationError("time grid needs at least one step");
  const Vector zu = Vector::Zero(dofs_->nu());
  const Vector zp = Vector::Zero(dofs_->np());
  Vector x = compact_state(initial_u0 != nullptr ? *initial_u0 : zu, zp);
  const Vector lift_c = space_->restrict_velocity(lifting_);
  for (int c : constrained_) x[c] = lift_c[c];
  const double load = load_norm();
  const SparseMatrix& m = physical_mass();

  Trajectory tr;
  tr.times.push_back(times.front());
  {
    auto [u0, p] = background_fields(x);
    tr.u0.push_back(std::move(u0));
    tr.p.push_back(std::move(p));
  }
  for (std::size_t n = 0; n + 1 < times.size(); ++n) {
    const double tau = times[n + 1] - times[n];
    if (!(tau > 0.0)) throw ValidationError("time grid must be strictly increasing");
    const Vector prev = x;
    const NewtonReport rep = newton(x, opt, tau * load, *assembler_, &m, &prev, tau);
    if (!rep.converged) {
      tr.failed_step = static_cast<int>(n) + 1;
      tr.failure_history = rep.history;
      break;
    }
    tr.newton_iterations.push_back(rep.iterations);
    tr.times.push_back(times[n + 1]);
    auto [u0, p] = background_fields(x);
    tr.u0.push_back(std::move(u0));
    tr.p.push_back(std::move(p));
  }
  return tr;
}

Vector FomProblem::solve_supremizer(const Vector& p) const {
  if (p.size() != dofs_->np()) throw ShapeMismatch("solve_supremizer: pressure length");
  if (!supremizer_solver_) {
    SparseMatrix k = assembler_->supremizer_matrix();
    supremizer_bc_.clear();
    for (int d : all_boundary_velocity_dofs(*dofs_, space_->active())) supremizer_bc_.push_back(space_->compact(d));
    Vector dummy = Vector::Zero(k.rows());
    apply_strong_bcs(k, dummy, supremizer_bc_);
    auto solver = std::make_unique<SparseDirectSolver>();
    solver->factorize(k);
    supremizer_solver_ = std::move(solver);
  }
  Vector rhs = assembler_->supremizer_rhs(space_->restrict_pressure(p));
  for (int c : supremizer_bc_) rhs[c] = 0.0;
  return space_->extend_velocity(supremizer_solver_->solve(rhs));
}

}  // namespace cutrom
