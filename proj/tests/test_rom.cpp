#include <cmath>
#include <random>

#include <doctest.h>

#include "cutrom/errors.hpp"
#include "cutrom/rom.hpp"

using namespace cutrom;

namespace {

LevelsetFunction wavy(double theta) {
  const auto o = orient_fluid_sign(LevelsetFamily::wavy_wall(), theta, {0.0, 0.0});
  return [o](double x, double y) { return o(x, y); };
}

LevelsetFunction cylinder(double theta) {
  const auto o = orient_fluid_sign(LevelsetFamily::cylinder(0.2), theta, {0.0, 0.0});
  return [o](double x, double y) { return o(x, y); };
}

Matrix random_matrix(int r, int c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Matrix m(r, c);
  for (int j = 0; j < c; ++j) {
    for (int i = 0; i < r; ++i) m(i, j) = g(rng);
  }
  return m;
}

struct Small {
  BackgroundMesh mesh = build_background_mesh({-2, -1, 2, 1}, 0.14);
  DofSystem dofs{mesh};
  SparseMatrix mu = assemble_background_velocity_mass(dofs);
  SparseMatrix mp = assemble_background_pressure_mass(dofs);
};

double rel(const Vector& a, const Vector& b, const SparseMatrix& m, const std::vector<char>& mask) {
  return relative_error_L2(b, a, m, mask);
}

}  // namespace

TEST_CASE("POD of duplicated columns keeps one mode") {
  const Small s;
  Matrix snap(s.dofs.nu(), 3);
  const Matrix base = random_matrix(s.dofs.nu(), 1, 1);
  snap << base, base, base;
  const PodResult r = pod(snap, s.mu);
  CHECK(r.rank == 1);
  CHECK(r.modes.cols() == 1);
  CHECK(r.eigenvalues[1] <= kPodClip * r.eigenvalues[0]);
  CHECK(r.eigenvalues[2] <= kPodClip * r.eigenvalues[0]);
  CHECK_THROWS_AS(pod(snap, s.mu, 2), RankDeficient);
  CHECK(pod_up_to(snap, s.mu, 5).modes.cols() == 1);
}

TEST_CASE("POD of orthonormal columns returns them") {
  const Small s;
  Matrix q = random_matrix(s.dofs.np(), 4, 2);
  orthonormalize(q, s.mp);
  const Matrix gram = q.transpose() * (s.mp * q);
  CHECK((gram - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() <= 1e-12);
  const PodResult r = pod(q, s.mp);
  REQUIRE(r.modes.cols() == 4);
  for (int i = 0; i < 4; ++i) CHECK(r.eigenvalues[i] == doctest::Approx(1.0).epsilon(1e-10));
  // equal eigenvalues: the modes span the same space
  const Matrix proj = q.transpose() * (s.mp * r.modes);
  CHECK((proj.transpose() * proj - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("POD energy identity, ordering and orthonormality") {
  const Small s;
  // columns with decaying energy
  Matrix snap = random_matrix(s.dofs.nu(), 12, 3);
  for (int j = 0; j < 12; ++j) snap.col(j) *= std::pow(0.5, j);
  double energy = 0.0;
  for (int j = 0; j < 12; ++j) energy += snap.col(j).dot(s.mu * snap.col(j));
  const PodResult r = pod(snap, s.mu);
  CHECK(r.eigenvalues.sum() == doctest::Approx(energy).epsilon(1e-10));
  CHECK(correlation_matrix(snap, s.mu).trace() == doctest::Approx(energy).epsilon(1e-12));
  for (int i = 1; i < r.eigenvalues.size(); ++i) CHECK(r.eigenvalues[i] <= r.eigenvalues[i - 1]);
  for (int i = 0; i < r.eigenvalues.size(); ++i) CHECK(r.eigenvalues[i] >= 0.0);
  const Matrix g = r.modes.transpose() * (s.mu * r.modes);
  CHECK((g - Matrix::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff() <= 1e-10);
  // truncation keeps the leading modes
  const PodResult t = pod(snap, s.mu, 3);
  CHECK(t.modes.cols() == 3);
  for (int j = 0; j < 3; ++j) CHECK(std::abs(t.modes.col(j).dot(s.mu * r.modes.col(j))) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("orthonormalization rejects dependent columns") {
  const Small s;
  Matrix m = random_matrix(s.dofs.np(), 3, 4);
  m.col(2) = 2.0 * m.col(0) - m.col(1);
  CHECK_THROWS_AS(orthonormalize(m, s.mp), RankDeficient);
}

TEST_CASE("supremizer enrichment and basis slicing") {
  const Matrix lu = random_matrix(10, 3, 5), ls = random_matrix(10, 3, 6);
  const Matrix e = enrich_with_supremizers(lu, ls);
  CHECK(e.cols() == 6);
  CHECK((e.leftCols(3) - lu).norm() == 0.0);
  CHECK((e.rightCols(3) - ls).norm() == 0.0);
  CHECK((enrich_with_supremizers(lu, Matrix(10, 0)) - lu).norm() == 0.0);
  CHECK_THROWS_AS(enrich_with_supremizers(lu, Matrix(9, 2)), ShapeMismatch);

  ReducedBasis b;
  b.velocity = random_matrix(10, 5, 7);
  b.supremizer = random_matrix(10, 3, 8);
  b.pressure = random_matrix(4, 4, 9);
  CHECK(b.max_n(true) == 3);
  CHECK(b.max_n(false) == 4);
  CHECK(b.velocity_space(2, true).cols() == 4);
  CHECK(b.velocity_space(4, false).cols() == 4);
  CHECK_THROWS_AS(b.velocity_space(4, true), ValidationError);
  CHECK(b.pressure_space(2).cols() == 2);
}

TEST_CASE("relative L2 error") {
  const auto m = build_background_mesh({0, 0, 1, 1}, 1.0);
  const DofSystem d(m);
  const SparseMatrix mp = assemble_background_pressure_mass(d);
  const std::vector<char> all(4, 1);
  const Vector f = Vector::Ones(4);
  CHECK(relative_error_L2(f, f, mp, all) == 0.0);
  CHECK(relative_error_L2(f, Vector::Zero(4), mp, all) == doctest::Approx(1.0).epsilon(1e-15));
  // vertex (0,0) touches both triangles: M_00 = 2 * (1/2) * 2/12 = 1/6,
  // and the constant reference has norm^2 = area = 1
  const double delta = 0.3;
  Vector g = f;
  g[0] += delta;
  CHECK(relative_error_L2(f, g, mp, all) == doctest::Approx(delta * std::sqrt(1.0 / 6.0)).epsilon(1e-14));
  // vertex (1,0) touches one triangle: M = 1/12
  g = f;
  g[1] += delta;
  CHECK(relative_error_L2(f, g, mp, all) == doctest::Approx(delta * std::sqrt(1.0 / 12.0)).epsilon(1e-14));
  // masked entries are discarded on both sides
  std::vector<char> mask(4, 1);
  mask[1] = 0;
  CHECK(relative_error_L2(f, g, mp, mask) == 0.0);
  CHECK_THROWS_AS(relative_error_L2(Vector::Zero(4), f, mp, all), ZeroReference);
  CHECK_THROWS(relative_error_L2(f, Vector::Zero(3), mp, all));
}

TEST_CASE("identity basis reproduces the full-order problem") {
  const auto mesh = build_background_mesh({-2, -1, 2, 1}, 0.25);
  const DofSystem dofs(mesh);
  const SparseMatrix mu = assemble_background_velocity_mass(dofs);
  const FomProblem fom(dofs, cylinder(0.1), {}, {});
  const auto& act = fom.space().active();
  std::vector<char> fixed(static_cast<std::size_t>(dofs.nu()), 0);
  for (int dof : fom.bcs().all()) fixed[dof] = 1;
  std::vector<int> cols_u, cols_p;
  for (int i = 0; i < dofs.nu(); ++i) {
    if (act.velocity[i] && !fixed[i]) cols_u.push_back(i);
  }
  for (int i = 0; i < dofs.np(); ++i) {
    if (act.pressure[i]) cols_p.push_back(i);
  }
  Matrix lu = Matrix::Zero(dofs.nu(), static_cast<Eigen::Index>(cols_u.size()));
  Matrix lp = Matrix::Zero(dofs.np(), static_cast<Eigen::Index>(cols_p.size()));
  for (std::size_t j = 0; j < cols_u.size(); ++j) lu(cols_u[j], static_cast<Eigen::Index>(j)) = 1.0;
  for (std::size_t j = 0; j < cols_p.size(); ++j) lp(cols_p[j], static_cast<Eigen::Index>(j)) = 1.0;

  const auto full = fom.solve_steady({});
  const ReducedProblem rp(fom, lu, lp, mu, ReducedMass::Physical);
  const auto red = rp.solve_steady({});
  const auto [u0, p] = rp.reconstruct(red.coefficients);
  CHECK((u0 - full.u0).norm() <= 1e-9 * full.u0.norm());
  CHECK((p - full.p).norm() <= 1e-9 * full.p.norm());

  // coupling block is the transpose of the projected pressure operator
  const SparseMatrix b = fom.assembler().pressure_coupling();
  Matrix phi_u(fom.space().num_velocity(), lu.cols());
  for (int j = 0; j < lu.cols(); ++j) phi_u.col(j) = fom.space().restrict_velocity(lu.col(j));
  Matrix phi_p(fom.space().num_pressure(), lp.cols());
  for (int j = 0; j < lp.cols(); ++j) phi_p.col(j) = fom.space().restrict_pressure(lp.col(j));
  const Matrix expect = (phi_p.transpose() * (b * phi_u)).transpose();
  CHECK((rp.coupling_block() - expect).cwiseAbs().maxCoeff() <= 1e-13 * expect.cwiseAbs().maxCoeff());

  // physical reduced mass: the unsteady reduced trajectory is the full one
  const auto times = time_grid(0.05, 0.2);
  const auto tf = fom.solve_unsteady(times, {});
  const auto tr = rp.solve_unsteady(times, {});
  REQUIRE(tr.failed_step < 0);
  for (std::size_t k = 1; k < times.size(); ++k) {
    const auto [uk, pk] = rp.reconstruct(tr.coefficients[k]);
    CHECK((uk - tf.u0[k]).norm() <= 1e-8 * tf.u0[k].norm());
  }
}

TEST_CASE("reconstruction") {
  const Matrix lu = random_matrix(8, 2, 10), lp = random_matrix(3, 2, 11);
  const Vector lift = Vector::Ones(8);
  const auto [u, p] = reconstruct(Vector::Zero(4), lu, lp, lift);
  CHECK((u - lift).norm() == 0.0);
  CHECK(p.norm() == 0.0);
  Vector a(4), b(4);
  a << 1, 2, 3, 4;
  b << -1, 0.5, 2, 0;
  const auto [ua, pa] = reconstruct(a, lu, lp, lift);
  const auto [ub, pb] = reconstruct(b, lu, lp, lift);
  const auto [us, ps] = reconstruct(a + b, lu, lp, lift);
  CHECK((us - lift - (ua - lift) - (ub - lift)).norm() <= 1e-13);
  CHECK((ps - pa - pb).norm() <= 1e-13);
  CHECK_THROWS_AS(reconstruct(Vector::Zero(3), lu, lp, lift), ShapeMismatch);
}

TEST_CASE("steady reduced model on a small training set") {
  const Small s;
  const auto train = sample_parameters(ParameterSpace::wavy_default(), 6, 12345);
  Matrix su(s.dofs.nu(), 6), ss(s.dofs.nu(), 6), sp(s.dofs.np(), 6);
  std::vector<SteadySolution> sols;
  for (int i = 0; i < 6; ++i) {
    const FomProblem fom(s.dofs, wavy(train.values[i]), {}, {});
    sols.push_back(fom.solve_steady({}));
    su.col(i) = sols.back().u0;
    sp.col(i) = sols.back().p;
    ss.col(i) = fom.solve_supremizer(sols.back().p);
  }
  ReducedBasis b;
  b.velocity = pod(su, s.mu).modes;
  b.supremizer = pod(ss, s.mu).modes;
  b.pressure = pod(sp, s.mp).modes;
  const int n = b.max_n(true);
  REQUIRE(n == 6);

  for (int i : {0, 3}) {
    const FomProblem fom(s.dofs, wavy(train.values[i]), {}, {});
    const ReducedProblem rp(fom, b.velocity_space(n, true), b.pressure_space(n), s.mu);
    const auto red = rp.solve_steady({});
    CHECK(red.report.converged);
    const auto [u0, p] = rp.reconstruct(red.coefficients);
    const auto& act = fom.space().active();
    CHECK(rel(u0 + fom.lifting(), sols[i].u0 + fom.lifting(), s.mu, act.velocity) <= 1e-3);
    CHECK(rel(p, sols[i].p, s.mp, act.pressure) <= 1e-2);
    // strong data are carried by the lifting
    for (int dof : fom.bcs().inlet) CHECK(u0[dof] == doctest::Approx(0.0).epsilon(1e-12));
    // Galerkin solution: perturbing the coefficients raises the residual
    const double r0 = rp.residual(red.coefficients, false).residual.norm();
    std::mt19937_64 rng(77);
    std::normal_distribution<double> g;
    for (int k = 0; k < 20; ++k) {
      Vector c = red.coefficients;
      for (auto& v : c) v += 1e-3 * g(rng);
      CHECK(rp.residual(c, false).residual.norm() >= r0);
    }
  }

  const double test = 0.27;
  const FomProblem fom(s.dofs, wavy(test), {}, {});
  const auto ref = fom.solve_steady({});
  const auto& act = fom.space().active();
  auto error = [&](int k) {
    const ReducedProblem rp(fom, b.velocity_space(k, true), b.pressure_space(k), s.mu);
    const auto [u0, p] = rp.reconstruct(rp.solve_steady({}).coefficients);
    return rel(u0 + fom.lifting(), ref.u0 + fom.lifting(), s.mu, act.velocity);
  };
  CHECK(error(1) > error(n));
}

TEST_CASE("reduced inf-sup constant with and without supremizers") {
  const Small s;
  const auto train = sample_parameters(ParameterSpace::cylinder_default(), 6, 5);
  Matrix su(s.dofs.nu(), 6), ss(s.dofs.nu(), 6), sp(s.dofs.np(), 6);
  for (int i = 0; i < 6; ++i) {
    const FomProblem fom(s.dofs, cylinder(train.values[i]), {}, {});
    const auto sol = fom.solve_steady({});
    su.col(i) = sol.u0;
    sp.col(i) = sol.p;
    ss.col(i) = fom.solve_supremizer(sol.p);
  }
  ReducedBasis b;
  b.velocity = pod(su, s.mu).modes;
  b.supremizer = pod(ss, s.mu).modes;
  b.pressure = pod(sp, s.mp).modes;
  const FomProblem fom(s.dofs, cylinder(0.05), {}, {});
  const int n = b.max_n(true);
  const ReducedProblem with(fom, b.velocity_space(n, true), b.pressure_space(n), s.mu);
  const ReducedProblem without(fom, b.velocity_space(n, false), b.pressure_space(n), s.mu);
  const double bw = with.inf_sup_constant(s.mp), bo = without.inf_sup_constant(s.mp);
  MESSAGE("inf-sup with supremizers " << bw << ", without " << bo);
  CHECK(bw > bo);
  CHECK(bw > 0.0);
}

TEST_CASE("reduced backward Euler reaches the reduced steady state") {
  const Small s;
  const auto train = sample_parameters(ParameterSpace::wavy_default(), 4, 99);
  Matrix su(s.dofs.nu(), 4), ss(s.dofs.nu(), 4), sp(s.dofs.np(), 4);
  for (int i = 0; i < 4; ++i) {
    const FomProblem fom(s.dofs, wavy(train.values[i]), {}, {});
    const auto sol = fom.solve_steady({});
    su.col(i) = sol.u0;
    sp.col(i) = sol.p;
    ss.col(i) = fom.solve_supremizer(sol.p);
  }
  ReducedBasis b;
  b.velocity = pod(su, s.mu).modes;
  b.supremizer = pod(ss, s.mu).modes;
  b.pressure = pod(sp, s.mp).modes;
  const FomProblem fom(s.dofs, wavy(0.21), {}, {});
  const ReducedProblem rp(fom, b.velocity_space(4, true), b.pressure_space(4), s.mu);
  const auto steady = rp.solve_steady({});
  const auto times = time_grid(0.5, 25.0);
  const auto tr = rp.solve_unsteady(times, {});
  REQUIRE(tr.failed_step < 0);
  CHECK(tr.times == times);
  const auto [us, ps] = rp.reconstruct(steady.coefficients);
  const auto [ut, pt] = rp.reconstruct(tr.coefficients.back());
  CHECK(rel(ut + fom.lifting(), us + fom.lifting(), s.mu, fom.space().active().velocity) <= 1e-3);
}
