#include <doctest.h>

#include <cmath>

#include "agfem/error_norms.hpp"
#include "agfem/spectral.hpp"

using namespace agfem;

namespace {

struct Setup {
  LevelSetGeometry geom;
  BackgroundMesh mesh;
  AggregateMap map;
  FESpace act, interior;
  ConstraintSet cs;
  AssemblyInput in;
};

Setup aggregated_circle(int m, int q) {
  Setup s;
  s.geom = builtin_shapes("circle");
  s.mesh = build_mesh(Box{}, {1 << m, 1 << m, 1}, 2);
  classify_cells(s.mesh, s.geom);
  s.map = aggregate_cells(s.mesh, s.geom);
  s.act = build_space(s.mesh, q, SpaceFlavor::Active);
  s.interior = build_space(s.mesh, q, SpaceFlavor::Interior);
  s.cs = build_constraints(s.act, s.interior, node_to_root(s.map, s.mesh, s.act, s.interior));
  s.in.mesh = &s.mesh;
  s.in.geom = &s.geom;
  s.in.active = &s.act;
  s.in.constraints = &s.cs;
  s.in.q = q;
  s.in.subdiv = default_subdiv(q);
  s.in.flavor = SystemFlavor::Aggregated;
  return s;
}

ErrorReport galerkin_errors(Setup& s, const ManufacturedSolution& ms, int* dofs = nullptr) {
  PoissonData d;
  d.f = ms.f;
  d.g_dirichlet = ms.u;
  const auto sys = assemble_stiffness(s.in, d);
  const auto rep = solve_cg(sys.A, sys.b, 1e-13);
  REQUIRE(rep.converged);
  if (dofs) *dofs = int(sys.A.n);
  return compute_errors(s.in, rep.x, ms);
}

}  // namespace

TEST_SUITE_BEGIN("errors");

TEST_CASE("interpolant of an affine field has zero energy error") {
  auto s = aggregated_circle(4, 1);
  const auto affine = affine_solution(2, 0.1, {2.0, -1.0, 0.0});
  const auto u_in = interpolate(s.cs, affine.u);
  const auto err = compute_errors(s.in, u_in, affine);
  CHECK(err.energy_error <= 1e-9);
  CHECK(err.h == doctest::Approx(s.mesh.h_max()));
  CHECK(err.q == 1);
  CHECK(err.dofs == s.interior.num_nodes);
}

TEST_CASE("u_h = 0 against u = 1 on the all-interior unit box") {
  Setup s;
  s.geom.dim = 2;
  s.geom.snap_eps = 1e-6;
  s.geom.psi = [](const Vec3&) { return -1.0; };
  s.mesh = build_mesh(Box{}, {8, 8, 1}, 2);
  classify_cells(s.mesh, s.geom);
  s.act = build_space(s.mesh, 1, SpaceFlavor::Active);
  s.in.mesh = &s.mesh;
  s.in.geom = &s.geom;
  s.in.active = &s.act;
  s.in.q = 1;
  s.in.flavor = SystemFlavor::Standard;

  ManufacturedSolution one;
  one.dim = 2;
  one.u = [](const Vec3&) { return 1.0; };
  one.grad_u = [](const Vec3&) { return Vec3{0, 0, 0}; };
  one.f = [](const Vec3&) { return 0.0; };
  const std::vector<double> zero(std::size_t(s.act.num_nodes), 0.0);
  const auto err = compute_errors(s.in, zero, one);
  CHECK(err.l2_error == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(err.energy_error == doctest::Approx(0.0));

  CHECK_THROWS_AS(compute_errors(s.in, std::vector<double>(3), one), InputError);
}

TEST_CASE("energy error halves per refinement (q=1 circle benchmark)") {
  // asymptotic band, so use the finest affordable pair: the aggregated space
  // carries a boundary-strip error component that decays only gradually
  const auto ms = manufactured(2);
  auto s7 = aggregated_circle(7, 1);
  auto s8 = aggregated_circle(8, 1);
  const double e7 = galerkin_errors(s7, ms).energy_error;
  const double e8 = galerkin_errors(s8, ms).energy_error;
  const double ratio = e7 / e8;
  CHECK(ratio >= 1.8);
  CHECK(ratio <= 2.2);
}

TEST_CASE("Galerkin error within 5x of the interpolant error (Cea-style)") {
  const auto ms = manufactured(2);
  for (int q : {1, 2}) {
    auto s = aggregated_circle(5, q);
    const auto galerkin = galerkin_errors(s, ms);
    const auto interp = compute_errors(s.in, interpolate(s.cs, ms.u), ms);
    CHECK(galerkin.energy_error <= 5.0 * interp.energy_error);
  }
}

TEST_CASE("quadrature-degree bump changes reported errors by < 0.5%") {
  const auto ms = manufactured(2);
  auto s = aggregated_circle(6, 2);
  PoissonData d;
  d.f = ms.f;
  d.g_dirichlet = ms.u;
  const auto sys = assemble_stiffness(s.in, d);
  const auto rep = solve_cg(sys.A, sys.b, 1e-13);
  REQUIRE(rep.converged);

  const auto err = compute_errors(s.in, rep.x, ms);
  // reference: one more degree on top of the already-bumped rule
  auto in2 = s.in;
  in2.subdiv = s.in.subdiv + 1;
  const auto err2 = compute_errors(in2, rep.x, ms);
  CHECK(std::abs(err.energy_error - err2.energy_error) <= 5e-3 * err.energy_error);
  CHECK(std::abs(err.l2_error - err2.l2_error) <= 5e-3 * err.l2_error);
}

TEST_CASE("parallel error reduction agrees with the serial reference") {
  const auto ms = manufactured(2);
  auto s = aggregated_circle(5, 1);
  const auto u_in = interpolate(s.cs, ms.u);
  s.in.exec = Exec::Serial;
  const auto a = compute_errors(s.in, u_in, ms);
  s.in.exec = Exec::Parallel;
  const auto b = compute_errors(s.in, u_in, ms);
  CHECK(a.energy_error == doctest::Approx(b.energy_error).epsilon(1e-13));
  CHECK(a.l2_error == doctest::Approx(b.l2_error).epsilon(1e-13));
}

TEST_SUITE_END();
