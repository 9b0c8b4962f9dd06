#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "agfem/assembly.hpp"
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

Setup make_setup(const LevelSetGeometry& geom, int m, int q, SystemFlavor flavor,
                 bool box_nitsche = false) {
  Setup s;
  s.geom = geom;
  s.mesh = build_mesh(Box{}, {1 << m, 1 << m, 1}, 2);
  classify_cells(s.mesh, s.geom);
  if (flavor == SystemFlavor::Aggregated) {
    s.map = aggregate_cells(s.mesh, s.geom);
    s.act = build_space(s.mesh, q, SpaceFlavor::Active);
    s.interior = build_space(s.mesh, q, SpaceFlavor::Interior);
    s.cs = build_constraints(s.act, s.interior, node_to_root(s.map, s.mesh, s.act, s.interior));
  } else {
    s.act = build_space(s.mesh, q, SpaceFlavor::Active);
  }
  s.in.mesh = &s.mesh;
  s.in.geom = &s.geom;
  s.in.active = &s.act;
  s.in.constraints = flavor == SystemFlavor::Aggregated ? &s.cs : nullptr;
  s.in.q = q;
  s.in.subdiv = default_subdiv(q);
  s.in.flavor = flavor;
  s.in.nitsche_on_box = box_nitsche;
  return s;
}

LevelSetGeometry everywhere() {
  LevelSetGeometry g;
  g.dim = 2;
  g.snap_eps = 1e-6;
  g.psi = [](const Vec3&) { return -1.0; };
  return g;
}

PoissonData data_for(const ManufacturedSolution& ms) {
  PoissonData d;
  d.f = ms.f;
  d.g_dirichlet = ms.u;
  return d;
}

}  // namespace

TEST_SUITE_BEGIN("assembly");

TEST_CASE("single-cell bulk stiffness diagonal is 2/3") {
  auto mesh = build_mesh(Box{{0, 0, 0}, {0.3, 0.3, 0}, }, {1, 1, 1}, 2);
  const auto g = everywhere();
  classify_cells(mesh, g);
  auto act = build_space(mesh, 1, SpaceFlavor::Active);
  AssemblyInput in;
  in.mesh = &mesh;
  in.geom = &g;
  in.active = &act;
  in.q = 1;
  in.flavor = SystemFlavor::Standard;
  PoissonData d;
  d.f = [](const Vec3&) { return 0.0; };
  d.g_dirichlet = [](const Vec3&) { return 0.0; };
  const auto sys = assemble_stiffness(in, d);
  for (int i = 0; i < 4; ++i)
    CHECK(sys.A.entry(i, i) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("body-fitted sanity: Nitsche on the box boundary gives an SPD system") {
  auto s = make_setup(everywhere(), 3, 1, SystemFlavor::Standard, /*box_nitsche=*/true);
  const auto ms = manufactured(2);
  const auto sys = assemble_stiffness(s.in, data_for(ms));
  CHECK(sys.A.symmetry_gap() <= 1e-12 * sys.A.max_abs());
  const auto est = cond_estimate(sys.A);
  CHECK(est.lambda_min > 0.0);

  // and the discrete solution approximates the manufactured solution
  const auto rep = solve_cg(sys.A, sys.b, 1e-13);
  REQUIRE(rep.converged);
  const auto err = compute_errors(s.in, rep.x, ms);
  CHECK(err.l2_error < 0.5);

  // body-fitted affine patch test is exact
  const auto affine = affine_solution(2, 0.2, {1.0, -2.0, 0.0});
  const auto sysa = assemble_stiffness(s.in, data_for(affine));
  const auto repa = solve_cg(sysa.A, sysa.b, 1e-14);
  REQUIRE(repa.converged);
  CHECK(compute_errors(s.in, repa.x, affine).energy_error <= 1e-9);
}

TEST_CASE("patch test: affine solution on the aggregated circle benchmark") {
  const auto affine = affine_solution(2, 0.3, {1.0, 1.0, 0.0});
  for (int q : {1, 2}) {
    auto s = make_setup(builtin_shapes("circle"), 4, q, SystemFlavor::Aggregated);
    const auto sys = assemble_stiffness(s.in, data_for(affine));
    CHECK(sys.A.n == s.interior.num_nodes);
    const auto rep = solve_cg(sys.A, sys.b, 1e-14);
    REQUIRE(rep.converged);
    const auto err = compute_errors(s.in, rep.x, affine);
    CHECK(err.energy_error <= 1e-9);
  }
}

TEST_CASE("symmetry and coercivity of the aggregated benchmark matrix") {
  for (int q : {1, 2}) {
    auto s = make_setup(builtin_shapes("circle"), 4, q, SystemFlavor::Aggregated);
    const auto sys = assemble_stiffness(s.in, data_for(manufactured(2)));
    CHECK(sys.A.symmetry_gap() <= 1e-12 * sys.A.max_abs());
    const auto est = cond_estimate(sys.A);
    CHECK(est.lambda_min > 0.0);  // beta = 100 regime
  }
}

TEST_CASE("cell-loop constrained assembly equals the global EtAE product") {
  for (int q : {1, 2}) {
    auto s = make_setup(builtin_shapes("circle"), 3, q, SystemFlavor::Aggregated);
    const auto ms = manufactured(2);
    const auto agg_sys = assemble_stiffness(s.in, data_for(ms));

    // standard-space matrix on the same mesh/quadrature
    AssemblyInput std_in = s.in;
    std_in.flavor = SystemFlavor::Standard;
    std_in.constraints = nullptr;
    const auto act_sys = assemble_stiffness(std_in, data_for(ms));

    // dense E (act x in), then E^T A_act E via Eigen
    const auto na = s.act.num_nodes, ni = s.interior.num_nodes;
    Eigen::MatrixXd E = Eigen::MatrixXd::Zero(na, ni);
    for (std::int64_t n = 0; n < na; ++n) {
      const auto in_id = s.cs.interior_of_act[std::size_t(n)];
      if (in_id >= 0) {
        E(n, in_id) = 1.0;
      } else {
        const auto r = std::size_t(s.cs.row_of_act[std::size_t(n)]);
        for (std::size_t k = s.cs.row_ptr[r]; k < s.cs.row_ptr[r + 1]; ++k)
          E(n, s.cs.cols[k]) = s.cs.vals[k];
      }
    }
    Eigen::MatrixXd Aact = Eigen::MatrixXd::Zero(na, na);
    for (std::int64_t i = 0; i < na; ++i)
      for (auto k = act_sys.A.row_ptr[std::size_t(i)]; k < act_sys.A.row_ptr[std::size_t(i) + 1];
           ++k)
        Aact(i, act_sys.A.col[std::size_t(k)]) = act_sys.A.val[std::size_t(k)];
    const Eigen::MatrixXd ref = E.transpose() * Aact * E;

    double gap = 0.0;
    for (std::int64_t i = 0; i < ni; ++i)
      for (std::int64_t j = 0; j < ni; ++j)
        gap = std::max(gap, std::abs(ref(i, j) - agg_sys.A.entry(i, j)));
    CHECK(gap <= 1e-11 * std::max(1.0, act_sys.A.max_abs()));

    // the rhs transforms with E^T as well
    Eigen::VectorXd bact(na);
    for (std::int64_t i = 0; i < na; ++i) bact(i) = act_sys.b[std::size_t(i)];
    const Eigen::VectorXd bref = E.transpose() * bact;
    for (std::int64_t i = 0; i < ni; ++i)
      CHECK(std::abs(bref(i) - agg_sys.b[std::size_t(i)]) <= 1e-11 * (1.0 + bref.norm()));
  }
}

TEST_CASE("mass matrix: measure identities and conditioning oracle") {
  // all-interior unit box: 1^T M 1 = |box| = 1
  auto s0 = make_setup(everywhere(), 3, 1, SystemFlavor::Standard);
  const auto M0 = assemble_mass(s0.in);
  std::vector<double> ones(std::size_t(M0.n), 1.0), y(std::size_t(M0.n));
  M0.multiply(ones, y);
  double s = 0.0;
  for (const double v : y) s += v;
  CHECK(s == doctest::Approx(1.0).epsilon(1e-12));

  // aggregated circle: 1^T M 1 = |Omega|
  auto s1 = make_setup(builtin_shapes("circle"), 5, 1, SystemFlavor::Aggregated);
  const auto M1 = assemble_mass(s1.in);
  std::vector<double> o1(std::size_t(M1.n), 1.0), y1(std::size_t(M1.n));
  M1.multiply(o1, y1);
  double s1v = 0.0;
  for (const double v : y1) s1v += v;
  const double area = std::acos(-1.0) * 0.0625;
  CHECK(std::abs(s1v - area) <= 1e-5 * area);

  // kappa_2(M) from Lanczos matches a dense eigensolve to 1%
  auto s2 = make_setup(builtin_shapes("circle"), 3, 1, SystemFlavor::Aggregated);
  const auto M2 = assemble_mass(s2.in);
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(M2.n, M2.n);
  for (std::int64_t i = 0; i < M2.n; ++i)
    for (auto k = M2.row_ptr[std::size_t(i)]; k < M2.row_ptr[std::size_t(i) + 1]; ++k)
      D(i, M2.col[std::size_t(k)]) = M2.val[std::size_t(k)];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(D);
  const double kref = es.eigenvalues()(M2.n - 1) / es.eigenvalues()(0);
  CHECK(es.eigenvalues()(0) > 0.0);  // SPD on the aggregated space
  const auto est = cond_estimate(M2);
  CHECK(std::abs(est.kappa - kref) <= 0.01 * kref);
}

TEST_CASE("local Nitsche constant: oracle, slivers, interior cells") {
  // half-cut cell against Eigen's generalized eigensolver
  LevelSetGeometry half;
  half.dim = 2;
  half.snap_eps = 1e-6;
  half.psi = [](const Vec3& x) { return x[0] - 0.5; };
  auto mesh = build_mesh(Box{}, {1, 1, 1}, 2);
  classify_cells(mesh, half);
  REQUIRE(mesh.klass(0) == CellClass::Cut);
  const double ck = local_nitsche_constant(mesh, half, 0, 1, 0);

  {
    // independent dense assembly of B and D on the same rule + Eigen
    const auto rule = cut_rule(mesh, half, 0, 1, 0);
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(4, 4), D = Eigen::MatrixXd::Zero(4, 4);
    auto grads = [&](const Vec3& x, Vec3 g[4]) {
      const double xs = x[0], ys = x[1];
      g[0] = {-(1 - ys), -(1 - xs), 0};
      g[1] = {(1 - ys), -xs, 0};
      g[2] = {-ys, (1 - xs), 0};
      g[3] = {ys, xs, 0};
    };
    Vec3 g4[4];
    for (const auto& p : rule.bulk) {
      grads(p.x, g4);
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) D(a, b) += p.w * dot(g4[a], g4[b]);
    }
    for (const auto& p : rule.surface) {
      grads(p.x, g4);
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) B(a, b) += p.w * dot(p.n, g4[a]) * dot(p.n, g4[b]);
    }
    D += 1e-12 * (D.trace() / 4.0) * Eigen::MatrixXd::Identity(4, 4);
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(B, D);
    CHECK(ck == doctest::Approx(ges.eigenvalues().maxCoeff()).epsilon(1e-8));
  }

  // shrinking sliver: C_K grows without bound
  double prev = 0.0;
  for (const double c : {0.5, 0.1, 0.01, 1e-3, 1e-4}) {
    LevelSetGeometry sliver;
    sliver.dim = 2;
    sliver.snap_eps = 0.0;
    sliver.psi = [c](const Vec3& x) { return x[0] - c; };
    auto m1 = build_mesh(Box{}, {1, 1, 1}, 2);
    classify_cells(m1, sliver);
    const double v = local_nitsche_constant(m1, sliver, 0, 1, 0);
    CHECK(v > prev);
    prev = v;
  }

  // interior cell: not applicable, B = 0 => C_K = 0
  auto m2 = build_mesh(Box{}, {2, 2, 1}, 2);
  const auto g = everywhere();
  classify_cells(m2, g);
  CHECK(local_nitsche_constant(m2, g, 0, 1, 0) == 0.0);
}

TEST_CASE("parallel assembly agrees with the serial reference") {
  for (const auto flavor : {SystemFlavor::Aggregated, SystemFlavor::Standard}) {
    auto s = make_setup(builtin_shapes("circle"), 5, 2, flavor);
    const auto ms = manufactured(2);
    s.in.exec = Exec::Serial;
    const auto a = assemble_stiffness(s.in, data_for(ms));
    s.in.exec = Exec::Parallel;
    const auto b = assemble_stiffness(s.in, data_for(ms));
    REQUIRE(a.A.nnz() == b.A.nnz());
    const double scale = a.A.max_abs();
    for (std::size_t k = 0; k < a.A.nnz(); ++k) {
      CHECK(a.A.col[k] == b.A.col[k]);
      CHECK(std::abs(a.A.val[k] - b.A.val[k]) <= 1e-12 * scale);
    }
    for (std::size_t i = 0; i < a.b.size(); ++i)
      CHECK(std::abs(a.b[i] - b.b[i]) <= 1e-12 * (1.0 + std::abs(a.b[i])));

    // parallel mode is reproducible run-to-run
    const auto b2 = assemble_stiffness(s.in, data_for(ms));
    CHECK(b.A.val == b2.A.val);
  }
}

TEST_CASE("neumann hook: affine solution with one flux side stays exact") {
  auto s = make_setup(everywhere(), 3, 1, SystemFlavor::Standard, /*box_nitsche=*/true);
  const auto affine = affine_solution(2, 0.1, {2.0, -1.0, 0.0});
  PoissonData d = data_for(affine);
  // the x = 1 box side carries the exact flux instead of a Dirichlet value
  d.is_neumann = [](const Vec3& x) { return x[0] > 1.0 - 1e-12; };
  d.g_neumann = [&affine](const Vec3& x) { return affine.grad_u(x)[0]; };
  const auto sys = assemble_stiffness(s.in, d);
  const auto rep = solve_cg(sys.A, sys.b, 1e-14);
  REQUIRE(rep.converged);
  CHECK(compute_errors(s.in, rep.x, affine).energy_error <= 1e-9);
}

TEST_CASE("non-finite element data is reported with the cell id") {
  auto s = make_setup(builtin_shapes("circle"), 3, 1, SystemFlavor::Aggregated);
  PoissonData d;
  d.f = [](const Vec3&) { return std::nan(""); };
  d.g_dirichlet = [](const Vec3&) { return 0.0; };
  bool threw = false;
  std::string msg;
  try {
    assemble_stiffness(s.in, d);
  } catch (const std::runtime_error& e) {
    threw = true;
    msg = e.what();
  }
  CHECK(threw);
  CHECK(msg.find("non-finite element entry in cell") != std::string::npos);

  // the parallel path propagates the same error
  s.in.exec = Exec::Parallel;
  CHECK_THROWS_AS(assemble_stiffness(s.in, d), std::runtime_error);
}

TEST_CASE("matrix market export") {
  auto s = make_setup(builtin_shapes("circle"), 3, 1, SystemFlavor::Aggregated);
  const auto sys = assemble_stiffness(s.in, data_for(manufactured(2)));
  const auto path = std::filesystem::temp_directory_path() / "agfem_mm_test.mtx";
  write_matrix_market(sys.A, path.string());
  std::ifstream f(path);
  std::string header;
  std::getline(f, header);
  CHECK(header == "%%MatrixMarket matrix coordinate real symmetric");
  std::int64_t rows, cols;
  std::size_t nnz;
  f >> rows >> cols >> nnz;
  CHECK(rows == sys.A.n);
  CHECK(cols == sys.A.n);
  std::size_t seen = 0;
  std::int64_t i, j;
  double v;
  while (f >> i >> j >> v) {
    CHECK(j <= i);  // lower triangle, 1-based
    CHECK(v == sys.A.entry(i - 1, j - 1));
    ++seen;
  }
  CHECK(seen == nnz);
  std::filesystem::remove(path);
}

TEST_CASE("local-eigenvalue tau rule keeps the system SPD and the patch test exact") {
  auto s = make_setup(builtin_shapes("circle"), 4, 1, SystemFlavor::Aggregated);
  s.in.params.rule = TauRule::LocalEigenvalue;
  const auto affine = affine_solution(2, -0.2, {0.5, 2.0, 0.0});
  const auto sys = assemble_stiffness(s.in, data_for(affine));
  CHECK(sys.tau_rule.rule == TauRule::LocalEigenvalue);
  const auto est = cond_estimate(sys.A);
  CHECK(est.lambda_min > 0.0);
  const auto rep = solve_cg(sys.A, sys.b, 1e-14);
  REQUIRE(rep.converged);
  CHECK(compute_errors(s.in, rep.x, affine).energy_error <= 1e-9);
}

TEST_CASE("aggregated flavor without constraints is rejected") {
  auto s = make_setup(builtin_shapes("circle"), 3, 1, SystemFlavor::Standard);
  s.in.flavor = SystemFlavor::Aggregated;
  CHECK_THROWS_AS(assemble_stiffness(s.in, data_for(manufactured(2))), InputError);
}

TEST_SUITE_END();
