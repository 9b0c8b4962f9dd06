#include <doctest.h>

#include <cmath>
#include <random>

#include "agfem/mesh.hpp"
#include "agfem/quadrature.hpp"

using namespace agfem;

namespace {

const double kPi = std::acos(-1.0);

LevelSetGeometry plane2d(double c) {
  LevelSetGeometry g;
  g.dim = 2;
  g.snap_eps = 1e-6;
  g.psi = [=](const Vec3& x) { return x[0] - c; };
  return g;
}

double bulk_sum(const CutQuadrature& r) {
  double s = 0.0;
  for (const auto& p : r.bulk) s += p.w;
  return s;
}

double surf_sum(const CutQuadrature& r) {
  double s = 0.0;
  for (const auto& p : r.surface) s += p.w;
  return s;
}

}  // namespace

TEST_SUITE_BEGIN("quadrature");

TEST_CASE("interior tensor rule: measure and Gauss exactness") {
  auto mesh = build_mesh(Box{}, {4, 4, 1}, 2);
  const double h = mesh.h[0];
  for (int q : {1, 2}) {
    const auto r = interior_rule(mesh, 0, q);
    CHECK(int(r.bulk.size()) == (q + 1) * (q + 1));
    CHECK(bulk_sum(r) == doctest::Approx(h * h).epsilon(1e-14));

    double ix2 = 0.0, ixodd = 0.0;
    for (const auto& p : r.bulk) {
      ix2 += p.w * p.x[0] * p.x[0];
      ixodd += p.w * std::pow(p.x[0], 2 * q + 1);
    }
    CHECK(ix2 == doctest::Approx(h * h * h * h / 3.0).epsilon(1e-14));
    CHECK(ixodd == doctest::Approx(h * h * std::pow(h, 2 * q + 1) / (2 * q + 2)).epsilon(1e-13));
  }
}

TEST_CASE("half-plane cut: exact area and interface length") {
  auto mesh = build_mesh(Box{}, {4, 4, 1}, 2);
  const auto g = plane2d(0.1);  // cuts the first column of cells
  classify_cells(mesh, g);
  const auto cell = mesh.cell_id(0, 2);
  REQUIRE(mesh.klass(cell) == CellClass::Cut);
  for (int r : {0, 1, 2}) {
    const auto rule = cut_rule(mesh, g, cell, 1, r);
    CHECK(bulk_sum(rule) == doctest::Approx(0.1 * 0.25).epsilon(1e-12));
    CHECK(surf_sum(rule) == doctest::Approx(0.25).epsilon(1e-12));
    for (const auto& p : rule.surface) {
      CHECK(p.n[0] == doctest::Approx(1.0).epsilon(1e-12));  // outward: psi grows with x
      CHECK(std::abs(p.n[1]) < 1e-12);
    }
    for (const auto& p : rule.bulk) CHECK(p.w > 0.0);
  }
}

TEST_CASE("circle benchmark: area and perimeter at the reference setting") {
  auto mesh = build_mesh(Box{}, {32, 32, 1}, 2);
  const auto g = builtin_shapes("circle");
  classify_cells(mesh, g);
  const auto [vol, surf] = domain_measures(mesh, g, 2, 2);
  const double area = kPi * 0.25 * 0.25;
  const double per = 2.0 * kPi * 0.25;
  CHECK(std::abs(vol - area) <= 1e-5 * area);
  CHECK(std::abs(surf - per) <= 1e-4 * per);
}

TEST_CASE("measures converge at rate >= 2 in h for fixed subdivision") {
  const auto g = builtin_shapes("circle");
  const double area = kPi * 0.0625;
  std::vector<double> errs;
  for (int m : {3, 4, 5}) {
    auto mesh = build_mesh(Box{}, {1 << m, 1 << m, 1}, 2);
    classify_cells(mesh, g);
    const auto [vol, surf] = domain_measures(mesh, g, 1, 0);
    (void)surf;
    errs.push_back(std::abs(vol - area));
  }
  CHECK(errs[0] / errs[1] >= 4.0 * 0.7);
  CHECK(errs[1] / errs[2] >= 4.0 * 0.7);
}

TEST_CASE("subdivision refinement monotonically reduces the area error") {
  auto mesh = build_mesh(Box{}, {32, 32, 1}, 2);
  const auto g = builtin_shapes("circle");
  classify_cells(mesh, g);
  const double area = kPi * 0.0625;
  double prev = 1e300;
  for (int r : {0, 1, 2}) {
    const auto [vol, surf] = domain_measures(mesh, g, 1, r);
    (void)surf;
    const double err = std::abs(vol - area);
    CHECK(err <= prev);
    prev = err;
  }
}

TEST_CASE("surface points sit on the interface to O(h^2)") {
  // constant calibrated once on the circle benchmark; asserted thereafter
  const double C = 0.5;
  for (int m : {4, 5, 6}) {
    auto mesh = build_mesh(Box{}, {1 << m, 1 << m, 1}, 2);
    const auto g = builtin_shapes("circle");
    classify_cells(mesh, g);
    const double h = mesh.h[0];
    for (std::int64_t c = 0; c < mesh.num_cells(); ++c) {
      if (mesh.klass(c) != CellClass::Cut) continue;
      const auto rule = cut_rule(mesh, g, c, 1, 0);
      for (const auto& p : rule.surface) {
        CHECK(std::abs(g.psi(p.x)) <= C * h * h);
        CHECK(std::abs(norm(p.n) - 1.0) <= 1e-12);
        CHECK(p.w > 0.0);
      }
      for (const auto& p : rule.bulk) {
        CHECK(p.w > 0.0);
        CHECK(g.psi(p.x) <= C * h * h);
      }
    }
  }
}

TEST_CASE("normals point from inside to outside") {
  auto mesh = build_mesh(Box{}, {16, 16, 1}, 2);
  const auto g = builtin_shapes("circle");
  classify_cells(mesh, g);
  for (std::int64_t c = 0; c < mesh.num_cells(); ++c) {
    if (mesh.klass(c) != CellClass::Cut) continue;
    const auto rule = cut_rule(mesh, g, c, 1, 1);
    for (const auto& p : rule.surface) {
      const double step = 1e-4;
      CHECK(g.psi(p.x + step * p.n) > g.psi(p.x - step * p.n));
    }
  }
}

TEST_CASE("marching complementarity: inside(psi) + inside(-psi) tiles the cell") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const auto run_both = [](BackgroundMesh& mesh, const LevelSetGeometry& g, int q) {
    LevelSetGeometry gneg = g;
    gneg.psi = [&g](const Vec3& x) { return -g.psi(x); };
    classify_cells(mesh, g);
    auto meshneg = mesh;
    classify_cells(meshneg, gneg);
    for (std::int64_t c = 0; c < mesh.num_cells(); ++c) {
      if (mesh.klass(c) != CellClass::Cut || meshneg.klass(c) != CellClass::Cut) continue;
      for (int sub : {0, 1}) {
        const auto ra = cut_rule(mesh, g, c, q, sub);
        const auto rb = cut_rule(meshneg, gneg, c, q, sub);
        CHECK(bulk_sum(ra) + bulk_sum(rb) == doctest::Approx(mesh.cell_volume()).epsilon(1e-11));
        CHECK(surf_sum(ra) == doctest::Approx(surf_sum(rb)).epsilon(1e-11));
      }
    }
  };

  // resolved circles (the regime the method is built for)
  for (int trial = 0; trial < 20; ++trial) {
    auto mesh = build_mesh(Box{}, {4, 4, 1}, 2);
    const double cx = 0.35 + 0.3 * unif(rng), cy = 0.35 + 0.3 * unif(rng);
    const double r = 0.3 + 0.15 * unif(rng);
    LevelSetGeometry g;
    g.dim = 2;
    g.snap_eps = 0.0;
    g.psi = [=](const Vec3& x) { return std::hypot(x[0] - cx, x[1] - cy) - r; };
    run_both(mesh, g, trial % 2 + 1);
  }

  // straight interfaces at arbitrary angles are exact at any resolution
  for (int trial = 0; trial < 20; ++trial) {
    auto mesh = build_mesh(Box{}, {2, 2, 1}, 2);
    const double ang = 2 * kPi * unif(rng), c = -0.7 + 1.4 * unif(rng);
    LevelSetGeometry g;
    g.dim = 2;
    g.snap_eps = 0.0;
    g.psi = [=](const Vec3& x) {
      return std::cos(ang) * (x[0] - 0.5) + std::sin(ang) * (x[1] - 0.5) - c;
    };
    run_both(mesh, g, 1);
  }

  // 3D marching tets carry no curvature and tile exactly at any resolution
  for (int trial = 0; trial < 10; ++trial) {
    auto mesh = build_mesh(Box{}, {2, 2, 2}, 3);
    const double cx = unif(rng), cy = unif(rng), cz = unif(rng);
    const double r = 0.15 + 0.5 * unif(rng);
    LevelSetGeometry g;
    g.dim = 3;
    g.snap_eps = 0.0;
    g.psi = [=](const Vec3& x) {
      return std::sqrt((x[0] - cx) * (x[0] - cx) + (x[1] - cy) * (x[1] - cy) +
                       (x[2] - cz) * (x[2] - cz)) - r;
    };
    run_both(mesh, g, 1);
  }
}

TEST_CASE("3D sphere volume and area") {
  const auto g = builtin_shapes("sphere");
  auto mesh = build_mesh(Box{}, {16, 16, 16}, 3);
  classify_cells(mesh, g);
  const auto [vol, surf] = domain_measures(mesh, g, 1, 1, Exec::Parallel);
  const double r = 0.25;
  CHECK(std::abs(vol - 4.0 / 3.0 * kPi * r * r * r) <= 1e-2 * 4.0 / 3.0 * kPi * r * r * r);
  CHECK(std::abs(surf - 4.0 * kPi * r * r) <= 2e-2 * 4.0 * kPi * r * r);
}

TEST_CASE("all-interior box measures") {
  auto mesh = build_mesh(Box{}, {8, 8, 1}, 2);
  const auto g = plane2d(10.0);
  classify_cells(mesh, g);
  const auto [vol, surf] = domain_measures(mesh, g, 1, 0);
  CHECK(vol == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(surf == 0.0);
}

TEST_CASE("box facet rule: full and clipped facets") {
  auto mesh = build_mesh(Box{}, {4, 4, 1}, 2);
  const auto gin = plane2d(10.0);
  classify_cells(mesh, gin);
  const auto full = box_facet_rule(mesh, gin, mesh.cell_id(0, 1), 0, 0, 1);
  double s = 0.0;
  for (const auto& p : full) {
    s += p.w;
    CHECK(p.n[0] == -1.0);
  }
  CHECK(s == doctest::Approx(0.25).epsilon(1e-14));

  // boundary crosses the box edge: facet x=0 is clipped at y = 0.3
  LevelSetGeometry diag;
  diag.dim = 2;
  diag.snap_eps = 1e-6;
  diag.psi = [](const Vec3& x) { return x[1] - 0.3; };
  classify_cells(mesh, diag);
  const auto clipped = box_facet_rule(mesh, diag, mesh.cell_id(0, 1), 0, 0, 1);
  double sc = 0.0;
  for (const auto& p : clipped) sc += p.w;
  CHECK(sc == doctest::Approx(0.05).epsilon(1e-12));
}

TEST_CASE("parallel measures agree with the serial reference") {
  auto mesh = build_mesh(Box{}, {32, 32, 1}, 2);
  const auto g = builtin_shapes("circle");
  classify_cells(mesh, g);
  const auto [v1, s1] = domain_measures(mesh, g, 2, 1, Exec::Serial);
  const auto [v2, s2] = domain_measures(mesh, g, 2, 1, Exec::Parallel);
  CHECK(v1 == doctest::Approx(v2).epsilon(1e-13));
  CHECK(s1 == doctest::Approx(s2).epsilon(1e-13));
}

TEST_SUITE_END();
