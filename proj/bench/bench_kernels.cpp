// Serial reference vs OpenMP kernels: cut quadrature + assembly, spmv,
// error norms. Prints a timing table; not part of the test suite.

#include <omp.h>

#include <chrono>
#include <cstdio>

#include "agfem/error_norms.hpp"
#include "agfem/experiments.hpp"

using namespace agfem;

namespace {

double wall() {
  using clk = std::chrono::steady_clock;
  return std::chrono::duration<double>(clk::now().time_since_epoch()).count();
}

template <class F>
double timed(const F& f, int reps = 1) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const double t0 = wall();
    f();
    best = std::min(best, wall() - t0);
  }
  return best;
}

}  // namespace

int main(int argc, char** argv) {
  int m = argc > 1 ? std::atoi(argv[1]) : 7;
  int q = argc > 2 ? std::atoi(argv[2]) : 2;

  auto geom = builtin_shapes("circle");
  auto mesh = build_mesh(Box{}, {1 << m, 1 << m, 1}, 2);
  classify_cells(mesh, geom);
  auto agg = aggregate_cells(mesh, geom);
  auto act = build_space(mesh, q, SpaceFlavor::Active);
  auto interior = build_space(mesh, q, SpaceFlavor::Interior);
  auto cs = build_constraints(act, interior, node_to_root(agg, mesh, act, interior));

  AssemblyInput in;
  in.mesh = &mesh;
  in.geom = &geom;
  in.active = &act;
  in.constraints = &cs;
  in.q = q;
  in.subdiv = default_subdiv(q);
  const auto ms = manufactured(2);
  PoissonData data;
  data.f = ms.f;
  data.g_dirichlet = ms.u;

  std::printf("mesh 2^%d, q=%d, %lld interior dofs, %d threads\n", m, q,
              static_cast<long long>(interior.num_nodes), omp_get_max_threads());
  std::printf("%-28s %10s %10s %8s\n", "kernel", "serial[s]", "omp[s]", "speedup");

  SparseSystem sys;
  in.exec = Exec::Serial;
  const double t_asm_s = timed([&] { sys = assemble_stiffness(in, data); });
  in.exec = Exec::Parallel;
  const double t_asm_p = timed([&] { sys = assemble_stiffness(in, data); });
  std::printf("%-28s %10.3f %10.3f %8.2f\n", "cut quadrature + assembly", t_asm_s, t_asm_p,
              t_asm_s / t_asm_p);

  std::vector<double> x(static_cast<std::size_t>(sys.A.n), 1.0), y(static_cast<std::size_t>(sys.A.n));
  const int reps = 200;
  const double t_mv_s = timed([&] {
    for (int r = 0; r < reps; ++r) sys.A.multiply(x, y, Exec::Serial);
  });
  const double t_mv_p = timed([&] {
    for (int r = 0; r < reps; ++r) sys.A.multiply(x, y, Exec::Parallel);
  });
  std::printf("%-28s %10.3f %10.3f %8.2f\n", "spmv x200", t_mv_s, t_mv_p, t_mv_s / t_mv_p);

  in.exec = Exec::Serial;
  auto sol = solve_cg(sys.A, sys.b, 1e-10, -1, Precond::Jacobi, Exec::Parallel);
  const double t_err_s = timed([&] { compute_errors(in, sol.x, ms); });
  in.exec = Exec::Parallel;
  const double t_err_p = timed([&] { compute_errors(in, sol.x, ms); });
  std::printf("%-28s %10.3f %10.3f %8.2f\n", "error norms", t_err_s, t_err_p, t_err_s / t_err_p);

  in.exec = Exec::Serial;
  const double t_meas_s = timed([&] { domain_measures(mesh, geom, q, in.subdiv, Exec::Serial); });
  const double t_meas_p = timed([&] { domain_measures(mesh, geom, q, in.subdiv, Exec::Parallel); });
  std::printf("%-28s %10.3f %10.3f %8.2f\n", "domain measures", t_meas_s, t_meas_p,
              t_meas_s / t_meas_p);
  return 0;
}
