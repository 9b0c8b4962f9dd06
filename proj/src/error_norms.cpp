#include "agfem/error_norms.hpp"

#include <omp.h>

#include <cassert>
#include <cmath>

#include "agfem/shapes.hpp"

namespace agfem {

ErrorReport compute_errors(const AssemblyInput& in, std::span<const double> coeffs,
                           const ManufacturedSolution& exact) {
  assert(in.mesh && in.geom && in.active);
  const FESpace& act = *in.active;
  const int dim = in.mesh->dim;
  const int q = in.q;
  const int nloc = nodes_per_cell(dim, q);

  ErrorReport rep;
  rep.h = in.mesh->h_max();
  rep.q = q;

  std::vector<double> u_act;
  if (in.flavor == SystemFlavor::Aggregated) {
    if (!in.constraints) throw InputError("compute_errors: aggregated flavor needs constraints");
    if (std::int64_t(coeffs.size()) != in.constraints->interior->num_nodes)
      throw InputError("compute_errors: coefficient size mismatch");
    rep.dofs = in.constraints->interior->num_nodes;
    u_act = extend(*in.constraints, coeffs);
  } else {
    if (std::int64_t(coeffs.size()) != act.num_nodes)
      throw InputError("compute_errors: coefficient size mismatch");
    rep.dofs = act.num_nodes;
    u_act.assign(coeffs.begin(), coeffs.end());
  }

  std::vector<std::int64_t> cells;
  for (std::int64_t c = 0; c < in.mesh->num_cells(); ++c)
    if (in.mesh->is_active(c)) cells.push_back(c);

  const auto cell_contrib = [&](std::int64_t c, double& e2, double& l2) {
    double N[125];
    Vec3 G[125];
    std::int32_t dofs[125];
    act.cell_dofs(c, dofs);
    const Vec3 lo = in.mesh->cell_lo(c);
    const auto rule = cell_rule(*in.mesh, *in.geom, c, q, in.subdiv, /*bump=*/1);
    for (const auto& p : rule.bulk) {
      const Vec3 xi{(p.x[0] - lo[0]) / in.mesh->h[0], (p.x[1] - lo[1]) / in.mesh->h[1],
                    dim == 3 ? (p.x[2] - lo[2]) / in.mesh->h[2] : 0.0};
      shape_values(dim, q, xi, N);
      shape_grads_ref(dim, q, xi, G);
      double uh = 0.0;
      Vec3 gh{0.0, 0.0, 0.0};
      for (int a = 0; a < nloc; ++a) {
        const double ca = u_act[std::size_t(dofs[a])];
        uh += ca * N[a];
        gh[0] += ca * G[a][0] / in.mesh->h[0];
        gh[1] += ca * G[a][1] / in.mesh->h[1];
        if (dim == 3) gh[2] += ca * G[a][2] / in.mesh->h[2];
      }
      const double du = exact.u(p.x) - uh;
      const Vec3 dg = exact.grad_u(p.x) - gh;
      l2 += p.w * du * du;
      e2 += p.w * dot(dg, dg);
    }
  };

  double e2 = 0.0, l2 = 0.0;
  if (in.exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic, 16) reduction(+ : e2, l2)
    for (std::int64_t i = 0; i < std::int64_t(cells.size()); ++i)
      cell_contrib(cells[std::size_t(i)], e2, l2);
  } else {
    for (const auto c : cells) cell_contrib(c, e2, l2);
  }
  rep.energy_error = std::sqrt(e2);
  rep.l2_error = std::sqrt(l2);
  return rep;
}

}  // namespace agfem
