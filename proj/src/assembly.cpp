#include "agfem/assembly.hpp"

#include <omp.h>

#include <cassert>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "agfem/shapes.hpp"

namespace agfem {

namespace {

constexpr int kMaxLoc = 125;  // (q+1)^3, q <= 4

struct CellKernel {
  const BackgroundMesh& mesh;
  const LevelSetGeometry& geom;
  int q, subdiv;
  int nloc;

  Vec3 ref_coords(std::int64_t cell, const Vec3& x) const {
    const Vec3 lo = mesh.cell_lo(cell);
    return {(x[0] - lo[0]) / mesh.h[0], (x[1] - lo[1]) / mesh.h[1],
            mesh.dim == 3 ? (x[2] - lo[2]) / mesh.h[2] : 0.0};
  }

  void shapes_at(std::int64_t cell, const Vec3& x, double* N, Vec3* G) const {
    const Vec3 xi = ref_coords(cell, x);
    shape_values(mesh.dim, q, xi, N);
    if (G) {
      shape_grads_ref(mesh.dim, q, xi, G);
      for (int a = 0; a < nloc; ++a) {
        G[a][0] /= mesh.h[0];
        G[a][1] /= mesh.h[1];
        if (mesh.dim == 3) G[a][2] /= mesh.h[2];
      }
    }
  }
};

double tau_for_cell(const AssemblyInput& in, std::int64_t cell) {
  const double h = in.mesh->h_max();
  if (in.params.rule == TauRule::FixedBetaOverH) return in.params.beta / h;
  // local eigenvalue rule: safety factor 2 above the computed constant,
  // floored by beta/h on uncut cells
  const double ck = local_nitsche_constant(*in.mesh, *in.geom, cell, in.q, in.subdiv);
  return std::max(2.0 * ck, in.params.beta / h);
}

// local dof -> rows of (global dof, coefficient); identity for the standard
// flavor, constraint rows for aggregated outer nodes
struct DofRows {
  int count[kMaxLoc];
  std::int32_t idx[kMaxLoc][kMaxLoc];
  double coef[kMaxLoc][kMaxLoc];
};

void build_dof_rows(const AssemblyInput& in, const std::int32_t* dofs, int nloc, DofRows& rows) {
  for (int a = 0; a < nloc; ++a) {
    const std::int32_t act = dofs[a];
    if (in.flavor == SystemFlavor::Standard) {
      rows.count[a] = 1;
      rows.idx[a][0] = act;
      rows.coef[a][0] = 1.0;
      continue;
    }
    const ConstraintSet& cs = *in.constraints;
    const std::int32_t in_id = cs.interior_of_act[std::size_t(act)];
    if (in_id >= 0) {
      rows.count[a] = 1;
      rows.idx[a][0] = in_id;
      rows.coef[a][0] = 1.0;
    } else {
      const std::size_t r = std::size_t(cs.row_of_act[std::size_t(act)]);
      const std::size_t lo = cs.row_ptr[r], hi = cs.row_ptr[r + 1];
      rows.count[a] = int(hi - lo);
      for (std::size_t k = lo; k < hi; ++k) {
        rows.idx[a][k - lo] = cs.cols[k];
        rows.coef[a][k - lo] = cs.vals[k];
      }
    }
  }
}

struct ElementOut {
  std::vector<Triplet> trips;
  std::vector<std::pair<std::int32_t, double>> rhs;
};

void scatter_element(const AssemblyInput& in, const std::int32_t* dofs, int nloc,
                     const DenseMatrix& Ae, const double* be, ElementOut& out) {
  DofRows rows;
  build_dof_rows(in, dofs, nloc, rows);
  for (int a = 0; a < nloc; ++a)
    for (int ra = 0; ra < rows.count[a]; ++ra) {
      if (be) out.rhs.push_back({rows.idx[a][ra], rows.coef[a][ra] * be[a]});
      for (int b = 0; b < nloc; ++b) {
        const double va = Ae(std::size_t(a), std::size_t(b));
        if (va == 0.0) continue;
        for (int rb = 0; rb < rows.count[b]; ++rb)
          out.trips.push_back(
              {rows.idx[a][ra], rows.idx[b][rb], rows.coef[a][ra] * rows.coef[b][rb] * va});
      }
    }
}

void element_stiffness(const AssemblyInput& in, const PoissonData* data, std::int64_t cell,
                       const CellKernel& ker, DenseMatrix& Ae, double* be) {
  const int nloc = ker.nloc;
  Ae = DenseMatrix(std::size_t(nloc), std::size_t(nloc));
  if (be) std::fill(be, be + nloc, 0.0);
  double N[kMaxLoc];
  Vec3 G[kMaxLoc];

  const auto rule = cell_rule(*in.mesh, *in.geom, cell, in.q, in.subdiv);
  for (const auto& p : rule.bulk) {
    ker.shapes_at(cell, p.x, N, G);
    for (int a = 0; a < nloc; ++a) {
      for (int b = 0; b <= a; ++b) {
        const double v = p.w * dot(G[a], G[b]);
        Ae(std::size_t(a), std::size_t(b)) += v;
        if (b != a) Ae(std::size_t(b), std::size_t(a)) += v;
      }
      if (be && data->f) be[a] += p.w * data->f(p.x) * N[a];
    }
  }

  auto nitsche_surface = [&](const SurfPoint& p, double tau) {
    const bool neumann = data && data->is_neumann && data->is_neumann(p.x);
    ker.shapes_at(cell, p.x, N, G);
    if (neumann) {
      if (be && data->g_neumann) {
        const double gn = data->g_neumann(p.x);
        for (int a = 0; a < nloc; ++a) be[a] += p.w * gn * N[a];
      }
      return;
    }
    double dn[kMaxLoc];
    for (int a = 0; a < nloc; ++a) dn[a] = dot(p.n, G[a]);
    for (int a = 0; a < nloc; ++a)
      for (int b = 0; b <= a; ++b) {
        const double v = p.w * (tau * N[a] * N[b] - N[a] * dn[b] - N[b] * dn[a]);
        Ae(std::size_t(a), std::size_t(b)) += v;
        if (b != a) Ae(std::size_t(b), std::size_t(a)) += v;
      }
    if (be && data->g_dirichlet) {
      const double g = data->g_dirichlet(p.x);
      for (int a = 0; a < nloc; ++a) be[a] += p.w * g * (tau * N[a] - dn[a]);
    }
  };

  if (!rule.surface.empty()) {
    const double tau = tau_for_cell(in, cell);
    for (const auto& p : rule.surface) nitsche_surface(p, tau);
  }

  if (in.nitsche_on_box) {
    const auto ijk = in.mesh->cell_coords(cell);
    const double tau = in.params.beta / in.mesh->h_max();
    for (int axis = 0; axis < in.mesh->dim; ++axis)
      for (int side = 0; side <= 1; ++side) {
        const int pos = ijk[std::size_t(axis)] + side;
        if (pos != 0 && pos != in.mesh->n[std::size_t(axis)]) continue;
        const auto srule = box_facet_rule(*in.mesh, *in.geom, cell, axis, side, in.q);
        for (const auto& p : srule) nitsche_surface(p, tau);
      }
  }

  bool finite = true;
  for (std::size_t k = 0; k < Ae.a.size(); ++k) finite = finite && std::isfinite(Ae.a[k]);
  if (be)
    for (int a = 0; a < nloc; ++a) finite = finite && std::isfinite(be[a]);
  if (!finite)
    throw std::runtime_error("assemble: non-finite element entry in cell " +
                             std::to_string(cell));
}

void element_mass(const AssemblyInput& in, std::int64_t cell, const CellKernel& ker,
                  DenseMatrix& Ae) {
  const int nloc = ker.nloc;
  Ae = DenseMatrix(std::size_t(nloc), std::size_t(nloc));
  double N[kMaxLoc];
  const auto rule = cell_rule(*in.mesh, *in.geom, cell, in.q, in.subdiv);
  for (const auto& p : rule.bulk) {
    ker.shapes_at(cell, p.x, N, nullptr);
    for (int a = 0; a < nloc; ++a)
      for (int b = 0; b <= a; ++b) {
        const double v = p.w * N[a] * N[b];
        Ae(std::size_t(a), std::size_t(b)) += v;
        if (b != a) Ae(std::size_t(b), std::size_t(a)) += v;
      }
  }
  for (std::size_t k = 0; k < Ae.a.size(); ++k)
    if (!std::isfinite(Ae.a[k]))
      throw std::runtime_error("assemble: non-finite element entry in cell " +
                               std::to_string(cell));
}

template <class ElementFn>
SparseSystem assemble_any(const AssemblyInput& in, const ElementFn& element, bool with_rhs) {
  assert(in.mesh && in.geom && in.active);
  if (in.flavor == SystemFlavor::Aggregated && !in.constraints)
    throw InputError("assemble: aggregated flavor requires constraints");
  const FESpace& act = *in.active;
  const std::int64_t ndof = in.flavor == SystemFlavor::Aggregated
                                ? in.constraints->interior->num_nodes
                                : act.num_nodes;
  const int nloc = nodes_per_cell(in.mesh->dim, in.q);
  CellKernel ker{*in.mesh, *in.geom, in.q, in.subdiv, nloc};

  std::vector<std::int64_t> cells;
  for (std::int64_t c = 0; c < in.mesh->num_cells(); ++c)
    if (in.mesh->is_active(c)) cells.push_back(c);

  SparseSystem sys;
  sys.flavor = in.flavor;
  sys.tau_rule = in.params;
  sys.b.assign(std::size_t(ndof), 0.0);

  std::vector<Triplet> trips;
  if (in.exec == Exec::Parallel) {
    const int nt = omp_get_max_threads();
    std::vector<ElementOut> outs(static_cast<std::size_t>(nt));
    std::string error;
#pragma omp parallel
    {
      const int tid = omp_get_thread_num();
      DenseMatrix Ae;
      std::vector<double> be(static_cast<std::size_t>(nloc));
      std::vector<std::int32_t> dofs(static_cast<std::size_t>(nloc));
      // static round-robin keeps each thread's triplet stream deterministic,
      // so the merged matrix is reproducible for a fixed thread count
#pragma omp for schedule(static, 4)
      for (std::int64_t ci = 0; ci < std::int64_t(cells.size()); ++ci) {
        const std::int64_t c = cells[std::size_t(ci)];
        try {
          element(c, ker, Ae, with_rhs ? be.data() : nullptr);
          act.cell_dofs(c, dofs.data());
          scatter_element(in, dofs.data(), nloc, Ae, with_rhs ? be.data() : nullptr,
                          outs[std::size_t(tid)]);
        } catch (const std::exception& e) {
#pragma omp critical
          if (error.empty()) error = e.what();
        }
      }
    }
    if (!error.empty()) throw std::runtime_error(error);
    std::size_t total = 0;
    for (const auto& o : outs) total += o.trips.size();
    trips.reserve(total);
    for (auto& o : outs) {
      trips.insert(trips.end(), o.trips.begin(), o.trips.end());
      for (const auto& [i, v] : o.rhs) sys.b[std::size_t(i)] += v;
    }
  } else {
    ElementOut out;
    DenseMatrix Ae;
    std::vector<double> be(static_cast<std::size_t>(nloc));
    std::vector<std::int32_t> dofs(static_cast<std::size_t>(nloc));
    for (const auto c : cells) {
      element(c, ker, Ae, with_rhs ? be.data() : nullptr);
      act.cell_dofs(c, dofs.data());
      scatter_element(in, dofs.data(), nloc, Ae, with_rhs ? be.data() : nullptr, out);
    }
    trips = std::move(out.trips);
    for (const auto& [i, v] : out.rhs) sys.b[std::size_t(i)] += v;
  }

  sys.A = csr_from_triplets(ndof, trips);
  return sys;
}

}  // namespace

SparseSystem assemble_stiffness(const AssemblyInput& in, const PoissonData& data) {
  return assemble_any(
      in,
      [&](std::int64_t c, const CellKernel& ker, DenseMatrix& Ae, double* be) {
        element_stiffness(in, &data, c, ker, Ae, be);
      },
      true);
}

CsrMatrix assemble_mass(const AssemblyInput& in) {
  auto sys = assemble_any(
      in,
      [&](std::int64_t c, const CellKernel& ker, DenseMatrix& Ae, double*) {
        element_mass(in, c, ker, Ae);
      },
      false);
  return std::move(sys.A);
}

double local_nitsche_constant(const BackgroundMesh& mesh, const LevelSetGeometry& geom,
                              std::int64_t cell, int q, int subdiv) {
  if (mesh.klass(cell) != CellClass::Cut) return 0.0;
  const int nloc = nodes_per_cell(mesh.dim, q);
  const auto nl = static_cast<std::size_t>(nloc);
  DenseMatrix B(nl, nl), D(nl, nl);
  double N[kMaxLoc];
  Vec3 G[kMaxLoc];
  CellKernel ker{mesh, geom, q, subdiv, nloc};

  const auto rule = cut_rule(mesh, geom, cell, q, subdiv);
  for (const auto& p : rule.bulk) {
    ker.shapes_at(cell, p.x, N, G);
    for (int a = 0; a < nloc; ++a)
      for (int b = 0; b < nloc; ++b) D(std::size_t(a), std::size_t(b)) += p.w * dot(G[a], G[b]);
  }
  for (const auto& p : rule.surface) {
    ker.shapes_at(cell, p.x, N, G);
    for (int a = 0; a < nloc; ++a)
      for (int b = 0; b < nloc; ++b)
        B(std::size_t(a), std::size_t(b)) += p.w * dot(p.n, G[a]) * dot(p.n, G[b]);
  }

  double tr = 0.0;
  for (int a = 0; a < nloc; ++a) tr += D(std::size_t(a), std::size_t(a));
  if (!(tr > 1e-300)) {
    std::fprintf(stderr, "[agfem] local_nitsche_constant: sliver cell %lld has vanishing D_K\n",
                 static_cast<long long>(cell));
    return std::numeric_limits<double>::infinity();
  }
  // ridge absorbs the constant-mode kernel of D_K
  const double ridge = 1e-12 * tr / nloc;
  for (int a = 0; a < nloc; ++a) D(std::size_t(a), std::size_t(a)) += ridge;
  return generalized_eig_max(B, D);
}

}  // namespace agfem
