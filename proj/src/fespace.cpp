#include "agfem/fespace.hpp"

#include <cassert>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "agfem/linalg.hpp"
#include "agfem/shapes.hpp"

namespace agfem {

void FESpace::cell_dofs(std::int64_t cell, std::int32_t* out) const {
  const auto ijk = mesh->cell_coords(cell);
  int m = 0;
  const int kmax = dim == 3 ? q : 0;
  for (int k = 0; k <= kmax; ++k)
    for (int j = 0; j <= q; ++j)
      for (int i = 0; i <= q; ++i) {
        const std::int64_t lid = lattice_id(q * ijk[0] + i, q * ijk[1] + j, q * ijk[2] + k);
        out[m++] = node_of_lattice[std::size_t(lid)];
      }
}

FESpace build_space(const BackgroundMesh& mesh, int q, SpaceFlavor flavor) {
  if (q < 1 || q > 4) throw InputError("build_space: order q must be in 1..4");
  assert(mesh.classified);
  FESpace s;
  s.dim = mesh.dim;
  s.q = q;
  s.flavor = flavor;
  s.mesh = &mesh;
  s.ldims = {q * mesh.n[0] + 1, q * mesh.n[1] + 1, mesh.dim == 3 ? q * mesh.n[2] + 1 : 1};
  const std::int64_t nl = std::int64_t(s.ldims[0]) * s.ldims[1] * s.ldims[2];
  s.node_of_lattice.assign(std::size_t(nl), -1);

  bool any_cell = false;
  for (std::int64_t c = 0; c < mesh.num_cells(); ++c) {
    if (!s.covers(mesh.klass(c))) continue;
    any_cell = true;
    const auto ijk = mesh.cell_coords(c);
    const int kmax = mesh.dim == 3 ? q : 0;
    for (int k = 0; k <= kmax; ++k)
      for (int j = 0; j <= q; ++j)
        for (int i = 0; i <= q; ++i)
          s.node_of_lattice[std::size_t(
              s.lattice_id(q * ijk[0] + i, q * ijk[1] + j, q * ijk[2] + k))] = 0;
  }
  if (!any_cell && flavor == SpaceFlavor::Interior)
    throw std::runtime_error("no interior cells; refine mesh");

  std::int64_t nn = 0;
  for (std::int64_t l = 0; l < nl; ++l) {
    if (s.node_of_lattice[std::size_t(l)] == 0) {
      s.node_of_lattice[std::size_t(l)] = std::int32_t(nn++);
      s.lattice_of_node.push_back(l);
    }
  }
  s.num_nodes = nn;
  return s;
}

std::vector<std::int64_t> node_to_root(const AggregateMap& map, const BackgroundMesh& mesh,
                                       const FESpace& act, const FESpace& interior) {
  std::vector<std::int64_t> out(std::size_t(act.num_nodes), -1);
  const int q = act.q;
  for (std::int64_t n = 0; n < act.num_nodes; ++n) {
    const std::int64_t lid = act.lattice_of_node[std::size_t(n)];
    if (interior.node_of_lattice[std::size_t(lid)] >= 0) continue;  // interior node

    const auto lc = act.lattice_coords(lid);
    VEFIndex vef;
    for (int a = 0; a < mesh.dim; ++a) {
      if (lc[std::size_t(a)] % q == 0) {
        vef.coord[std::size_t(a)] = lc[std::size_t(a)] / q;  // grid plane
      } else {
        vef.spans[std::size_t(a)] = true;
        vef.coord[std::size_t(a)] = lc[std::size_t(a)] / q;  // interior of this cell slab
        ++vef.dim;
      }
    }
    std::int64_t owner = -1;
    std::size_t owner_sz = std::numeric_limits<std::size_t>::max();
    std::int64_t owner_root = -1;
    for (const auto c : vef.incident_cells(mesh)) {
      if (!mesh.is_active(c)) continue;
      assert(mesh.klass(c) == CellClass::Cut);  // outer nodes touch no interior cell
      const std::int64_t r = map.root(c);
      if (r < 0) continue;  // discarded cell
      const std::size_t sz = map.aggregate_size(r);
      if (sz < owner_sz || (sz == owner_sz && r < owner_root)) {
        owner = c;
        owner_sz = sz;
        owner_root = r;
      }
    }
    if (owner < 0)
      throw std::runtime_error("node_to_root: outer node with no aggregated incident cell");
    out[std::size_t(n)] = owner_root;
  }
  return out;
}

ConstraintSet build_constraints(const FESpace& act, const FESpace& interior,
                                const std::vector<std::int64_t>& node_root) {
  ConstraintSet cs;
  cs.act = &act;
  cs.interior = &interior;
  cs.interior_of_act.assign(std::size_t(act.num_nodes), -1);
  cs.row_of_act.assign(std::size_t(act.num_nodes), -1);
  const int q = act.q;
  const int dim = act.dim;
  const int nloc = nodes_per_cell(dim, q);
  const BackgroundMesh& mesh = *act.mesh;

  cs.row_ptr.push_back(0);
  std::vector<std::int32_t> root_dofs(static_cast<std::size_t>(nloc));
  double N[125];
  for (std::int64_t n = 0; n < act.num_nodes; ++n) {
    const std::int64_t lid = act.lattice_of_node[std::size_t(n)];
    const std::int32_t in_id = interior.node_of_lattice[std::size_t(lid)];
    if (in_id >= 0) {
      cs.interior_of_act[std::size_t(n)] = in_id;
      continue;
    }
    const std::int64_t root = node_root[std::size_t(n)];
    if (root < 0 || mesh.klass(root) != CellClass::Interior)
      throw std::runtime_error("build_constraints: outer node without interior root cell");

    // reference coordinates of the node w.r.t. the root cell, exact lattice
    // arithmetic (values may lie outside [0,1]: polynomial extrapolation)
    const auto lc = act.lattice_coords(lid);
    const auto cc = mesh.cell_coords(root);
    const Vec3 xi{double(lc[0] - q * cc[0]) / q, double(lc[1] - q * cc[1]) / q,
                  dim == 3 ? double(lc[2] - q * cc[2]) / q : 0.0};
    shape_values(dim, q, xi, N);
    interior.cell_dofs(root, root_dofs.data());

    cs.row_of_act[std::size_t(n)] = std::int32_t(cs.outer_nodes.size());
    cs.outer_nodes.push_back(n);
    cs.row_root.push_back(root);
    for (int a = 0; a < nloc; ++a) {
      assert(root_dofs[std::size_t(a)] >= 0);
      cs.cols.push_back(root_dofs[std::size_t(a)]);
      cs.vals.push_back(N[a]);
    }
    cs.row_ptr.push_back(cs.cols.size());
  }
  return cs;
}

std::vector<double> extend(const ConstraintSet& c, std::span<const double> u_in) {
  if (std::int64_t(u_in.size()) != c.interior->num_nodes)
    throw InputError("extend: interior coefficient size mismatch");
  std::vector<double> u_act(std::size_t(c.act->num_nodes), 0.0);
  for (std::int64_t n = 0; n < c.act->num_nodes; ++n) {
    const std::int32_t in_id = c.interior_of_act[std::size_t(n)];
    if (in_id >= 0) {
      u_act[std::size_t(n)] = u_in[std::size_t(in_id)];
    } else {
      const std::size_t r = std::size_t(c.row_of_act[std::size_t(n)]);
      double s = 0.0;
      for (std::size_t k = c.row_ptr[r]; k < c.row_ptr[r + 1]; ++k)
        s += c.vals[k] * u_in[std::size_t(c.cols[k])];
      u_act[std::size_t(n)] = s;
    }
  }
  return u_act;
}

ExtensionNormBound extension_norm_bound(const ConstraintSet& c) {
  ExtensionNormBound out;
  const int dim = c.act->dim;
  const int nloc = nodes_per_cell(dim, c.act->q);

  // group rows by root cell; each block has nloc columns (the root's dofs)
  std::vector<std::pair<std::int64_t, std::size_t>> rows;  // (root, row)
  for (std::size_t r = 0; r < c.num_rows(); ++r) rows.push_back({c.row_root[r], r});
  std::sort(rows.begin(), rows.end());

  std::size_t i = 0;
  while (i < rows.size()) {
    std::size_t j = i;
    while (j < rows.size() && rows[j].first == rows[i].first) ++j;
    const std::size_t m = j - i;  // rows in this block
    DenseMatrix B(m, std::size_t(nloc));
    for (std::size_t r = 0; r < m; ++r) {
      const std::size_t row = rows[i + r].second;
      for (std::size_t k = c.row_ptr[row]; k < c.row_ptr[row + 1]; ++k)
        B(r, k - c.row_ptr[row]) = c.vals[k];
    }
    out.max_cell_norm_sq = std::max(out.max_cell_norm_sq, spectral_norm_sq(B, 1e-8));
    i = j;
  }
  const double n_cell = std::pow(2.0, dim);  // structured-grid VEF incidence
  out.bound = 1.0 + n_cell * out.max_cell_norm_sq;
  if (c.num_rows() == 0) out.bound = 1.0;
  return out;
}

std::vector<double> interpolate(const FESpace& space,
                                const std::function<double(const Vec3&)>& f) {
  std::vector<double> u(static_cast<std::size_t>(space.num_nodes));
  for (std::int64_t n = 0; n < space.num_nodes; ++n) u[std::size_t(n)] = f(space.node_coords(n));
  return u;
}

std::vector<double> interpolate(const ConstraintSet& c,
                                const std::function<double(const Vec3&)>& f) {
  return interpolate(*c.interior, f);
}

}  // namespace agfem
