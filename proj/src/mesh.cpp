#include "agfem/mesh.hpp"

#include <cassert>
#include <cmath>

#include "agfem/quadrature.hpp"

namespace agfem {

void BackgroundMesh::cell_vertices(std::int64_t c, std::int64_t out[8]) const {
  const auto ijk = cell_coords(c);
  int m = 0;
  const int kmax = dim == 3 ? 1 : 0;
  for (int k = 0; k <= kmax; ++k)
    for (int j = 0; j <= 1; ++j)
      for (int i = 0; i <= 1; ++i) out[m++] = vertex_id(ijk[0] + i, ijk[1] + j, ijk[2] + k);
}

BackgroundMesh build_mesh(const Box& box, const std::array<int, 3>& cells_per_axis, int dim) {
  if (dim != 2 && dim != 3) throw InputError("build_mesh: dim must be 2 or 3");
  BackgroundMesh m;
  m.dim = dim;
  for (int a = 0; a < dim; ++a) {
    if (cells_per_axis[std::size_t(a)] < 1) throw InputError("build_mesh: cells_per_axis must be >= 1");
    m.n[std::size_t(a)] = cells_per_axis[std::size_t(a)];
    m.h[std::size_t(a)] = (box.hi[std::size_t(a)] - box.lo[std::size_t(a)]) / m.n[std::size_t(a)];
    if (!(m.h[std::size_t(a)] > 0.0)) throw InputError("build_mesh: empty box extent");
    m.origin[std::size_t(a)] = box.lo[std::size_t(a)];
  }
  if (dim == 2) {
    m.n[2] = 1;
    m.h[2] = 0.0;
    m.origin[2] = 0.0;
  }
  return m;
}

namespace {

// edge id: axis * num_vertices + id of the lower endpoint
inline std::int64_t edge_id(const BackgroundMesh& m, int axis, std::int64_t lower_vertex) {
  return std::int64_t(axis) * m.num_vertices() + lower_vertex;
}

}  // namespace

void classify_cells(BackgroundMesh& mesh, const LevelSetGeometry& geom) {
  const auto vd = mesh.vdims();
  mesh.corner_psi.assign(std::size_t(mesh.num_vertices()), 0.0);
  for (int k = 0; k < vd[2]; ++k)
    for (int j = 0; j < vd[1]; ++j)
      for (int i = 0; i < vd[0]; ++i)
        mesh.corner_psi[std::size_t(mesh.vertex_id(i, j, k))] =
            geom.psi(mesh.vertex_coords(i, j, k));

  // Snapping pass: an edge cut within eps of a vertex collapses onto it; the
  // vertex becomes a boundary point (sample zeroed, counts as inside).
  // Decisions are taken on the original samples so the result is independent
  // of the edge visiting order.
  mesh.edge_cut.assign(std::size_t(mesh.dim) * std::size_t(mesh.num_vertices()), 0);
  std::vector<std::int64_t> to_zero;
  const int kdim = mesh.dim == 3 ? vd[2] : 1;
  for (int axis = 0; axis < mesh.dim; ++axis) {
    for (int k = 0; k < kdim; ++k)
      for (int j = 0; j < vd[1]; ++j)
        for (int i = 0; i < vd[0]; ++i) {
          int ii = i, jj = j, kk = k;
          if (axis == 0) ++ii;
          else if (axis == 1) ++jj;
          else ++kk;
          if (ii >= vd[0] || jj >= vd[1] || kk >= std::max(vd[2], 1)) continue;
          const std::int64_t va = mesh.vertex_id(i, j, k);
          const std::int64_t vb = mesh.vertex_id(ii, jj, kk);
          const double pa = mesh.corner_psi[std::size_t(va)];
          const double pb = mesh.corner_psi[std::size_t(vb)];
          if (pa == 0.0 || pb == 0.0 || (pa < 0.0) == (pb < 0.0)) continue;
          const auto t = edge_intersection(geom, mesh.vertex_coords(i, j, k),
                                           mesh.vertex_coords(ii, jj, kk));
          if (!t) continue;
          if (*t == 0.0) to_zero.push_back(va);
          else if (*t == 1.0) to_zero.push_back(vb);
          else mesh.edge_cut[std::size_t(edge_id(mesh, axis, va))] = 1;
        }
  }
  for (const auto v : to_zero) mesh.corner_psi[std::size_t(v)] = 0.0;

  // A snapped vertex may have killed the sign change of an already-flagged
  // edge; refresh the flags from the final samples.
  for (int axis = 0; axis < mesh.dim; ++axis) {
    for (int k = 0; k < kdim; ++k)
      for (int j = 0; j < vd[1]; ++j)
        for (int i = 0; i < vd[0]; ++i) {
          int ii = i, jj = j, kk = k;
          if (axis == 0) ++ii;
          else if (axis == 1) ++jj;
          else ++kk;
          if (ii >= vd[0] || jj >= vd[1] || kk >= std::max(vd[2], 1)) continue;
          const std::int64_t va = mesh.vertex_id(i, j, k);
          const std::int64_t vb = mesh.vertex_id(ii, jj, kk);
          auto& flag = mesh.edge_cut[std::size_t(edge_id(mesh, axis, va))];
          if (flag && !(mesh.corner_psi[std::size_t(va)] * mesh.corner_psi[std::size_t(vb)] < 0.0))
            flag = 0;
        }
  }

  mesh.cell_class.assign(std::size_t(mesh.num_cells()), CellClass::Exterior);
  std::int64_t verts[8];
  const int nv = 1 << mesh.dim;
  for (std::int64_t c = 0; c < mesh.num_cells(); ++c) {
    mesh.cell_vertices(c, verts);
    bool strict_in = false, strict_out = false;
    for (int v = 0; v < nv; ++v) {
      const double p = mesh.corner_psi[std::size_t(verts[v])];
      if (p < 0.0) strict_in = true;
      if (p > 0.0) strict_out = true;
    }
    bool cut_edge = false;
    const auto ijk = mesh.cell_coords(c);
    const int kmax = mesh.dim == 3 ? 1 : 0;
    for (int axis = 0; axis < mesh.dim && !cut_edge; ++axis)
      for (int dk = 0; dk <= kmax && !cut_edge; ++dk)
        for (int dj = 0; dj <= 1 && !cut_edge; ++dj)
          for (int di = 0; di <= 1 && !cut_edge; ++di) {
            if ((axis == 0 && di) || (axis == 1 && dj) || (axis == 2 && dk)) continue;
            const std::int64_t lower = mesh.vertex_id(ijk[0] + di, ijk[1] + dj, ijk[2] + dk);
            if (mesh.edge_cut[std::size_t(edge_id(mesh, axis, lower))]) cut_edge = true;
          }

    // boundary-touching vertices (psi == 0) count as inside, but a cell with
    // no strictly-inside corner encloses no volume and stays Exterior
    CellClass cl;
    if (!strict_out && !cut_edge) cl = CellClass::Interior;
    else if (!strict_in && !cut_edge) cl = CellClass::Exterior;
    else cl = CellClass::Cut;
    mesh.cell_class[std::size_t(c)] = cl;
  }
  mesh.classified = true;
}

std::vector<std::pair<std::int64_t, FacetRef>> facet_neighbors(const BackgroundMesh& mesh,
                                                               std::int64_t cell) {
  std::vector<std::pair<std::int64_t, FacetRef>> out;
  const auto ijk = mesh.cell_coords(cell);
  for (int axis = 0; axis < mesh.dim; ++axis) {
    for (int side = 0; side <= 1; ++side) {
      auto nb = ijk;
      nb[std::size_t(axis)] += side == 0 ? -1 : 1;
      if (nb[std::size_t(axis)] < 0 || nb[std::size_t(axis)] >= mesh.n[std::size_t(axis)]) continue;
      out.push_back({mesh.cell_id(nb[0], nb[1], nb[2]), FacetRef{cell, axis, side}});
    }
  }
  return out;
}

bool facet_cut_by_domain(const BackgroundMesh& mesh, const FacetRef& facet) {
  assert(mesh.classified);
  const auto ijk = mesh.cell_coords(facet.cell);
  // facet vertex block: the cell's vertex lattice restricted to one plane
  std::array<int, 3> lo = {ijk[0], ijk[1], ijk[2]};
  std::array<int, 3> hi = {ijk[0] + 1, ijk[1] + 1, mesh.dim == 3 ? ijk[2] + 1 : 0};
  if (mesh.dim == 2) hi[2] = lo[2] = 0;
  lo[std::size_t(facet.axis)] = hi[std::size_t(facet.axis)] = ijk[std::size_t(facet.axis)] + facet.side;

  // any corner strictly inside?
  for (int k = lo[2]; k <= hi[2]; ++k)
    for (int j = lo[1]; j <= hi[1]; ++j)
      for (int i = lo[0]; i <= hi[0]; ++i)
        if (mesh.corner_psi[std::size_t(mesh.vertex_id(i, j, k))] < 0.0) return true;

  // any facet edge with a strict (non-snapped) cut?
  for (int axis = 0; axis < mesh.dim; ++axis) {
    if (axis == facet.axis) continue;
    for (int k = lo[2]; k <= hi[2]; ++k)
      for (int j = lo[1]; j <= hi[1]; ++j)
        for (int i = lo[0]; i <= hi[0]; ++i) {
          std::array<int, 3> p = {i, j, k};
          if (p[std::size_t(axis)] == hi[std::size_t(axis)] && axis != facet.axis) continue;
          const std::int64_t lower = mesh.vertex_id(p[0], p[1], p[2]);
          if (mesh.edge_cut[std::size_t(std::int64_t(axis) * mesh.num_vertices() + lower)])
            return true;
        }
  }
  return false;
}

double eta(const BackgroundMesh& mesh, const LevelSetGeometry& geom, std::int64_t cell, int q,
           int subdiv) {
  if (mesh.klass(cell) == CellClass::Interior) return 1.0;
  if (mesh.klass(cell) == CellClass::Exterior) return 0.0;
  const auto rule = cut_rule(mesh, geom, cell, q, subdiv);
  double vol = 0.0;
  for (const auto& p : rule.bulk) vol += p.w;
  return vol / mesh.cell_volume();
}

std::vector<std::int64_t> VEFIndex::incident_cells(const BackgroundMesh& mesh) const {
  std::array<std::pair<int, int>, 3> range;
  for (int a = 0; a < 3; ++a) {
    if (a >= mesh.dim) { range[std::size_t(a)] = {0, 0}; continue; }
    if (spans[std::size_t(a)]) {
      range[std::size_t(a)] = {coord[std::size_t(a)], coord[std::size_t(a)]};
    } else {
      const int p = coord[std::size_t(a)];
      range[std::size_t(a)] = {std::max(p - 1, 0), std::min(p, mesh.n[std::size_t(a)] - 1)};
    }
  }
  std::vector<std::int64_t> cells;
  for (int k = range[2].first; k <= range[2].second; ++k)
    for (int j = range[1].first; j <= range[1].second; ++j)
      for (int i = range[0].first; i <= range[0].second; ++i)
        cells.push_back(mesh.cell_id(i, j, k));
  return cells;
}

}  // namespace agfem
