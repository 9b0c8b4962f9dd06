#pragma once

#include <functional>
#include <span>
#include <vector>

#include "agfem/aggregation.hpp"
#include "agfem/mesh.hpp"

namespace agfem {

enum class SpaceFlavor { Active, Interior };

/// C0 Lagrangian Q_q space over the cells of the chosen flavor. Nodes live on
/// the q-refined vertex lattice of the background grid and are numbered
/// compactly in lattice order.
struct FESpace {
  int dim = 2, q = 1;
  SpaceFlavor flavor = SpaceFlavor::Active;
  const BackgroundMesh* mesh = nullptr;
  std::array<int, 3> ldims{1, 1, 1};            // lattice points per axis
  std::vector<std::int32_t> node_of_lattice;    // -1 where absent
  std::vector<std::int64_t> lattice_of_node;
  std::int64_t num_nodes = 0;

  std::int64_t lattice_id(int i, int j, int k = 0) const {
    return (std::int64_t(k) * ldims[1] + j) * ldims[0] + i;
  }
  std::array<int, 3> lattice_coords(std::int64_t lid) const {
    return {int(lid % ldims[0]), int((lid / ldims[0]) % ldims[1]),
            int(lid / (std::int64_t(ldims[0]) * ldims[1]))};
  }
  Vec3 node_coords(std::int64_t node) const {
    const auto lc = lattice_coords(lattice_of_node[std::size_t(node)]);
    return {mesh->origin[0] + lc[0] * mesh->h[0] / q, mesh->origin[1] + lc[1] * mesh->h[1] / q,
            dim == 3 ? mesh->origin[2] + lc[2] * mesh->h[2] / q : 0.0};
  }
  bool covers(CellClass c) const {
    return flavor == SpaceFlavor::Active ? c != CellClass::Exterior : c == CellClass::Interior;
  }
  /// Global node ids of a cell's (q+1)^dim local nodes, lexicographic order.
  void cell_dofs(std::int64_t cell, std::int32_t* out) const;
};

/// Builds the space; throws "no interior cells; refine mesh" when the interior
/// flavor has nothing to stand on.
FESpace build_space(const BackgroundMesh& mesh, int q, SpaceFlavor flavor);

/// K(b): root interior cell per outer node of the active space (-1 for
/// interior nodes). The owner VEF is the lowest-dimensional grid entity
/// containing the node; the owner cell among its active incident cells is the
/// one in the smallest aggregate (ties: smaller root id).
std::vector<std::int64_t> node_to_root(const AggregateMap& map, const BackgroundMesh& mesh,
                                       const FESpace& act, const FESpace& interior);

/// Sparse constraint rows u_out[b] = sum_a C_ba u_in[a], one row per outer
/// node, referencing only the nodes of the root cell K(b).
struct ConstraintSet {
  const FESpace* act = nullptr;
  const FESpace* interior = nullptr;
  std::vector<std::int32_t> interior_of_act;  // act node -> interior node, -1 if outer
  std::vector<std::int64_t> outer_nodes;      // act node ids, ascending
  std::vector<std::int64_t> row_root;         // root cell per row
  std::vector<std::size_t> row_ptr;
  std::vector<std::int32_t> cols;             // interior node ids
  std::vector<double> vals;
  std::vector<std::int32_t> row_of_act;       // act node -> row, -1 if interior

  std::size_t num_rows() const { return outer_nodes.size(); }
  double row_sum(std::size_t r) const {
    double s = 0.0;
    for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) s += vals[k];
    return s;
  }
};

ConstraintSet build_constraints(const FESpace& act, const FESpace& interior,
                                const std::vector<std::int64_t>& node_root);

/// E u_in = [u_in, C u_in] in the active numbering.
std::vector<double> extend(const ConstraintSet& c, std::span<const double> u_in);

struct ExtensionNormBound {
  double bound = 1.0;          // 1 + n_cell * max_K ||C_K||_2^2
  double max_cell_norm_sq = 0.0;
};

/// Computable upper bound for ||E||_2^2 from the per-root constraint blocks
/// (spectral norms by power iteration to 1e-8).
ExtensionNormBound extension_norm_bound(const ConstraintSet& c);

/// Nodal interpolation: samples the field at the node points of the space.
std::vector<double> interpolate(const FESpace& space, const std::function<double(const Vec3&)>& f);

/// Aggregated-space interpolation: samples interior nodes only; the result is
/// an interior coefficient vector (extend() recovers the active values).
std::vector<double> interpolate(const ConstraintSet& c, const std::function<double(const Vec3&)>& f);

}  // namespace agfem
