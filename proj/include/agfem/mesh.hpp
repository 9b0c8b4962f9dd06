#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "agfem/core.hpp"
#include "agfem/geometry.hpp"

namespace agfem {

enum class CellClass : std::uint8_t { Interior, Cut, Exterior };

struct Box {
  Vec3 lo{0.0, 0.0, 0.0};
  Vec3 hi{1.0, 1.0, 1.0};
};

/// Cartesian background mesh of the artificial domain. Cells and vertices are
/// numbered lexicographically (x fastest). After classify_cells() the mesh
/// carries the snapped corner level-set samples, per-edge cut flags and the
/// per-cell classification; it is immutable from then on and safe to share
/// across threads.
struct BackgroundMesh {
  int dim = 2;
  std::array<int, 3> n{1, 1, 1};  // cells per axis (n[2]==1 in 2D)
  Vec3 origin{0.0, 0.0, 0.0};
  Vec3 h{1.0, 1.0, 1.0};          // spacing per axis

  std::vector<double> corner_psi;      // per vertex, 0.0 at snapped vertices
  std::vector<std::uint8_t> edge_cut;  // per (axis, lower vertex): strict interior root
  std::vector<CellClass> cell_class;
  bool classified = false;

  std::int64_t num_cells() const {
    return std::int64_t(n[0]) * n[1] * (dim == 3 ? n[2] : 1);
  }
  std::array<int, 3> vdims() const {
    return {n[0] + 1, n[1] + 1, dim == 3 ? n[2] + 1 : 1};
  }
  std::int64_t num_vertices() const {
    const auto v = vdims();
    return std::int64_t(v[0]) * v[1] * v[2];
  }

  std::int64_t cell_id(int i, int j, int k = 0) const {
    return (std::int64_t(k) * n[1] + j) * n[0] + i;
  }
  std::array<int, 3> cell_coords(std::int64_t c) const {
    const int i = int(c % n[0]);
    const int j = int((c / n[0]) % n[1]);
    const int k = int(c / (std::int64_t(n[0]) * n[1]));
    return {i, j, k};
  }
  std::int64_t vertex_id(int i, int j, int k = 0) const {
    const auto v = vdims();
    return (std::int64_t(k) * v[1] + j) * v[0] + i;
  }
  Vec3 vertex_coords(int i, int j, int k = 0) const {
    return {origin[0] + i * h[0], origin[1] + j * h[1],
            dim == 3 ? origin[2] + k * h[2] : 0.0};
  }
  Vec3 cell_lo(std::int64_t c) const {
    const auto ijk = cell_coords(c);
    return vertex_coords(ijk[0], ijk[1], ijk[2]);
  }
  Vec3 cell_center(std::int64_t c) const {
    const auto lo = cell_lo(c);
    return {lo[0] + 0.5 * h[0], lo[1] + 0.5 * h[1], dim == 3 ? lo[2] + 0.5 * h[2] : 0.0};
  }
  double cell_volume() const { return dim == 3 ? h[0] * h[1] * h[2] : h[0] * h[1]; }
  double h_max() const { return std::max(h[0], std::max(h[1], dim == 3 ? h[2] : 0.0)); }

  /// Vertices of a cell, lexicographic local order (x fastest), 2^dim of them.
  void cell_vertices(std::int64_t c, std::int64_t out[8]) const;

  CellClass klass(std::int64_t c) const { return cell_class[std::size_t(c)]; }
  bool is_active(std::int64_t c) const { return klass(c) != CellClass::Exterior; }
};

BackgroundMesh build_mesh(const Box& box, const std::array<int, 3>& cells_per_axis, int dim);

/// Classifies every cell against the level set. Snapped edge cuts collapse the
/// geometry onto the nearest grid vertex: the vertex sample is zeroed and the
/// vertex counts as inside (psi <= 0 convention).
void classify_cells(BackgroundMesh& mesh, const LevelSetGeometry& geom);

struct FacetRef {
  std::int64_t cell = -1;
  int axis = 0;
  int side = 0;  // 0 = low face, 1 = high face
};

/// Up to 2*dim facet neighbors of a cell; box-boundary facets have none.
std::vector<std::pair<std::int64_t, FacetRef>> facet_neighbors(const BackgroundMesh& mesh,
                                                               std::int64_t cell);

/// True iff some point of the facet lies strictly inside Omega, judged from
/// the snapped corner samples and strict edge cuts.
bool facet_cut_by_domain(const BackgroundMesh& mesh, const FacetRef& facet);

/// Volume fraction |K ∩ Omega| / |K| of an active cell.
double eta(const BackgroundMesh& mesh, const LevelSetGeometry& geom, std::int64_t cell, int q,
           int subdiv);

/// Vertex/edge/face identifier on the background grid. Per axis the entity is
/// either pinned to a grid plane or spans a cell interval; its dimension is
/// the number of spanning axes.
struct VEFIndex {
  int dim = 0;
  std::array<int, 3> coord{0, 0, 0};       // plane index or cell index per axis
  std::array<bool, 3> spans{false, false, false};

  std::vector<std::int64_t> incident_cells(const BackgroundMesh& mesh) const;
};

}  // namespace agfem
