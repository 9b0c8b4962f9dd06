#pragma once

#include <utility>
#include <vector>

#include "agfem/core.hpp"
#include "agfem/geometry.hpp"
#include "agfem/mesh.hpp"

namespace agfem {

struct BulkPoint {
  Vec3 x;
  double w = 0.0;
};

struct SurfPoint {
  Vec3 x;
  double w = 0.0;
  Vec3 n{0.0, 0.0, 0.0};  // unit, pointing from psi<0 toward psi>0
};

/// Bulk rule on K ∩ Omega plus surface rule on Gamma ∩ K.
struct CutQuadrature {
  std::vector<BulkPoint> bulk;
  std::vector<SurfPoint> surface;
  int depth = 0;
};

/// Gauss-Legendre nodes/weights on [0,1].
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w);

/// Tensor Gauss rule with (q+1+bump)^d points on a full cell; exact for
/// polynomials of degree 2q+1 per axis at bump = 0.
CutQuadrature interior_rule(const BackgroundMesh& mesh, std::int64_t cell, int q, int bump = 0);

/// Cut-cell rule: the cell is subdivided 2^subdiv times per axis, each subcell
/// is split into Kuhn simplices and marched against the level set with exact
/// edge roots. In 2D the interface pieces are isoparametric-quadratic
/// (midpoint root-found along the chord normal); in 3D they are flat.
CutQuadrature cut_rule(const BackgroundMesh& mesh, const LevelSetGeometry& geom,
                       std::int64_t cell, int q, int subdiv, int bump = 0);

/// Dispatch on the cell class (Exterior cells yield an empty rule).
CutQuadrature cell_rule(const BackgroundMesh& mesh, const LevelSetGeometry& geom,
                        std::int64_t cell, int q, int subdiv, int bump = 0);

/// Quadrature for Omega ∩ facet on a box-boundary facet of an active cell;
/// normals point out of the box.
std::vector<SurfPoint> box_facet_rule(const BackgroundMesh& mesh, const LevelSetGeometry& geom,
                                      std::int64_t cell, int axis, int side, int q, int bump = 0);

/// (|Omega|, |Gamma|) approximated by the bulk/surface weight sums over all
/// active cells.
std::pair<double, double> domain_measures(const BackgroundMesh& mesh,
                                          const LevelSetGeometry& geom, int q, int subdiv,
                                          Exec exec = Exec::Serial);

inline int default_subdiv(int q) { return q <= 1 ? 0 : 2; }

/// Straight-sided triangulation of K ∩ Omega for visualization (curved pieces
/// are emitted flat). kind: 3 = triangle, 4 = quad, 'T' tets via nv.
struct VizPiece {
  int nv = 0;  // 3 tri, 4 quad, 5 tet (stored in v[0..3]), 8 hex
  std::array<Vec3, 8> v;
};

std::vector<VizPiece> cut_cell_triangulation(const BackgroundMesh& mesh,
                                             const LevelSetGeometry& geom, std::int64_t cell,
                                             int subdiv);

}  // namespace agfem
