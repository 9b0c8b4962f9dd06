#include "agfem/quadrature.hpp"

#include <omp.h>

#include <algorithm>
#include <cassert>
#include <cmath>

namespace agfem {

void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.resize(std::size_t(n));
  w.resize(std::size_t(n));
  const double pi = std::acos(-1.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(pi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    x[std::size_t(i)] = 0.5 * (1.0 - z);
    x[std::size_t(n - 1 - i)] = 0.5 * (1.0 + z);
    w[std::size_t(i)] = w[std::size_t(n - 1 - i)] = 1.0 / ((1.0 - z * z) * pp * pp);
  }
}

namespace {

struct Rule1D {
  std::vector<double> x, w;
};

Rule1D rule1d(int n) {
  Rule1D r;
  gauss_legendre(n, r.x, r.w);
  return r;
}

void tensor_rule(const Vec3& lo, const Vec3& len, int dim, int n1d,
                 std::vector<BulkPoint>& out) {
  const Rule1D g = rule1d(n1d);
  if (dim == 2) {
    for (int j = 0; j < n1d; ++j)
      for (int i = 0; i < n1d; ++i)
        out.push_back({{lo[0] + g.x[std::size_t(i)] * len[0], lo[1] + g.x[std::size_t(j)] * len[1], 0.0},
                       g.w[std::size_t(i)] * g.w[std::size_t(j)] * len[0] * len[1]});
  } else {
    for (int k = 0; k < n1d; ++k)
      for (int j = 0; j < n1d; ++j)
        for (int i = 0; i < n1d; ++i)
          out.push_back({{lo[0] + g.x[std::size_t(i)] * len[0], lo[1] + g.x[std::size_t(j)] * len[1],
                          lo[2] + g.x[std::size_t(k)] * len[2]},
                         g.w[std::size_t(i)] * g.w[std::size_t(j)] * g.w[std::size_t(k)] * len[0] *
                             len[1] * len[2]});
  }
}

inline double cross2(const Vec3& a, const Vec3& b) { return a[0] * b[1] - a[1] * b[0]; }

// Root point on the segment [a,b]; the call is canonicalized on the
// lexicographically smaller endpoint so shared edges of neighboring (sub)cells
// produce bitwise-identical points.
Vec3 root_between(const LevelSetGeometry& g, const Vec3& a, const Vec3& b) {
  const bool swap = std::lexicographical_compare(b.begin(), b.end(), a.begin(), a.end());
  const Vec3& lo = swap ? b : a;
  const Vec3& hi = swap ? a : b;
  const auto t = edge_intersection(g, lo, hi, 0.0);
  const double tt = t ? *t : 0.5;
  return lo + tt * (hi - lo);
}

// ---------------------------------------------------------------------------
// marching simplices

struct TriPiece {
  Vec3 a, b, c;
  bool chord_bc = false;  // edge b-c lies on the interface (curvable in 2D)
};

struct SegPiece {
  Vec3 p0, p1, rep_in;
  Vec3 apex_in, apex_out;  // chord-triangle apices on this side / the complement
};

struct TetPiece {
  Vec3 v[4];
};

struct TriFace {
  Vec3 p0, p1, p2, rep_in;
};

// vals <= 0 counts as inside (snapped vertices carry exactly 0)
void march_triangle(const LevelSetGeometry& g, const Vec3 v[3], const double val[3],
                    std::vector<TriPiece>& tris, std::vector<SegPiece>& segs) {
  int ins[3], outs[3], ni = 0, no = 0;
  for (int i = 0; i < 3; ++i) (val[i] <= 0.0 ? ins[ni++] : outs[no++]) = i;
  auto root = [&](int i, int o) {
    return val[i] == 0.0 ? v[i] : root_between(g, v[i], v[o]);
  };
  if (ni == 3) {
    tris.push_back({v[0], v[1], v[2], false});
  } else if (ni == 1) {
    const Vec3 pab = root(ins[0], outs[0]);
    const Vec3 pac = root(ins[0], outs[1]);
    tris.push_back({v[ins[0]], pab, pac, true});
    segs.push_back({pab, pac, v[ins[0]], v[ins[0]], v[outs[0]]});
  } else if (ni == 2) {
    const Vec3 pac = root(ins[0], outs[0]);
    const Vec3 pbc = root(ins[1], outs[0]);
    tris.push_back({v[ins[0]], v[ins[1]], pbc, false});
    tris.push_back({v[ins[0]], pbc, pac, true});
    segs.push_back({pac, pbc, 0.5 * (v[ins[0]] + v[ins[1]]), v[ins[0]], v[outs[0]]});
  }
}

void march_tet(const LevelSetGeometry& g, const Vec3 v[4], const double val[4],
               std::vector<TetPiece>& tets, std::vector<TriFace>& faces) {
  int ins[4], outs[4], ni = 0, no = 0;
  for (int i = 0; i < 4; ++i) (val[i] <= 0.0 ? ins[ni++] : outs[no++]) = i;
  auto root = [&](int i, int o) {
    return val[i] == 0.0 ? v[i] : root_between(g, v[i], v[o]);
  };
  if (ni == 4) {
    tets.push_back({{v[0], v[1], v[2], v[3]}});
  } else if (ni == 1) {
    const Vec3 A = v[ins[0]];
    const Vec3 p0 = root(ins[0], outs[0]);
    const Vec3 p1 = root(ins[0], outs[1]);
    const Vec3 p2 = root(ins[0], outs[2]);
    tets.push_back({{A, p0, p1, p2}});
    faces.push_back({p0, p1, p2, A});
  } else if (ni == 3) {
    const Vec3 A = v[ins[0]], B = v[ins[1]], C = v[ins[2]];
    const Vec3 pa = root(ins[0], outs[0]);
    const Vec3 pb = root(ins[1], outs[0]);
    const Vec3 pc = root(ins[2], outs[0]);
    tets.push_back({{A, B, C, pa}});
    tets.push_back({{B, C, pa, pb}});
    tets.push_back({{C, pa, pb, pc}});
    faces.push_back({pa, pb, pc, (1.0 / 3.0) * (A + B + C)});
  } else if (ni == 2) {
    const Vec3 A = v[ins[0]], B = v[ins[1]];
    const Vec3 pac = root(ins[0], outs[0]);
    const Vec3 pad = root(ins[0], outs[1]);
    const Vec3 pbc = root(ins[1], outs[0]);
    const Vec3 pbd = root(ins[1], outs[1]);
    // prism (A, pac, pad | B, pbc, pbd); the interface quad is split along
    // the pad-pbc diagonal consistently with the tet decomposition.
    tets.push_back({{A, pac, pad, B}});
    tets.push_back({{pac, pad, B, pbc}});
    tets.push_back({{pad, B, pbc, pbd}});
    const Vec3 rep = 0.5 * (A + B);
    faces.push_back({pac, pad, pbc, rep});
    faces.push_back({pad, pbd, pbc, rep});
  }
}

// ---------------------------------------------------------------------------
// piece integration

double tri_signed_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * cross2(b - a, c - a);
}

double tet_volume(const Vec3 v[4]) {
  return std::abs(dot(v[1] - v[0], cross(v[2] - v[0], v[3] - v[0]))) / 6.0;
}

void straight_tri_points(const Vec3& a, const Vec3& b, const Vec3& c, int n1d,
                         std::vector<BulkPoint>& out) {
  const double area2 = std::abs(cross2(b - a, c - a));
  if (area2 <= 0.0) return;
  const Rule1D g = rule1d(n1d);
  for (int j = 0; j < n1d; ++j)
    for (int i = 0; i < n1d; ++i) {
      const double u = g.x[std::size_t(i)], vv = g.x[std::size_t(j)];
      const double xi = u, eta = vv * (1.0 - u);
      const Vec3 x = a + xi * (b - a) + eta * (c - a);
      out.push_back({x, g.w[std::size_t(i)] * g.w[std::size_t(j)] * (1.0 - u) * area2});
    }
}

// embedded triangle in R^3 (box faces, interface facets): same Duffy points,
// measure from the cross product
void embedded_tri_points(const Vec3& a, const Vec3& b, const Vec3& c, int n1d,
                         std::vector<BulkPoint>& out) {
  const double area2 = norm(cross(b - a, c - a));
  if (area2 <= 0.0) return;
  const Rule1D g = rule1d(n1d);
  for (int j = 0; j < n1d; ++j)
    for (int i = 0; i < n1d; ++i) {
      const double u = g.x[std::size_t(i)], vv = g.x[std::size_t(j)];
      const double xi = u, eta = vv * (1.0 - u);
      const Vec3 x = a + xi * (b - a) + eta * (c - a);
      out.push_back({x, g.w[std::size_t(i)] * g.w[std::size_t(j)] * (1.0 - u) * area2});
    }
}

void straight_tet_points(const Vec3 v[4], int n1d, std::vector<BulkPoint>& out) {
  const double det = std::abs(dot(v[1] - v[0], cross(v[2] - v[0], v[3] - v[0])));
  if (det <= 0.0) return;
  const Rule1D g = rule1d(n1d);
  for (int k = 0; k < n1d; ++k)
    for (int j = 0; j < n1d; ++j)
      for (int i = 0; i < n1d; ++i) {
        const double u = g.x[std::size_t(i)], vv = g.x[std::size_t(j)], w = g.x[std::size_t(k)];
        const double xi = u, eta = vv * (1.0 - u), zeta = w * (1.0 - u) * (1.0 - vv);
        const Vec3 x = v[0] + xi * (v[1] - v[0]) + eta * (v[2] - v[0]) + zeta * (v[3] - v[0]);
        const double jac = (1.0 - u) * (1.0 - u) * (1.0 - vv);
        out.push_back({x, g.w[std::size_t(i)] * g.w[std::size_t(j)] * g.w[std::size_t(k)] * jac * det});
      }
}

// P2 triangle with one curved edge (between b and c, midnode m). The caller
// guarantees map validity through the Jacobian margin of curved_edge_valid().
void curved_tri_points(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& m, int n1d,
                       std::vector<BulkPoint>& out) {
  Vec3 v0 = a, v1 = b, v2 = c, mid = m;
  if (tri_signed_area(v0, v1, v2) < 0.0) std::swap(v1, v2);
  const Vec3 X[6] = {v0, v1, v2, 0.5 * (v0 + v1), mid, 0.5 * (v0 + v2)};
  const Rule1D g = rule1d(n1d);
  for (int j = 0; j < n1d; ++j)
    for (int i = 0; i < n1d; ++i) {
      const double u = g.x[std::size_t(i)], vv = g.x[std::size_t(j)];
      const double xi = u, eta = vv * (1.0 - u);
      const double l0 = 1.0 - xi - eta, l1 = xi, l2 = eta;
      const double N[6] = {l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
                           4 * l0 * l1, 4 * l1 * l2, 4 * l0 * l2};
      const double dNxi[6] = {1 - 4 * l0, 4 * l1 - 1, 0, 4 * (l0 - l1), 4 * l2, -4 * l2};
      const double dNeta[6] = {1 - 4 * l0, 0, 4 * l2 - 1, -4 * l1, 4 * l1, 4 * (l0 - l2)};
      Vec3 x{0, 0, 0}, dxi{0, 0, 0}, deta{0, 0, 0};
      for (int k = 0; k < 6; ++k) {
        x = x + N[k] * X[k];
        dxi = dxi + dNxi[k] * X[k];
        deta = deta + dNeta[k] * X[k];
      }
      const double det = cross2(dxi, deta);
      assert(det > 0.0);
      out.push_back({x, g.w[std::size_t(i)] * g.w[std::size_t(j)] * (1.0 - u) * det});
    }
}

// Moving the b-c midnode to m is a rank-one update of the affine Jacobian:
// det J / det J_aff = 1 + 4 (alpha l2 + beta l1) with the displacement
// d = alpha (b-a) + beta (c-a). The minimum over the reference triangle sits
// at a corner, so the P2 map stays a bijection iff min(alpha, beta) > -1/4
// (checked with a 10% margin).
bool curved_edge_valid(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& m) {
  const Vec3 e1 = b - a, e2 = c - a;
  const double det = cross2(e1, e2);
  if (det == 0.0) return false;
  const Vec3 d = m - 0.5 * (b + c);
  const double al = (d[0] * e2[1] - d[1] * e2[0]) / det;
  const double be = (e1[0] * d[1] - e1[1] * d[0]) / det;
  return std::min(al, be) >= -0.225;
}

void curved_seg_points(const Vec3& p0, const Vec3& pm, const Vec3& p1, const Vec3& rep_in,
                       int npts, std::vector<SurfPoint>& out) {
  const Vec3 chord = p1 - p0;
  const double len = norm(chord);
  if (len <= 0.0) return;
  const double side = cross2(chord, rep_in - p0) > 0.0 ? 1.0 : -1.0;
  const Rule1D g = rule1d(npts);
  for (int i = 0; i < npts; ++i) {
    const double t = g.x[std::size_t(i)];
    // quadratic through nodes at t = 0, 1/2, 1
    const double N0 = 2.0 * (t - 0.5) * (t - 1.0);
    const double N1 = 4.0 * t * (1.0 - t);
    const double N2 = 2.0 * t * (t - 0.5);
    const double d0 = 4.0 * t - 3.0, d1 = 4.0 - 8.0 * t, d2 = 4.0 * t - 1.0;
    const Vec3 x = N0 * p0 + N1 * pm + N2 * p1;
    const Vec3 dx = d0 * p0 + d1 * pm + d2 * p1;
    const double sp = norm(dx);
    if (sp <= 0.0) continue;
    Vec3 nrm{side * dx[1] / sp, -side * dx[0] / sp, 0.0};
    out.push_back({x, g.w[std::size_t(i)] * sp, nrm});
  }
}

void flat_tri_face_points(const TriFace& f, int n1d, std::vector<SurfPoint>& out) {
  const Vec3 cr = cross(f.p1 - f.p0, f.p2 - f.p0);
  const double area2 = norm(cr);
  if (area2 <= 0.0) return;
  Vec3 nrm = (1.0 / area2) * cr;
  const Vec3 centroid = (1.0 / 3.0) * (f.p0 + f.p1 + f.p2);
  if (dot(nrm, f.rep_in - centroid) > 0.0) nrm = -1.0 * nrm;
  std::vector<BulkPoint> pts;
  embedded_tri_points(f.p0, f.p1, f.p2, n1d, pts);
  for (const auto& p : pts) out.push_back({p.x, p.w, nrm});
}

// Midpoint of the interface arc over a chord: root of psi along the chord
// normal through the chord midpoint, within half the chord length.
std::optional<Vec3> arc_midpoint(const LevelSetGeometry& g, const Vec3& p0, const Vec3& p1) {
  const Vec3 chord = p1 - p0;
  const double len = norm(chord);
  const Vec3 M = 0.5 * (p0 + p1);
  if (len <= 0.0) return std::nullopt;
  const Vec3 nrm{chord[1] / len, -chord[0] / len, 0.0};
  if (g.psi(M) == 0.0) return M;
  const double smax = 0.5 * len;
  std::optional<Vec3> best;
  double best_dist = smax;
  for (const double sgn : {1.0, -1.0}) {
    const Vec3 end = M + (sgn * smax) * nrm;
    if (g.psi(M) * g.psi(end) < 0.0) {
      const auto t = edge_intersection(g, M, end, 0.0);
      if (t && *t * smax < best_dist) {
        best_dist = *t * smax;
        best = M + (*t) * (end - M);
      }
    }
  }
  return best;
}

struct RuleCounts {
  int tri_straight, tri_curved, tet, seg_straight, seg_curved, face3d, tensor;
};

// Point counts sized so the patch-test divergence identity is exact:
// bulk must integrate grad(v).c exactly (degree 2q-1 on straight 2D pieces,
// 3q-1 on tets, 4q on curved P2 pieces), the surface must integrate v c.n
// (degree 4q+1 along curved segments, 3q on flat 3D facets).
RuleCounts rule_counts(int q, int bump) {
  RuleCounts rc;
  rc.tri_straight = q + 1 + bump;
  rc.tri_curved = 2 * q + 1 + bump;
  rc.tet = (3 * q + 3) / 2 + bump;
  rc.seg_straight = q + 1 + bump;
  rc.seg_curved = 2 * q + 2 + bump;
  rc.face3d = (3 * q + 3) / 2 + bump;
  rc.tensor = q + 1 + bump;
  return rc;
}

}  // namespace

CutQuadrature interior_rule(const BackgroundMesh& mesh, std::int64_t cell, int q, int bump) {
  CutQuadrature out;
  tensor_rule(mesh.cell_lo(cell), mesh.h, mesh.dim, q + 1 + bump, out.bulk);
  return out;
}

CutQuadrature cut_rule(const BackgroundMesh& mesh, const LevelSetGeometry& geom,
                       std::int64_t cell, int q, int subdiv, int bump) {
  assert(mesh.classified);
  const int dim = mesh.dim;
  const int ns = 1 << subdiv;
  const auto rc = rule_counts(q, bump);
  CutQuadrature out;
  out.depth = subdiv;

  // sub-lattice samples; cell corners reuse the snapped mesh cache
  const int nv1 = ns + 1;
  const int nv2 = dim == 3 ? ns + 1 : 1;
  std::vector<double> vals(std::size_t(nv1) * nv1 * nv2);
  std::vector<Vec3> pts(vals.size());
  const Vec3 lo = mesh.cell_lo(cell);
  const auto cijk = mesh.cell_coords(cell);
  auto lid = [&](int i, int j, int k) { return (std::size_t(k) * nv1 + j) * nv1 + i; };
  for (int k = 0; k < nv2; ++k)
    for (int j = 0; j < nv1; ++j)
      for (int i = 0; i < nv1; ++i) {
        const Vec3 x{lo[0] + i * mesh.h[0] / ns, lo[1] + j * mesh.h[1] / ns,
                     dim == 3 ? lo[2] + k * mesh.h[2] / ns : 0.0};
        pts[lid(i, j, k)] = x;
        const bool corner = (i == 0 || i == ns) && (j == 0 || j == ns) &&
                            (dim == 2 || k == 0 || k == ns);
        vals[lid(i, j, k)] =
            corner ? mesh.corner_psi[std::size_t(mesh.vertex_id(
                         cijk[0] + (i ? 1 : 0), cijk[1] + (j ? 1 : 0), cijk[2] + (k ? 1 : 0)))]
                   : geom.psi(x);
      }

  // snap pass on sub-edges: the collapse distance stays eps * h_cell, so the
  // parameter threshold scales with the subdivision factor
  if (geom.snap_eps > 0.0) {
    const double eps_sub = std::min(0.45, geom.snap_eps * ns);
    std::vector<std::size_t> to_zero;
    for (int axis = 0; axis < dim; ++axis)
      for (int k = 0; k < nv2; ++k)
        for (int j = 0; j < nv1; ++j)
          for (int i = 0; i < nv1; ++i) {
            int ii = i + (axis == 0), jj = j + (axis == 1), kk = k + (axis == 2);
            if (ii >= nv1 || jj >= nv1 || kk >= nv2) continue;
            const std::size_t a = lid(i, j, k), b = lid(ii, jj, kk);
            if (vals[a] == 0.0 || vals[b] == 0.0 || (vals[a] < 0.0) == (vals[b] < 0.0)) continue;
            const auto t = edge_intersection(geom, pts[a], pts[b], eps_sub);
            if (t && *t == 0.0) to_zero.push_back(a);
            else if (t && *t == 1.0) to_zero.push_back(b);
          }
    for (const auto a : to_zero) vals[a] = 0.0;
  }

  std::vector<TetPiece> tets;
  std::vector<TriFace> faces;
  const double vol_eps0 = 1e-14 * mesh.cell_volume() / std::pow(double(ns), dim);

  // Marching state of one 2D chord: acceptance is decided from data shared by
  // both sides of the interface (roots, arc midpoint, the two apices), so the
  // psi and -psi runs always agree.
  struct ChordInfo {
    bool present = false;
    bool accepted = true;
    Vec3 mid{0, 0, 0};
  };
  const auto inspect_chord = [&](const SegPiece& sg, ChordInfo& ci) {
    ci.present = true;
    const double len = norm(sg.p1 - sg.p0);
    if (len <= 0.0) {
      ci.accepted = true;  // degenerate chord, emitted as (empty) straight
      ci.mid = sg.p0;
      return;
    }
    const auto mid = arc_midpoint(geom, sg.p0, sg.p1);
    if (!mid) {
      ci.accepted = false;
      ci.mid = 0.5 * (sg.p0 + sg.p1);
      return;
    }
    ci.mid = *mid;
    ci.accepted = norm(*mid - 0.5 * (sg.p0 + sg.p1)) <= 0.2 * len &&
                  curved_edge_valid(sg.apex_in, sg.p0, sg.p1, *mid) &&
                  curved_edge_valid(sg.apex_out, sg.p0, sg.p1, *mid);
  };

  // Processes one axis-aligned box given its corner samples. Cut 2D boxes
  // whose chords fail acceptance are refined in place (up to kMaxAdapt extra
  // levels); at the bottom the chord falls back to a straight piece.
  constexpr int kMaxAdapt = 3;
  const auto process_box = [&](auto&& self, const Vec3 cp[8], const double cv[8],
                               int level) -> void {
    const int ncv = dim == 3 ? 8 : 4;
    bool any_in = false, any_out = false;
    for (int v = 0; v < ncv; ++v) (cv[v] <= 0.0 ? any_in : any_out) = true;
    if (!any_in) return;
    const Vec3 blen = cp[ncv - 1] - cp[0];
    if (!any_out) {
      tensor_rule(cp[0], blen, dim, rc.tensor, out.bulk);
      return;
    }
    const double vol_eps = vol_eps0 / std::pow(2.0, dim * level);

    if (dim == 3) {
      // marching tets: flat interface pieces, no adaptivity needed
      static const int kuhn[6][4] = {{0, 1, 3, 7}, {0, 1, 5, 7}, {0, 2, 3, 7},
                                     {0, 2, 6, 7}, {0, 4, 5, 7}, {0, 4, 6, 7}};
      tets.clear();
      faces.clear();
      for (const auto& tt : kuhn) {
        const Vec3 v[4] = {cp[tt[0]], cp[tt[1]], cp[tt[2]], cp[tt[3]]};
        const double va[4] = {cv[tt[0]], cv[tt[1]], cv[tt[2]], cv[tt[3]]};
        march_tet(geom, v, va, tets, faces);
      }
      for (const auto& t : tets) {
        if (tet_volume(t.v) < vol_eps) continue;
        straight_tet_points(t.v, rc.tet, out.bulk);
      }
      for (const auto& f : faces) flat_tri_face_points(f, rc.face3d, out.surface);
      return;
    }

    // 2D: Kuhn split along the (+1,+1) diagonal
    const int kt[2][3] = {{0, 1, 3}, {0, 3, 2}};
    std::vector<TriPiece> tris[2];
    std::vector<SegPiece> segs[2];
    ChordInfo chords[2];
    bool all_ok = true;
    for (int s2 = 0; s2 < 2; ++s2) {
      const Vec3 v[3] = {cp[kt[s2][0]], cp[kt[s2][1]], cp[kt[s2][2]]};
      const double va[3] = {cv[kt[s2][0]], cv[kt[s2][1]], cv[kt[s2][2]]};
      march_triangle(geom, v, va, tris[s2], segs[s2]);
      if (!segs[s2].empty()) {
        inspect_chord(segs[s2].front(), chords[s2]);
        all_ok = all_ok && chords[s2].accepted;
      }
    }

    if (!all_ok && level < kMaxAdapt) {
      // refine this box 2x2: corner samples are reused, new points evaluated
      Vec3 sub[3][3];
      double subv[3][3];
      for (int j = 0; j <= 2; ++j)
        for (int i = 0; i <= 2; ++i) {
          sub[j][i] = cp[0] + (0.5 * i) * Vec3{blen[0], 0, 0} + (0.5 * j) * Vec3{0, blen[1], 0};
          const bool corner = (i == 0 || i == 2) && (j == 0 || j == 2);
          subv[j][i] = corner ? cv[(j / 2) * 2 + i / 2] : geom.psi(sub[j][i]);
        }
      for (int j = 0; j < 2; ++j)
        for (int i = 0; i < 2; ++i) {
          const Vec3 ccp[4] = {sub[j][i], sub[j][i + 1], sub[j + 1][i], sub[j + 1][i + 1]};
          const double ccv[4] = {subv[j][i], subv[j][i + 1], subv[j + 1][i], subv[j + 1][i + 1]};
          self(self, ccp, ccv, level + 1);
        }
      return;
    }

    for (int s2 = 0; s2 < 2; ++s2) {
      const bool curved = chords[s2].present && chords[s2].accepted &&
                          norm(segs[s2].front().p1 - segs[s2].front().p0) > 0.0 &&
                          norm(chords[s2].mid - 0.5 * (segs[s2].front().p0 +
                                                       segs[s2].front().p1)) > 0.0;
      for (const auto& t : tris[s2]) {
        if (std::abs(tri_signed_area(t.a, t.b, t.c)) < vol_eps) continue;
        if (t.chord_bc && curved)
          curved_tri_points(t.a, t.b, t.c, chords[s2].mid, rc.tri_curved, out.bulk);
        else
          straight_tri_points(t.a, t.b, t.c, rc.tri_straight, out.bulk);
      }
      for (const auto& sg : segs[s2]) {
        if (norm(sg.p1 - sg.p0) <= 0.0) continue;
        curved_seg_points(sg.p0, curved ? chords[s2].mid : 0.5 * (sg.p0 + sg.p1), sg.p1,
                          sg.rep_in, rc.seg_curved, out.surface);
      }
    }
  };

  const int nsk = dim == 3 ? ns : 1;
  for (int k = 0; k < nsk; ++k)
    for (int j = 0; j < ns; ++j)
      for (int i = 0; i < ns; ++i) {
        double cv[8];
        Vec3 cp[8];
        int m = 0;
        const int kmax = dim == 3 ? 1 : 0;
        for (int dk = 0; dk <= kmax; ++dk)
          for (int dj = 0; dj <= 1; ++dj)
            for (int di = 0; di <= 1; ++di) {
              cv[m] = vals[lid(i + di, j + dj, k + dk)];
              cp[m] = pts[lid(i + di, j + dj, k + dk)];
              ++m;
            }
        process_box(process_box, cp, cv, 0);
      }
  return out;
}

CutQuadrature cell_rule(const BackgroundMesh& mesh, const LevelSetGeometry& geom,
                        std::int64_t cell, int q, int subdiv, int bump) {
  switch (mesh.klass(cell)) {
    case CellClass::Interior: return interior_rule(mesh, cell, q, bump);
    case CellClass::Cut: return cut_rule(mesh, geom, cell, q, subdiv, bump);
    case CellClass::Exterior: return {};
  }
  return {};
}

std::vector<VizPiece> cut_cell_triangulation(const BackgroundMesh& mesh,
                                             const LevelSetGeometry& geom, std::int64_t cell,
                                             int subdiv) {
  std::vector<VizPiece> out;
  const int dim = mesh.dim;
  const int ns = 1 << subdiv;
  const Vec3 lo = mesh.cell_lo(cell);
  const Vec3 slen{mesh.h[0] / ns, mesh.h[1] / ns, dim == 3 ? mesh.h[2] / ns : 0.0};
  const int nsk = dim == 3 ? ns : 1;
  std::vector<TriPiece> tris;
  std::vector<SegPiece> segs;
  std::vector<TetPiece> tets;
  std::vector<TriFace> faces;
  for (int k = 0; k < nsk; ++k)
    for (int j = 0; j < ns; ++j)
      for (int i = 0; i < ns; ++i) {
        Vec3 cp[8];
        double cv[8];
        int m = 0;
        const int kmax = dim == 3 ? 1 : 0;
        for (int dk = 0; dk <= kmax; ++dk)
          for (int dj = 0; dj <= 1; ++dj)
            for (int di = 0; di <= 1; ++di) {
              cp[m] = {lo[0] + (i + di) * slen[0], lo[1] + (j + dj) * slen[1],
                       dim == 3 ? lo[2] + (k + dk) * slen[2] : 0.0};
              cv[m] = geom.psi(cp[m]);
              ++m;
            }
        bool any_in = false, any_out = false;
        for (int v = 0; v < m; ++v) (cv[v] <= 0.0 ? any_in : any_out) = true;
        if (!any_in) continue;
        if (!any_out) {
          VizPiece p;
          p.nv = dim == 3 ? 8 : 4;
          for (int v = 0; v < m; ++v) p.v[std::size_t(v)] = cp[v];
          out.push_back(p);
          continue;
        }
        tris.clear(); segs.clear(); tets.clear(); faces.clear();
        if (dim == 2) {
          const int t0[3] = {0, 1, 3}, t1[3] = {0, 3, 2};
          for (const int* tr : {t0, t1}) {
            const Vec3 v[3] = {cp[tr[0]], cp[tr[1]], cp[tr[2]]};
            const double va[3] = {cv[tr[0]], cv[tr[1]], cv[tr[2]]};
            march_triangle(geom, v, va, tris, segs);
          }
          for (const auto& t : tris) {
            if (std::abs(tri_signed_area(t.a, t.b, t.c)) <= 0.0) continue;
            VizPiece p;
            p.nv = 3;
            p.v[0] = t.a; p.v[1] = t.b; p.v[2] = t.c;
            out.push_back(p);
          }
        } else {
          static const int kuhn[6][4] = {{0, 1, 3, 7}, {0, 1, 5, 7}, {0, 2, 3, 7},
                                         {0, 2, 6, 7}, {0, 4, 5, 7}, {0, 4, 6, 7}};
          for (const auto& tt : kuhn) {
            const Vec3 v[4] = {cp[tt[0]], cp[tt[1]], cp[tt[2]], cp[tt[3]]};
            const double va[4] = {cv[tt[0]], cv[tt[1]], cv[tt[2]], cv[tt[3]]};
            march_tet(geom, v, va, tets, faces);
          }
          for (const auto& t : tets) {
            if (tet_volume(t.v) <= 0.0) continue;
            VizPiece p;
            p.nv = 5;
            for (int v = 0; v < 4; ++v) p.v[std::size_t(v)] = t.v[v];
            out.push_back(p);
          }
        }
      }
  return out;
}

std::vector<SurfPoint> box_facet_rule(const BackgroundMesh& mesh, const LevelSetGeometry& geom,
                                      std::int64_t cell, int axis, int side, int q, int bump) {
  assert(mesh.classified);
  std::vector<SurfPoint> out;
  const auto rc = rule_counts(q, bump);
  const auto ijk = mesh.cell_coords(cell);
  Vec3 nrm{0, 0, 0};
  nrm[std::size_t(axis)] = side == 0 ? -1.0 : 1.0;

  if (mesh.dim == 2) {
    const int taxis = 1 - axis;
    std::array<int, 3> a = {ijk[0], ijk[1], 0}, b;
    a[std::size_t(axis)] += side;
    b = a;
    b[std::size_t(taxis)] += 1;
    const Vec3 pa = mesh.vertex_coords(a[0], a[1]);
    const Vec3 pb = mesh.vertex_coords(b[0], b[1]);
    const double va = mesh.corner_psi[std::size_t(mesh.vertex_id(a[0], a[1]))];
    const double vb = mesh.corner_psi[std::size_t(mesh.vertex_id(b[0], b[1]))];
    Vec3 s0 = pa, s1 = pb;
    if (va <= 0.0 && vb <= 0.0) {
      // full facet inside
    } else if (va > 0.0 && vb > 0.0) {
      return out;
    } else {
      const Vec3 r = root_between(geom, pa, pb);
      if (va <= 0.0) s1 = r;
      else s0 = r;
    }
    const double len = norm(s1 - s0);
    if (len <= 0.0) return out;
    Rule1D g;
    gauss_legendre(rc.seg_straight, g.x, g.w);
    for (std::size_t i = 0; i < g.x.size(); ++i)
      out.push_back({s0 + g.x[i] * (s1 - s0), g.w[i] * len, nrm});
    return out;
  }

  // 3D: march the face (two Kuhn triangles embedded in R^3)
  std::array<int, 3> base = {ijk[0], ijk[1], ijk[2]};
  base[std::size_t(axis)] += side;
  const int ta = axis == 0 ? 1 : 0;
  const int tb = axis == 2 ? 1 : 2;
  Vec3 fp[4];
  double fv[4];
  int m = 0;
  for (int dj = 0; dj <= 1; ++dj)
    for (int di = 0; di <= 1; ++di) {
      auto p = base;
      p[std::size_t(ta)] += di;
      p[std::size_t(tb)] += dj;
      fp[m] = mesh.vertex_coords(p[0], p[1], p[2]);
      fv[m] = mesh.corner_psi[std::size_t(mesh.vertex_id(p[0], p[1], p[2]))];
      ++m;
    }
  std::vector<TriPiece> tris;
  std::vector<SegPiece> segs;
  const int t0[3] = {0, 1, 3}, t1[3] = {0, 3, 2};
  for (const int* tr : {t0, t1}) {
    const Vec3 v[3] = {fp[tr[0]], fp[tr[1]], fp[tr[2]]};
    const double va[3] = {fv[tr[0]], fv[tr[1]], fv[tr[2]]};
    march_triangle(geom, v, va, tris, segs);
  }
  std::vector<BulkPoint> pts;
  for (const auto& t : tris) embedded_tri_points(t.a, t.b, t.c, rc.face3d, pts);
  for (const auto& p : pts) out.push_back({p.x, p.w, nrm});
  return out;
}

std::pair<double, double> domain_measures(const BackgroundMesh& mesh,
                                          const LevelSetGeometry& geom, int q, int subdiv,
                                          Exec exec) {
  const std::int64_t nc = mesh.num_cells();
  double vol = 0.0, surf = 0.0;
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic, 16) reduction(+ : vol, surf)
    for (std::int64_t c = 0; c < nc; ++c) {
      if (mesh.klass(c) == CellClass::Interior) {
        vol += mesh.cell_volume();
      } else if (mesh.klass(c) == CellClass::Cut) {
        const auto rule = cut_rule(mesh, geom, c, q, subdiv);
        for (const auto& p : rule.bulk) vol += p.w;
        for (const auto& p : rule.surface) surf += p.w;
      }
    }
  } else {
    for (std::int64_t c = 0; c < nc; ++c) {
      if (mesh.klass(c) == CellClass::Interior) {
        vol += mesh.cell_volume();
      } else if (mesh.klass(c) == CellClass::Cut) {
        const auto rule = cut_rule(mesh, geom, c, q, subdiv);
        for (const auto& p : rule.bulk) vol += p.w;
        for (const auto& p : rule.surface) surf += p.w;
      }
    }
  }
  return {vol, surf};
}

}  // namespace agfem
