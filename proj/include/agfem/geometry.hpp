#pragma once

#include <functional>
#include <optional>
#include <string>

#include "agfem/core.hpp"

namespace agfem {

/// Implicit domain Omega = { x : psi(x) < 0 }, boundary = zero level set.
/// snap_eps is the relative edge-cut snapping tolerance (dimensionless,
/// measured on the edge parameter).
struct LevelSetGeometry {
  int dim = 2;
  double snap_eps = 1e-6;
  std::function<double(const Vec3&)> psi;
  std::function<Vec3(const Vec3&)> grad_psi;  // optional, may be empty
  std::string name;

  double operator()(const Vec3& x) const { return psi(x); }
};

inline double eval_levelset(const LevelSetGeometry& g, const Vec3& x) { return g.psi(x); }

/// Root of psi along the segment a + t (b - a), t in [0,1].
/// Returns the parameter, snapped to 0/1 when within eps of an endpoint,
/// or nothing when psi does not change sign on the edge. The root is located
/// by bisection (bracket width below 1e-12) followed by a secant polish.
std::optional<double> edge_intersection(const LevelSetGeometry& g, const Vec3& a, const Vec3& b);
std::optional<double> edge_intersection(const LevelSetGeometry& g, const Vec3& a, const Vec3& b,
                                        double eps);

/// Default snapping tolerance per dimension.
inline double default_snap_eps(int dim) { return dim == 3 ? 1e-3 : 1e-6; }

/// Benchmark shapes inside the unit box [0,1]^d.
///  - "circle" (2D) and "sphere" (3D): radius 0.25 * scale
///  - "popcorn" (3D): flake of radius ~0.44 * scale (constants in README)
/// The body center sits on the main box diagonal at Euclidean distance ell
/// from the origin corner, i.e. center = (ell/sqrt(d)) (1,...,1). Pass a
/// negative ell to center the body in the box.
LevelSetGeometry builtin_shapes(const std::string& name, double scale = 1.0, double ell = -1.0);

/// Largest distance from the body center to its surface (used to bound the
/// admissible ell range in the moving-domain sweep).
double shape_radius(const std::string& name, double scale);

/// Manufactured Poisson benchmark: u, grad u and f = -laplacian(u) in closed
/// form; 2D evaluates the same expression at z = 0.
struct ManufacturedSolution {
  int dim = 2;
  std::function<double(const Vec3&)> u;
  std::function<Vec3(const Vec3&)> grad_u;
  std::function<double(const Vec3&)> f;
};

ManufacturedSolution manufactured(int dim);

/// Affine field used by the patch test: u = c0 + c.x, f = 0.
ManufacturedSolution affine_solution(int dim, double c0, const Vec3& c);

}  // namespace agfem
