#include "agfem/geometry.hpp"

#include <cmath>
#include <memory>

namespace agfem {

namespace {

std::optional<double> find_root(const LevelSetGeometry& g, const Vec3& a, const Vec3& b,
                                double eps) {
  const double pa = g.psi(a);
  const double pb = g.psi(b);
  if (pa == 0.0 && pb == 0.0) return std::nullopt;  // edge lies on the boundary
  if (pa == 0.0) return 0.0;
  if (pb == 0.0) return 1.0;
  if ((pa < 0.0) == (pb < 0.0)) return std::nullopt;

  auto f = [&](double t) { return g.psi(a + t * (b - a)); };

  // Bisection down to an interval of width 1e-13 keeps the parameter accurate
  // to well below the 1e-12 contract even if the secant polish stalls.
  double lo = 0.0, hi = 1.0, flo = pa;
  for (int it = 0; it < 44; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0) { lo = hi = mid; break; }
    if ((flo < 0.0) == (fm < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  double t = 0.5 * (lo + hi);

  // Secant polish inside the bracket.
  double t0 = lo, t1 = hi, f0 = f(lo), f1 = f(hi);
  for (int it = 0; it < 8 && f1 != f0; ++it) {
    const double tn = t1 - f1 * (t1 - t0) / (f1 - f0);
    if (!(tn > 0.0 && tn < 1.0)) break;
    t0 = t1;
    f0 = f1;
    t1 = tn;
    f1 = f(tn);
    if (f1 == 0.0) break;
  }
  if (std::abs(f1) < std::abs(f(t))) t = t1;

  if (t < eps) return 0.0;
  if (t > 1.0 - eps) return 1.0;
  return t;
}

}  // namespace

std::optional<double> edge_intersection(const LevelSetGeometry& g, const Vec3& a, const Vec3& b) {
  return find_root(g, a, b, g.snap_eps);
}

std::optional<double> edge_intersection(const LevelSetGeometry& g, const Vec3& a, const Vec3& b,
                                        double eps) {
  return find_root(g, a, b, eps);
}

namespace {

constexpr double kBaseRadius = 0.25;   // circle / sphere at scale 1
constexpr double kPopcornFit = 0.5;    // natural popcorn coords -> unit box

// Popcorn flake in natural coordinates: sphere of radius r0 with 12 Gaussian
// bumps (constants documented in the README).
struct Popcorn {
  double r0 = 0.6, amp = 2.0, sigma = 0.2;
  std::array<Vec3, 12> centers;

  Popcorn() {
    const double pi = std::acos(-1.0);
    const double rr = r0 / std::sqrt(5.0);
    for (int k = 0; k < 5; ++k) {
      const double a = 2.0 * k * pi / 5.0;
      centers[k] = {rr * 2.0 * std::cos(a), rr * 2.0 * std::sin(a), rr};
    }
    for (int k = 0; k < 5; ++k) {
      const double a = (2.0 * k - 1.0) * pi / 5.0;
      centers[5 + k] = {rr * 2.0 * std::cos(a), rr * 2.0 * std::sin(a), -rr};
    }
    centers[10] = {0.0, 0.0, r0};
    centers[11] = {0.0, 0.0, -r0};
  }

  double value(const Vec3& x) const {
    double v = norm(x) - r0;
    for (const auto& c : centers) {
      const Vec3 d = x - c;
      v -= amp * std::exp(-dot(d, d) / (sigma * sigma));
    }
    return v;
  }

  Vec3 grad(const Vec3& x) const {
    const double r = norm(x);
    Vec3 gr = r > 0.0 ? (1.0 / r) * x : Vec3{0.0, 0.0, 0.0};
    for (const auto& c : centers) {
      const Vec3 d = x - c;
      const double e = amp * std::exp(-dot(d, d) / (sigma * sigma));
      gr = gr + (2.0 * e / (sigma * sigma)) * d;
    }
    return gr;
  }
};

Vec3 diagonal_center(int dim, double ell) {
  if (ell < 0.0) ell = 0.5 * std::sqrt(double(dim));  // box center
  const double c = ell / std::sqrt(double(dim));
  return dim == 2 ? Vec3{c, c, 0.0} : Vec3{c, c, c};
}

}  // namespace

double shape_radius(const std::string& name, double scale) {
  if (name == "circle" || name == "sphere") return kBaseRadius * scale;
  if (name == "popcorn") {
    static const Popcorn pc;
    // natural tip radius: r = r0 + bump, solved once by sampling rays
    double rmax = 0.0;
    for (const auto& c : pc.centers) {
      const double rc = norm(c);
      for (double r = rc; r < 2.0; r += 1e-3) {
        const Vec3 x = (r / rc) * c;
        if (pc.value(x) > 0.0) { rmax = std::max(rmax, r); break; }
      }
    }
    return rmax * kPopcornFit * scale;
  }
  throw InputError("unknown shape: " + name);
}

LevelSetGeometry builtin_shapes(const std::string& name, double scale, double ell) {
  LevelSetGeometry g;
  g.name = name;
  if (name == "circle" || name == "sphere") {
    g.dim = (name == "circle") ? 2 : 3;
    const Vec3 c = diagonal_center(g.dim, ell);
    const double r = kBaseRadius * scale;
    g.psi = [c, r](const Vec3& x) { return norm(x - c) - r; };
    g.grad_psi = [c](const Vec3& x) {
      const Vec3 d = x - c;
      const double n = norm(d);
      return n > 0.0 ? (1.0 / n) * d : Vec3{1.0, 0.0, 0.0};
    };
  } else if (name == "popcorn") {
    g.dim = 3;
    const Vec3 c = diagonal_center(3, ell);
    const double s = kPopcornFit * scale;
    auto pc = std::make_shared<Popcorn>();
    g.psi = [c, s, pc](const Vec3& x) { return s * pc->value((1.0 / s) * (x - c)); };
    g.grad_psi = [c, s, pc](const Vec3& x) { return pc->grad((1.0 / s) * (x - c)); };
  } else {
    throw InputError("unknown shape: " + name);
  }
  g.snap_eps = default_snap_eps(g.dim);
  return g;
}

ManufacturedSolution manufactured(int dim) {
  if (dim != 2 && dim != 3) throw InputError("manufactured: dim must be 2 or 3");
  ManufacturedSolution ms;
  ms.dim = dim;
  const double fourpi = 4.0 * std::acos(-1.0);
  auto rho = [](const Vec3& x) {
    return std::sqrt((x[0] - 2.3) * (x[0] - 2.3) + x[1] * x[1] + x[2] * x[2]);
  };
  ms.u = [rho, fourpi](const Vec3& x) { return std::sin(fourpi * rho(x)); };
  ms.grad_u = [rho, fourpi](const Vec3& x) {
    const double r = rho(x);
    const double s = fourpi * std::cos(fourpi * r) / r;
    return Vec3{s * (x[0] - 2.3), s * x[1], s * x[2]};
  };
  // radial laplacian: u'' + (d-1)/rho u'
  ms.f = [rho, fourpi, dim](const Vec3& x) {
    const double r = rho(x);
    return fourpi * fourpi * std::sin(fourpi * r) -
           double(dim - 1) * fourpi * std::cos(fourpi * r) / r;
  };
  return ms;
}

ManufacturedSolution affine_solution(int dim, double c0, const Vec3& c) {
  ManufacturedSolution ms;
  ms.dim = dim;
  Vec3 cc = c;
  if (dim == 2) cc[2] = 0.0;
  ms.u = [c0, cc](const Vec3& x) { return c0 + dot(cc, x); };
  ms.grad_u = [cc](const Vec3&) { return cc; };
  ms.f = [](const Vec3&) { return 0.0; };
  return ms;
}

}  // namespace agfem
