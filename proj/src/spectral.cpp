#include "agfem/spectral.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <random>

namespace agfem {

SolveReport solve_cg(const CsrMatrix& A, std::span<const double> b, double rtol,
                     std::int64_t maxit, Precond precond, Exec exec) {
  const std::int64_t n = A.n;
  assert(std::int64_t(b.size()) == n);
  if (maxit < 0) maxit = 10 * n;
  SolveReport rep;
  rep.x.assign(std::size_t(n), 0.0);
  if (n == 0) {
    rep.converged = true;
    return rep;
  }

  std::vector<double> invdiag;
  if (precond == Precond::Jacobi) {
    invdiag = A.diagonal();
    for (auto& d : invdiag) d = d != 0.0 ? 1.0 / d : 1.0;
  }

  std::vector<double> r(b.begin(), b.end());
  std::vector<double> z(static_cast<std::size_t>(n)), p(static_cast<std::size_t>(n)), Ap(static_cast<std::size_t>(n));
  const double bnorm = norm_vec(b, exec);
  if (bnorm == 0.0) {
    rep.converged = true;
    return rep;
  }

  auto apply_precond = [&](const std::vector<double>& in, std::vector<double>& out) {
    if (precond == Precond::Jacobi) {
      for (std::int64_t i = 0; i < n; ++i)
        out[std::size_t(i)] = invdiag[std::size_t(i)] * in[std::size_t(i)];
    } else {
      out = in;
    }
  };

  apply_precond(r, z);
  p = z;
  double rz = dot_vec(r, z, exec);
  std::int64_t it = 0;
  double stall_best = std::numeric_limits<double>::infinity();
  std::int64_t stall_count = 0;
  for (; it < maxit; ++it) {
    const double rn = norm_vec(r, exec);
    if (rn <= rtol * bnorm) break;
    // stall guard: CG residuals plateau and oscillate on ill-conditioned
    // systems, so only give up after a long stretch without a new best
    if (rn < stall_best * (1.0 - 1e-12)) {
      stall_best = rn;
      stall_count = 0;
    } else if (++stall_count > 2000) {
      break;
    }
    A.multiply(p, Ap, exec);
    const double pAp = dot_vec(p, Ap, exec);
    if (!(pAp > 0.0) || !std::isfinite(pAp)) break;  // not SPD / breakdown
    const double alpha = rz / pAp;
    for (std::int64_t i = 0; i < n; ++i) {
      rep.x[std::size_t(i)] += alpha * p[std::size_t(i)];
      r[std::size_t(i)] -= alpha * Ap[std::size_t(i)];
    }
    apply_precond(r, z);
    const double rz_new = dot_vec(r, z, exec);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::int64_t i = 0; i < n; ++i)
      p[std::size_t(i)] = z[std::size_t(i)] + beta * p[std::size_t(i)];
  }
  rep.iterations = int(it);

  A.multiply(rep.x, Ap, exec);
  double tr = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double d = b[std::size_t(i)] - Ap[std::size_t(i)];
    tr += d * d;
  }
  rep.rel_residual = std::sqrt(tr) / bnorm;
  rep.converged = std::isfinite(rep.rel_residual) && rep.rel_residual <= rtol;
  return rep;
}

LanczosHistory lanczos_extremes(
    const std::function<bool(std::span<const double>, std::span<double>)>& apply, std::int64_t n,
    int max_iterations, double tol, std::uint64_t seed, bool settle_max_only) {
  LanczosHistory hist;
  if (n == 0) return hist;
  const int kmax = int(std::min<std::int64_t>(max_iterations, n));

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<std::vector<double>> V;
  std::vector<double> alpha, beta;
  std::vector<double> v(static_cast<std::size_t>(n)), w(static_cast<std::size_t>(n));
  for (auto& x : v) x = unif(rng);
  double nv = norm_vec(v);
  for (auto& x : v) x /= nv;
  V.push_back(v);

  for (int k = 0; k < kmax; ++k) {
    if (!apply(V[std::size_t(k)], w)) {
      hist.operator_failed = true;
      break;
    }
    double a = dot_vec(w, V[std::size_t(k)]);
    alpha.push_back(a);
    for (std::int64_t i = 0; i < n; ++i)
      w[std::size_t(i)] -= a * V[std::size_t(k)][std::size_t(i)] +
                           (k > 0 ? beta[std::size_t(k - 1)] * V[std::size_t(k - 1)][std::size_t(i)]
                                  : 0.0);
    // full reorthogonalization (twice is enough)
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& u : V) {
        const double c = dot_vec(w, u);
        for (std::int64_t i = 0; i < n; ++i) w[std::size_t(i)] -= c * u[std::size_t(i)];
      }

    const auto ev = tridiag_eigenvalues(alpha, beta);
    hist.ritz_max.push_back(ev.back());
    hist.ritz_min.push_back(ev.front());
    hist.iterations = k + 1;

    const double b = norm_vec(w);
    const std::size_t m = hist.ritz_max.size();
    // settle when the end(s) of interest stalled over three iterations
    auto settled = [&](const std::vector<double>& r) {
      if (m < 4) return false;
      const double scale = std::max(std::abs(r[m - 1]), 1e-300);
      return std::abs(r[m - 1] - r[m - 2]) <= tol * scale &&
             std::abs(r[m - 1] - r[m - 3]) <= 3.0 * tol * scale;
    };
    const bool ends_settled =
        settled(hist.ritz_max) && (settle_max_only || settled(hist.ritz_min));
    if (b <= 1e-14 * std::abs(hist.ritz_max.back()) || (k + 1 >= 12 && ends_settled)) break;
    if (k + 1 == kmax) break;
    beta.push_back(b);
    for (std::int64_t i = 0; i < n; ++i) w[std::size_t(i)] /= b;
    V.push_back(w);
  }
  return hist;
}

CondEstimate cond_estimate(const CsrMatrix& A, const CondOptions& opts) {
  if (A.n == 0) throw InputError("cond_estimate: empty matrix");
  CondEstimate est;

  auto direct = [&](std::span<const double> x, std::span<double> y) {
    A.multiply(x, y, opts.exec);
    return true;
  };
  const auto fwd =
      lanczos_extremes(direct, A.n, opts.max_iterations, opts.tol, opts.seed, true);
  est.lambda_max = fwd.ritz_max.empty() ? 0.0 : fwd.ritz_max.back();
  est.lanczos_iterations = fwd.iterations;
  // min Ritz value of A overestimates lambda_min -> kappa lower bound fallback
  const double lam_min_ub = fwd.ritz_min.empty() ? est.lambda_max : fwd.ritz_min.back();

  auto inverse = [&](std::span<const double> x, std::span<double> y) {
    const auto rep = solve_cg(A, x, opts.inner_rtol, -1, Precond::Jacobi, opts.exec);
    // a slightly missed tolerance is still plenty for a 1e-3 eigenvalue target
    if (!std::isfinite(rep.rel_residual) || rep.rel_residual > 10.0 * opts.inner_rtol)
      return false;
    std::copy(rep.x.begin(), rep.x.end(), y.begin());
    return true;
  };
  const auto inv = lanczos_extremes(inverse, A.n, opts.max_iterations, opts.tol,
                                    opts.seed ^ 0x9e3779b9ULL, true);
  // a long converged prefix is usable even if a later inner solve gave up
  const bool inner_failed = inv.ritz_max.empty() || !(inv.ritz_max.back() > 0.0) ||
                            (inv.operator_failed && inv.iterations < 12);

  if (!inner_failed) {
    est.lambda_min = 1.0 / inv.ritz_max.back();
    est.method = "lanczos";
    est.lanczos_iterations += inv.iterations;
  } else {
    // inverse iteration unusable (system near-intractable): report a lower
    // bound from a direct Lanczos pushed until the small end settles too;
    // for modest n this is a full tridiagonalization and essentially exact
    const auto deep = lanczos_extremes(direct, A.n, std::max(opts.max_iterations, 400), opts.tol,
                                       opts.seed ^ 0xdeadbeefULL, false);
    est.lambda_min = deep.ritz_min.empty() ? lam_min_ub
                                           : std::min(lam_min_ub, deep.ritz_min.back());
    est.method = "lanczos+lower_bound";
    est.lower_bound_only = true;
    est.lanczos_iterations += deep.iterations;
  }
  est.kappa = est.lambda_min > 0.0 ? est.lambda_max / est.lambda_min
                                   : std::numeric_limits<double>::infinity();
  if (est.kappa < 1.0) est.kappa = 1.0;
  return est;
}

}  // namespace agfem
