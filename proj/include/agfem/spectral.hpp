#pragma once

#include <functional>
#include <string>
#include <vector>

#include "agfem/linalg.hpp"

namespace agfem {

enum class Precond { None, Jacobi };

struct SolveReport {
  std::vector<double> x;
  int iterations = 0;
  double rel_residual = 0.0;  // true residual, recomputed at exit
  bool converged = false;
};

/// Conjugate gradients on a symmetric (positive definite) system.
/// maxit < 0 selects the default 10 n.
SolveReport solve_cg(const CsrMatrix& A, std::span<const double> b, double rtol = 1e-12,
                     std::int64_t maxit = -1, Precond precond = Precond::Jacobi,
                     Exec exec = Exec::Serial);

struct CondEstimate {
  double lambda_max = 0.0;
  double lambda_min = 0.0;
  double kappa = 1.0;
  std::string method;      // "lanczos" or "lanczos+lower_bound"
  int lanczos_iterations = 0;
  bool lower_bound_only = false;  // inner solves failed; kappa is a lower bound
};

struct CondOptions {
  int max_iterations = 200;
  double tol = 1e-5;          // relative Ritz stagnation
  double inner_rtol = 1e-10;  // CG tolerance for the A^{-1} action
  std::uint64_t seed = 0x5eedULL;
  Exec exec = Exec::Serial;
};

/// 2-norm condition number estimate: lambda_max by Lanczos with full
/// reorthogonalization, lambda_min by Lanczos on the A^{-1} action realized
/// with inner (Jacobi-preconditioned) CG solves. If the inner solves fail the
/// estimate degrades to a flagged lower bound built from the direct Lanczos
/// tridiagonal.
CondEstimate cond_estimate(const CsrMatrix& A, const CondOptions& opts = {});

/// Lanczos with full reorthogonalization on a generic operator; returns the
/// per-iteration extreme Ritz values (used by cond_estimate and the tests).
struct LanczosHistory {
  std::vector<double> ritz_max;  // after k+1 iterations
  std::vector<double> ritz_min;
  int iterations = 0;
  bool operator_failed = false;
};

LanczosHistory lanczos_extremes(
    const std::function<bool(std::span<const double>, std::span<double>)>& apply, std::int64_t n,
    int max_iterations, double tol, std::uint64_t seed, bool settle_max_only = false);

}  // namespace agfem
