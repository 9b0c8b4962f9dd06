#pragma once

#include "agfem/assembly.hpp"

namespace agfem {

struct ErrorReport {
  double energy_error = 0.0;  // || grad(u - u_h) ||_L2(Omega)
  double l2_error = 0.0;      // || u - u_h ||_L2(Omega)
  double h = 0.0;
  int q = 1;
  std::int64_t dofs = 0;
};

/// Discretization errors against an exact solution, integrated on the same
/// cut quadrature as the assembly but one Gauss degree higher. For the
/// aggregated flavor the coefficients are the interior vector and are
/// extended before evaluation.
ErrorReport compute_errors(const AssemblyInput& in, std::span<const double> coeffs,
                           const ManufacturedSolution& exact);

}  // namespace agfem
