#pragma once

#include <functional>
#include <optional>

#include "agfem/fespace.hpp"
#include "agfem/linalg.hpp"
#include "agfem/quadrature.hpp"

namespace agfem {

enum class SystemFlavor { Standard, Aggregated };

enum class TauRule { FixedBetaOverH, LocalEigenvalue };

struct NitscheParams {
  double beta = 100.0;
  TauRule rule = TauRule::FixedBetaOverH;
};

/// Problem data for the Poisson model: source f, Dirichlet value g_D and an
/// optional Neumann pair (predicate + value). Every interface portion not
/// claimed by the predicate is Dirichlet; the experiments are pure-Dirichlet.
struct PoissonData {
  std::function<double(const Vec3&)> f;
  std::function<double(const Vec3&)> g_dirichlet;
  std::function<bool(const Vec3&)> is_neumann;     // optional
  std::function<double(const Vec3&)> g_neumann;    // optional
};

struct SparseSystem {
  CsrMatrix A;
  std::vector<double> b;
  SystemFlavor flavor = SystemFlavor::Aggregated;
  NitscheParams tau_rule;
};

struct AssemblyInput {
  const BackgroundMesh* mesh = nullptr;
  const LevelSetGeometry* geom = nullptr;
  const FESpace* active = nullptr;
  const ConstraintSet* constraints = nullptr;  // required for Aggregated
  int q = 1;
  int subdiv = 0;
  NitscheParams params;
  SystemFlavor flavor = SystemFlavor::Aggregated;
  /// Impose Nitsche Dirichlet conditions on box-boundary facets of active
  /// cells (needed when Omega is clipped by the artificial box).
  bool nitsche_on_box = false;
  Exec exec = Exec::Serial;
};

/// Nitsche-stabilized Poisson stiffness matrix and right-hand side. For the
/// aggregated flavor every element block is transformed E_K^T A_K E_K inside
/// the cell loop before scattering.
SparseSystem assemble_stiffness(const AssemblyInput& in, const PoissonData& data);

/// Mass matrix over the (discretized) physical domain.
CsrMatrix assemble_mass(const AssemblyInput& in);

/// Largest eigenvalue of the local coercivity eigenproblem
/// B_K u = lambda D_K u on a cut cell (diagnostic for the standard space).
/// Interior cells return 0; sliver cells with vanishing D_K return +inf.
double local_nitsche_constant(const BackgroundMesh& mesh, const LevelSetGeometry& geom,
                              std::int64_t cell, int q, int subdiv);

}  // namespace agfem
