#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "agfem/aggregation.hpp"
#include "agfem/assembly.hpp"
#include "agfem/error_norms.hpp"
#include "agfem/spectral.hpp"

namespace agfem {

/// One experiment setup; every field has a CLI/config counterpart and a
/// default matching the reference benchmarks (see README).
struct RunConfig {
  int dim = 2;
  std::string shape;              // empty -> circle (2D) / popcorn (3D)
  int q = 1;
  std::string flavor = "aggregated";  // or "standard"
  int m = 5;                      // cells per axis = 2^m
  double beta = 100.0;
  double eps = -1.0;              // < 0 -> 1e-6 (2D), 1e-3 (3D)
  int subdiv = -1;                // < 0 -> 0 (q=1), 2 (q>=2)
  double scale = -1.0;            // < 0 -> experiment default
  int samples = 200;              // moving-domain sweep size
  int m_min = 3;
  int m_max = -1;                 // < 0 -> 9 (2D), 6 (3D)
  bool est_kappa = true;
  bool est_kappa_mass = false;
  int threads = 0;                // 0 -> OpenMP default
  bool serial = false;            // force the serial reference kernels
  std::string out = ".";
  double eta0 = 1.0;
  std::uint64_t seed = 0x5eed2024ULL;
  bool vtk = false;
  std::string dump_quadrature;    // CSV point-cloud path (validate)
  std::string dump_aggregates;    // CSV aggregate-map path (validate)
  int corrupt_constraint_row = -1;  // validation negative-control hook

  Exec exec() const { return serial ? Exec::Serial : Exec::Parallel; }
  std::string shape_or_default() const {
    return shape.empty() ? (dim == 3 ? std::string("popcorn") : std::string("circle")) : shape;
  }
  double eps_or_default() const { return eps >= 0.0 ? eps : default_snap_eps(dim); }
  int subdiv_or_default() const { return subdiv >= 0 ? subdiv : default_subdiv(q); }
  int m_max_or_default() const { return m_max >= 0 ? m_max : (dim == 3 ? 6 : 9); }
};

RunConfig parse_config_file(const std::string& path);
void apply_config_kv(RunConfig& cfg, const std::string& key, const std::string& value);

struct MovingRow {
  double ell = 0.0;
  double kappa = 0.0;
  double energy_error = 0.0;
  bool solved = false;
  double kappa_mass = 0.0;  // only when est_kappa_mass; not part of the CSV
};

struct MovingResult {
  std::vector<MovingRow> rows;
  std::string csv_path;
};

/// Moving-domain sweep: the body (scaled 0.25 by default) travels along the
/// box diagonal; one CSV row per sample (header l,kappa_A,energy_error,solved).
MovingResult run_moving_domain(const RunConfig& cfg);

struct ConvRow {
  double h = 0.0;
  std::int64_t dofs = 0;
  double kappa = 0.0;
  double energy_error = 0.0;
  double l2_error = 0.0;
  double max_aggr_ratio = 0.0;
  bool solved = false;
  double kappa_mass = 0.0;  // not part of the CSV
};

struct ConvResult {
  std::vector<ConvRow> rows;
  double slope_kappa = 0.0;
  double slope_energy = 0.0;
  double slope_l2 = 0.0;
  std::string csv_path;
};

/// Mesh refinement study m = m_min..m_max (header
/// h,dofs,kappa_A,energy_error,l2_error,max_aggr_ratio, slope footer row).
ConvResult run_convergence(const RunConfig& cfg);

/// Validation utility: measure checks, patch test, partition of unity,
/// extension-norm bound, constraint row sums. Returns 0 on success.
int run_validate(const RunConfig& cfg);

/// Legacy ASCII VTK export of the cut triangulation with point data "u" and
/// cell data "class" / "root_id".
void export_vtk(const BackgroundMesh& mesh, const LevelSetGeometry& geom, const FESpace& act,
                const AggregateMap* agg, std::span<const double> u_act, int subdiv,
                const std::string& path);

/// Least-squares slope of log(y) against log(x); the first `skip` entries
/// (coarsest meshes) are excluded.
double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y, int skip);

/// Convention used for the CSV footer: skip 2 coarsest when >= 5 rows,
/// 1 when 4 rows, none otherwise.
int slope_skip_rows(std::size_t rows);

}  // namespace agfem
