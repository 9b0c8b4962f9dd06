#pragma once

#include <string>
#include <vector>

#include "agfem/mesh.hpp"

namespace agfem {

/// Result of the cell aggregation scheme: every non-discarded cut cell is
/// assigned to exactly one aggregate rooted at an interior cell; interior
/// cells root themselves.
struct AggregateMap {
  std::vector<std::int64_t> root_of;            // per cell, -1 for exterior/discarded
  std::vector<std::vector<std::int64_t>> members;  // per root cell id (sparse: empty elsewhere)
  std::vector<std::int64_t> discarded_cells;    // cut cells unreachable through cut facets
  int iterations_used = 0;

  std::int64_t root(std::int64_t cell) const { return root_of[std::size_t(cell)]; }
  std::size_t aggregate_size(std::int64_t root_cell) const {
    return members[std::size_t(root_cell)].size();
  }
};

/// Cell aggregation scheme. Sweeps are step-synchronous (each iteration reads
/// the touched state of the previous one, so the result is independent of the
/// cell visiting order); a cut cell joins the neighbor whose aggregate root
/// has the smallest cell-center distance, ties broken by the smaller neighbor
/// id. Cut cells never reached are discarded and reclassified Exterior.
/// With eta_threshold < 1, cut cells with eta > threshold start touched
/// (experimental seeding variant) and are merged into the nearest
/// interior-rooted aggregate in a final pass.
AggregateMap aggregate_cells(BackgroundMesh& mesh, const LevelSetGeometry& geom,
                             double eta_threshold = 1.0, int q_for_eta = 1, int subdiv = 0);

/// Max over aggregates of the bounding-box diagonal of the member-cell union.
double max_aggregate_size(const AggregateMap& map, const BackgroundMesh& mesh);

/// Max over aggregates of the largest bounding-box axis extent (the measure
/// whose ratio to h tends to 2 in 2D and 3 in 3D on the benchmarks).
double max_aggregate_extent(const AggregateMap& map, const BackgroundMesh& mesh);

void write_aggregates_csv(const AggregateMap& map, const BackgroundMesh& mesh,
                          const std::string& path);

}  // namespace agfem
