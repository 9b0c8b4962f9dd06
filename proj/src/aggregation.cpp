#include "agfem/aggregation.hpp"

#include <cassert>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace agfem {

AggregateMap aggregate_cells(BackgroundMesh& mesh, const LevelSetGeometry& geom,
                             double eta_threshold, int q_for_eta, int subdiv) {
  assert(mesh.classified);
  const std::int64_t nc = mesh.num_cells();
  AggregateMap map;
  map.root_of.assign(std::size_t(nc), -1);
  map.members.assign(std::size_t(nc), {});

  std::vector<std::uint8_t> touched(std::size_t(nc), 0);
  std::vector<std::int64_t> untouched;
  for (std::int64_t c = 0; c < nc; ++c) {
    if (mesh.klass(c) == CellClass::Interior) {
      touched[std::size_t(c)] = 1;
      map.root_of[std::size_t(c)] = c;
    } else if (mesh.klass(c) == CellClass::Cut) {
      untouched.push_back(c);
    }
  }

  // seeding variant: large-eta cut cells start touched, rooted at themselves
  // until the final merge pass
  std::vector<std::int64_t> seeds;
  if (eta_threshold < 1.0) {
    for (const auto c : untouched) {
      if (eta(mesh, geom, c, q_for_eta, subdiv) > eta_threshold) {
        touched[std::size_t(c)] = 1;
        map.root_of[std::size_t(c)] = c;
        seeds.push_back(c);
      }
    }
    std::erase_if(untouched, [&](std::int64_t c) { return touched[std::size_t(c)] != 0; });
  }

  while (!untouched.empty()) {
    // Jacobi-style sweep against the previous touched state
    std::vector<std::pair<std::int64_t, std::int64_t>> assigned;  // (cell, root)
    for (const auto c : untouched) {
      std::int64_t best_root = -1, best_nb = -1;
      double best_dist = std::numeric_limits<double>::infinity();
      for (const auto& [nb, facet] : facet_neighbors(mesh, c)) {
        if (!touched[std::size_t(nb)]) continue;
        if (!facet_cut_by_domain(mesh, facet)) continue;
        const std::int64_t r = map.root_of[std::size_t(nb)];
        const Vec3 d = mesh.cell_center(c) - mesh.cell_center(r);
        const double dist = norm(d);
        if (dist < best_dist || (dist == best_dist && nb < best_nb)) {
          best_dist = dist;
          best_root = r;
          best_nb = nb;
        }
      }
      if (best_root >= 0) assigned.push_back({c, best_root});
    }
    if (assigned.empty()) break;
    ++map.iterations_used;
    for (const auto& [c, r] : assigned) {
      touched[std::size_t(c)] = 1;
      map.root_of[std::size_t(c)] = r;
    }
    std::erase_if(untouched, [&](std::int64_t c) { return touched[std::size_t(c)] != 0; });
  }

  // merge seed pseudo-aggregates into the nearest interior-rooted aggregate
  if (!seeds.empty()) {
    std::vector<std::int64_t> interior;
    for (std::int64_t c = 0; c < nc; ++c)
      if (mesh.klass(c) == CellClass::Interior) interior.push_back(c);
    for (const auto s : seeds) {
      std::int64_t best = -1;
      double best_dist = std::numeric_limits<double>::infinity();
      for (const auto ic : interior) {
        const double d = norm(mesh.cell_center(s) - mesh.cell_center(ic));
        if (d < best_dist || (d == best_dist && ic < best)) {
          best_dist = d;
          best = ic;
        }
      }
      for (std::int64_t c = 0; c < nc; ++c)
        if (map.root_of[std::size_t(c)] == s) map.root_of[std::size_t(c)] = best;
    }
  }

  // cells never reached violate the facet-path property and are removed
  for (const auto c : untouched) {
    map.discarded_cells.push_back(c);
    map.root_of[std::size_t(c)] = -1;
    mesh.cell_class[std::size_t(c)] = CellClass::Exterior;
  }
  if (!map.discarded_cells.empty())
    std::fprintf(stderr, "[agfem] aggregation discarded %zu unreachable cut cell(s)\n",
                 map.discarded_cells.size());

  for (std::int64_t c = 0; c < nc; ++c)
    if (map.root_of[std::size_t(c)] >= 0)
      map.members[std::size_t(map.root_of[std::size_t(c)])].push_back(c);
  return map;
}

namespace {

template <class Reduce>
double aggregate_bbox_measure(const AggregateMap& map, const BackgroundMesh& mesh,
                              const Reduce& reduce) {
  double best = 0.0;
  for (std::int64_t r = 0; r < std::int64_t(map.members.size()); ++r) {
    const auto& cells = map.members[std::size_t(r)];
    if (cells.empty()) continue;
    Vec3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
    for (const auto c : cells) {
      const Vec3 clo = mesh.cell_lo(c);
      for (int a = 0; a < mesh.dim; ++a) {
        lo[std::size_t(a)] = std::min(lo[std::size_t(a)], clo[std::size_t(a)]);
        hi[std::size_t(a)] = std::max(hi[std::size_t(a)], clo[std::size_t(a)] + mesh.h[std::size_t(a)]);
      }
    }
    Vec3 ext{0, 0, 0};
    for (int a = 0; a < mesh.dim; ++a) ext[std::size_t(a)] = hi[std::size_t(a)] - lo[std::size_t(a)];
    best = std::max(best, reduce(ext, mesh.dim));
  }
  return best;
}

}  // namespace

double max_aggregate_size(const AggregateMap& map, const BackgroundMesh& mesh) {
  return aggregate_bbox_measure(map, mesh, [](const Vec3& e, int dim) {
    double d2 = 0.0;
    for (int a = 0; a < dim; ++a) d2 += e[std::size_t(a)] * e[std::size_t(a)];
    return std::sqrt(d2);
  });
}

double max_aggregate_extent(const AggregateMap& map, const BackgroundMesh& mesh) {
  return aggregate_bbox_measure(map, mesh, [](const Vec3& e, int dim) {
    double m = 0.0;
    for (int a = 0; a < dim; ++a) m = std::max(m, e[std::size_t(a)]);
    return m;
  });
}

void write_aggregates_csv(const AggregateMap& map, const BackgroundMesh& mesh,
                          const std::string& path) {
  std::ofstream f(path);
  if (!f) throw InputError("cannot write " + path);
  f << "cell_id,root_id\n";
  for (std::int64_t c = 0; c < mesh.num_cells(); ++c)
    if (map.root_of[std::size_t(c)] >= 0) f << c << "," << map.root_of[std::size_t(c)] << "\n";
}

}  // namespace agfem
