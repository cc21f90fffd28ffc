#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <vector>

#include <json.hpp>

#include "recomed/graph.hpp"

namespace recomed {

struct OutlierSet {
  std::set<MedId> med_ids;
  double eps = 0.0;
  std::size_t min_pts = 0;

  bool operator==(const OutlierSet&) const = default;
};

/// Community assignment. Community ids are dense from 0 and numbered in
/// order of each community's smallest member.
struct Partition {
  std::map<MedId, std::size_t> assignment;
  std::vector<std::vector<MedId>> communities;  // members sorted

  // Canonicalizes arbitrary labels.
  static Partition from_labels(const std::map<MedId, std::size_t>& labels);

  bool operator==(const Partition&) const = default;
};

// Slack added to eps when comparing 1 - weight, so that eps = 0.7 admits a
// Jaccard weight of exactly 0.3 despite rounding in the subtraction.
inline constexpr double kDistanceTolerance = 1e-12;

/// DBSCAN noise labels on the similarity graph. Distance between adjacent
/// nodes is 1 - weight; non-adjacent nodes are infinitely far apart. A node
/// is noise iff it is not core (fewer than min_pts neighbours within eps,
/// itself included) and has no core neighbour within eps.
OutlierSet dbscan_outliers(const SimGraph& g, double eps, std::size_t min_pts);

struct LouvainOptions {
  double resolution = 1.0;
  std::uint64_t seed = 0;
  bool trace = false;  // record incremental vs recomputed modularity per pass
};

struct LouvainPass {
  std::size_t level = 0;
  double incremental = 0.0;
  double recomputed = 0.0;
};

struct LouvainResult {
  Partition partition;
  double modularity = 0.0;
  std::size_t levels = 0;
  std::vector<LouvainPass> trace;
};

/// Two-phase Louvain on the weighted graph with `exclude` removed. Nodes are
/// visited in a seeded shuffled order; equal gains go to the lowest community
/// id. A graph without edge weight yields singletons.
LouvainResult louvain_detailed(const SimGraph& g, const OutlierSet& exclude, const LouvainOptions& options);
Partition louvain(const SimGraph& g, const OutlierSet& exclude, double resolution, std::uint64_t seed);

/// Q = sum_c [ W_c / W - resolution * (S_c / 2W)^2 ]. Edges touching excluded
/// nodes are ignored; every other node must be in the partition.
double modularity(const SimGraph& g, const Partition& p, double resolution, const std::set<MedId>& excluded = {});

nlohmann::json partition_to_json(const Partition& p);
Partition partition_from_json(const nlohmann::json& doc);

}  // namespace recomed
