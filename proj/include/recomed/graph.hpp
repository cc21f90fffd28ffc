#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "recomed/ingest.hpp"
#include "recomed/jenks.hpp"

namespace recomed {

using NodePair = std::pair<MedId, MedId>;  // always first < second

inline NodePair make_pair_key(MedId a, MedId b) { return a < b ? NodePair{a, b} : NodePair{b, a}; }

/// Co-occurrence graph: node -> prescription frequency, edge -> number of
/// prescriptions containing both endpoints.
struct CoGraph {
  std::map<MedId, std::uint64_t> nodes;
  std::map<NodePair, std::uint64_t> edges;

  // Node frequencies in node order; this is the input jenks_breaks expects
  // for select_stop_medicines.
  std::vector<double> frequency_values() const;

  bool operator==(const CoGraph&) const = default;
};

CoGraph build_cooccurrence_graph(const TransactionDB& db);

struct StopOverrides {
  std::set<MedId> forced_in;
  std::set<MedId> forced_out;

  bool operator==(const StopOverrides&) const = default;
};

struct StopList {
  std::set<MedId> med_ids;
  std::vector<std::size_t> source_classes;
  StopOverrides overrides;

  bool operator==(const StopList&) const = default;
};

/// Stop medicines are the members of the top stop_class_count frequency
/// classes, plus forced_in, minus forced_out. `cls` must classify
/// graph.frequency_values().
StopList select_stop_medicines(const CoGraph& graph, const JenksClassification& cls,
                               std::size_t stop_class_count, const StopOverrides& overrides = {});

struct PruneReport {
  std::size_t nodes_before = 0;
  std::size_t nodes_after = 0;
  std::size_t edges_before = 0;
  std::size_t edges_after = 0;
  std::vector<MedId> removed;
  std::size_t isolated_after = 0;  // surviving nodes left without edges

  bool operator==(const PruneReport&) const = default;
};

struct PruneResult {
  CoGraph graph;
  PruneReport report;
};

PruneResult prune_graph(const CoGraph& graph, const StopList& stop);

/// |Pa ∩ Pb| / |Pa ∪ Pb| kept as integers.
struct JaccardRatio {
  std::uint64_t intersection = 0;
  std::uint64_t union_size = 0;

  double value() const {
    return union_size == 0 ? 0.0 : static_cast<double>(intersection) / static_cast<double>(union_size);
  }
};

JaccardRatio jaccard_similarity(const TransactionDB& db, MedId a, MedId b);

struct SimGraph {
  std::vector<MedId> nodes;             // sorted
  std::map<NodePair, double> edges;     // Jaccard weight in (0, 1]

  double weight(MedId a, MedId b) const;
  bool operator==(const SimGraph&) const = default;
};

/// Keeps each co-occurring pair of the pruned graph whose Jaccard coefficient
/// is at least min_jaccard. Isolated nodes stay in the node set.
SimGraph rebuild_jaccard_graph(const TransactionDB& db, const CoGraph& pruned, double min_jaccard);

// "u v weight" per line.
void write_edge_list(std::ostream& out, const CoGraph& graph);
void write_edge_list(std::ostream& out, const SimGraph& graph);

nlohmann::json prune_report_json(const PruneReport& report);
PruneReport prune_report_from_json(const nlohmann::json& doc);

// Jenks table plus before/after counts, for documentation parity.
nlohmann::json graph_report_json(const JenksClassification& cls, const StopList& stop, const PruneReport& report);

}  // namespace recomed
