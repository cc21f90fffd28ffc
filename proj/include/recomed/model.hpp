#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "recomed/atc.hpp"
#include "recomed/cluster.hpp"
#include "recomed/graph.hpp"
#include "recomed/ingest.hpp"
#include "recomed/jenks.hpp"
#include "recomed/rulemine.hpp"

namespace recomed {

struct ScoreWeights {
  double rule = 0.5;
  double jaccard = 0.3;
  double cluster = 0.2;

  bool operator==(const ScoreWeights&) const = default;
};

struct EngineConfig {
  double min_support = 0.001;
  double min_confidence = 0.9;
  std::size_t max_len = kDefaultMaxItemsetLength;
  std::size_t jenks_k = 5;
  std::size_t stop_class_count = 2;
  double min_jaccard = 0.05;
  double eps = 0.7;
  std::size_t min_pts = 3;
  double resolution = 1.0;
  std::uint64_t seed = 0;
  ScoreWeights weights;
  // Expert overrides of the stop list, by medicine name.
  std::vector<std::string> stop_forced_in;
  std::vector<std::string> stop_forced_out;

  // Throws recomed::Error naming the first out-of-range field.
  void validate() const;

  bool operator==(const EngineConfig&) const = default;
};

nlohmann::json config_to_json(const EngineConfig& cfg);
EngineConfig config_from_json(const nlohmann::json& doc);

/// The servable product of a build. Immutable once built.
struct ClusterModel {
  std::vector<MedicineCatalogEntry> catalog;
  EngineConfig config;
  JenksClassification jenks;
  StopList stoplist;
  PruneReport prune_report;
  SimGraph similarity;
  OutlierSet outliers;
  Partition partition;
  std::vector<AtcAnnotation> annotations;  // indexed by med_id
  std::string ruleset_ref;                 // fingerprint of the rules section
  std::string db_fingerprint;
  std::string atc_fingerprint;
  std::string built_at;

  const MedicineCatalogEntry& medicine(MedId id) const;
  bool contains(MedId id) const noexcept { return id < catalog.size(); }
  std::vector<MedId> find_by_name(std::string_view name) const;

  bool operator==(const ClusterModel&) const = default;
};

struct ModelArtifact {
  ClusterModel model;
  RuleSet rules;

  bool operator==(const ModelArtifact&) const = default;
};

/// Rule mining and the graph stages up to the stop list, for callers that
/// want to review the stop list before the full build.
struct StopProposal {
  CoGraph graph;
  JenksClassification jenks;
  StopList stoplist;
};
StopProposal propose_stop_list(const TransactionDB& db, const EngineConfig& cfg);

/// Full pipeline in order: Apriori, co-occurrence graph, Jenks, stop-list
/// pruning, Jaccard rebuild, ATC matching, DBSCAN, Louvain. Stage failures
/// are rethrown as "<stage>: <message>". built_at is recorded verbatim so
/// repeated builds stay byte-identical unless the caller varies it.
ModelArtifact build_model(const TransactionDB& db, const AtcIndex& atc, const EngineConfig& cfg,
                          std::string built_at = {});

inline constexpr std::string_view kModelFormat = "recomed-model/1";

std::string serialize_model(const ModelArtifact& artifact);
ModelArtifact parse_model(std::string_view text);
void save_model(const ModelArtifact& artifact, const std::filesystem::path& path);
ModelArtifact load_model(const std::filesystem::path& path);

// CSV: med_id, medicine, community, is_outlier, atc codes. Outliers and
// unclustered medicines render as community -1.
void write_partition_csv(std::ostream& out, const ClusterModel& model);

}  // namespace recomed
