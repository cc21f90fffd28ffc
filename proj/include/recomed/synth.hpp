#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "recomed/ingest.hpp"
#include "recomed/model.hpp"

namespace recomed {

struct SynthConfig {
  std::size_t n_groups = 6;
  std::size_t meds_per_group = 10;
  std::size_t n_stop = 3;
  std::size_t n_noise_meds = 6;
  std::size_t n_prescriptions = 10000;
  double p_stop = 0.5;
  double p_noise = 0.002;
  // Group medicines per prescription are drawn uniformly from
  // [min_items, max_items], clamped to meds_per_group.
  std::size_t min_items = 2;
  std::size_t max_items = 4;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Planted structure, keyed by med_id in the generated db and by normalized
/// name for files (ids change under sampling).
struct GroundTruth {
  std::map<MedId, std::size_t> group_of;
  std::set<MedId> stop_set;
  std::set<MedId> noise_set;
};

struct SyntheticCorpus {
  std::vector<RawPrescriptionRecord> records;
  TransactionDB db;
  GroundTruth truth;
  std::string atc_table;  // tab-separated, one row per group medicine
  std::vector<std::string> warnings;
};

/// Every prescription picks one group uniformly and samples distinct
/// medicines from it, then adds each stop medicine with p_stop and each
/// noise medicine with p_noise. Group g's medicines carry ATC codes under
/// anatomical letter kAnatomicalGroups[g]; stop and noise medicines carry
/// none. Deterministic per seed.
SyntheticCorpus generate_synthetic(const SynthConfig& cfg);

nlohmann::json truth_to_json(const TransactionDB& db, const GroundTruth& truth);
// Names missing from `catalog` are skipped.
GroundTruth truth_from_json(const nlohmann::json& doc, const std::vector<MedicineCatalogEntry>& catalog);

using Labeling = std::map<MedId, std::int64_t>;

/// Pair-counting adjusted Rand index. Both labelings must cover the same
/// elements. Two all-singleton or two all-in-one labelings score 1.
double adjusted_rand_index(const Labeling& a, const Labeling& b);

struct PurityReport {
  int level = 1;
  std::map<std::size_t, double> per_cluster;  // clusters without matched members are absent
  std::optional<double> weighted_mean;        // weighted by matched member count
};

/// Share of ATC-matched members whose level prefix equals the cluster's
/// modal prefix (ties to the smallest prefix). A member with several codes
/// counts once per distinct prefix when finding the mode and matches if any
/// of its prefixes equals it. Unmatched members are ignored.
PurityReport atc_purity(const ClusterModel& model, int level);

struct TaggedRow {
  std::size_t index = 0;
  std::string id;
  std::string medicine;
  int tag = 0;
  std::vector<AtcCode> codes;
};

struct TaggedSample {
  std::vector<TaggedRow> rows;
};

// CSV with header "#,Id,Medicine,Tag,ATC Code".
TaggedSample load_tagged_sample(std::istream& in);
TaggedSample load_tagged_sample_file(const std::string& path);

/// Fraction of rows tagged 1.
double evaluate_tags(const TaggedSample& sample);

struct EvaluationReport {
  double ari = 0.0;
  std::size_t ari_elements = 0;
  PurityReport purity;
  bool stop_list_exact = false;
  std::set<MedId> planted_stop;
  std::set<MedId> found_stop;
};

/// ARI over planted group medicines: model communities versus planted
/// groups, with each outlier or unclustered group medicine as its own
/// singleton label.
EvaluationReport evaluate_model(const ClusterModel& model, const GroundTruth& truth, int purity_level = 1);
nlohmann::json evaluation_to_json(const EvaluationReport& r);

}  // namespace recomed
