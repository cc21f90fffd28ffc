#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "recomed/model.hpp"

namespace recomed {

enum class Flag { None, Discouraged };

std::string to_string(Flag f);

struct ScoreComponents {
  double rule_conf = 0.0;    // best confidence among fired Strong rules
  double max_jaccard = 0.0;  // best similarity-graph weight to a query medicine
  bool same_cluster = false;

  bool operator==(const ScoreComponents&) const = default;
};

struct Recommendation {
  MedId med_id = 0;
  std::string name;
  double score = 0.0;
  ScoreComponents components;
  AtcAnnotation atc;
  Flag flag = Flag::None;

  bool operator==(const Recommendation&) const = default;
};

struct RecommendResult {
  std::vector<Recommendation> items;
  std::vector<MedId> unknown;
};

/// score = w_rule * rule_conf + w_jaccard * max_jaccard + w_cluster * [same_cluster]
double combine_score(const ScoreWeights& w, const ScoreComponents& c);

/// Candidates are the query's Louvain communities plus consequents of rules
/// whose antecedent lies inside the query, minus the query itself, stop
/// medicines and outliers. Weak-rule targets are flagged Discouraged and
/// ranked after every unflagged item. Order: flag, score desc, med_id.
/// Unknown ids are reported; if none are known throws UnknownMedicinesError.
RecommendResult recommend(const ClusterModel& model, const RuleSet& rules, std::span<const MedId> query,
                          std::size_t k);

struct FiredRule {
  std::size_t rule_id = 0;  // index into RuleSet::rules
  AssociationRule rule;
};

struct JaccardDetail {
  MedId query_med = 0;
  double jaccard = 0.0;
};

struct Explanation {
  MedId candidate = 0;
  std::vector<FiredRule> fired_rules;          // Strong rules supporting the candidate
  std::vector<FiredRule> discouraging_rules;   // Weak rules that flag it
  std::optional<std::size_t> shared_cluster_id;
  std::vector<JaccardDetail> jaccard_details;  // one per known query medicine
  std::vector<char> atc_classes;               // level-1 letters
  ScoreWeights weights;
  ScoreComponents components;
  double score = 0.0;
  Flag flag = Flag::None;
};

/// Evidence behind one candidate. Recomputing combine_score from the
/// explanation reproduces the recommendation score exactly. Throws if the
/// candidate is not in the query's candidate pool.
Explanation explain(const ClusterModel& model, const RuleSet& rules, std::span<const MedId> query, MedId candidate);

struct NameResolution {
  std::vector<MedId> known;
  std::vector<std::string> unknown;
};

/// Maps medicine names (normalized) onto catalog ids.
NameResolution resolve_medicines(const ClusterModel& model, std::span<const std::string> names);

nlohmann::json recommendation_to_json(const ClusterModel& model, const Recommendation& r);
nlohmann::json explanation_to_json(const ClusterModel& model, const Explanation& e);

// Shared by the CLI and the HTTP API so both emit identical lists.
nlohmann::json recommend_response_json(const ClusterModel& model, const RecommendResult& result,
                                       const std::vector<std::string>& unknown_names);

}  // namespace recomed
