#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "recomed/ingest.hpp"

namespace recomed {

struct Itemset {
  std::vector<MedId> items;  // sorted, duplicate-free
  std::uint64_t count = 0;
  double support = 0.0;  // count / n

  bool operator==(const Itemset&) const = default;
};

enum class RuleStrength { Strong, Weak };

std::string to_string(RuleStrength s);

// Counts are kept beside the fractions so every metric is reproducible
// from integers.
struct AssociationRule {
  std::vector<MedId> antecedent;
  std::vector<MedId> consequent;
  std::uint64_t count = 0;             // transactions containing antecedent and consequent
  std::uint64_t antecedent_count = 0;
  std::uint64_t consequent_count = 0;
  std::uint64_t n = 0;
  double support = 0.0;
  double confidence = 0.0;
  double lift = 0.0;
  RuleStrength strength = RuleStrength::Weak;

  bool operator==(const AssociationRule&) const = default;
};

struct RuleParams {
  double min_support = 0.001;
  double min_confidence = 0.9;

  bool operator==(const RuleParams&) const = default;
};

struct RuleSet {
  std::vector<AssociationRule> rules;  // sorted by (antecedent, consequent)
  RuleParams params;
  std::string db_fingerprint;

  bool operator==(const RuleSet&) const = default;
};

inline constexpr std::size_t kDefaultMaxItemsetLength = 5;

/// Levelwise Apriori. Returns every itemset with count / n >= min_support
/// (and at most max_len items when given), ordered by (length, items).
std::vector<Itemset> frequent_itemsets(const TransactionDB& db, double min_support,
                                       std::optional<std::size_t> max_len = kDefaultMaxItemsetLength);

/// Emits one rule per (frequent itemset of size >= 2, non-empty proper subset
/// as antecedent). Low-confidence rules are kept and marked Weak.
RuleSet derive_rules(std::span<const Itemset> itemsets, const TransactionDB& db, RuleParams params);

/// Strong iff support >= min_support and confidence >= min_confidence.
RuleStrength classify_rule(const AssociationRule& rule, double min_support, double min_confidence);

nlohmann::json ruleset_to_json(const RuleSet& rules);
RuleSet ruleset_from_json(const nlohmann::json& doc);

// Columns: antecedents, consequents, support, confidence, lift, strength.
// Itemsets render as medicine names joined by " | ".
void write_rules_csv(std::ostream& out, const RuleSet& rules, std::span<const MedicineCatalogEntry> catalog);

}  // namespace recomed
