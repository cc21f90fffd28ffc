#include "recomed/rulemine.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <tuple>

#include "recomed/error.hpp"
#include "recomed/text.hpp"

namespace recomed {

using nlohmann::json;

namespace {

// Smallest count c with c / n >= min_support, using the same division the
// support field uses so the threshold test agrees with the stored value.
std::uint64_t min_count_for(double min_support, std::uint64_t n) {
  auto c = static_cast<std::uint64_t>(std::ceil(min_support * static_cast<double>(n)));
  auto meets = [&](std::uint64_t x) { return static_cast<double>(x) / static_cast<double>(n) >= min_support; };
  while (c > 0 && meets(c - 1)) --c;
  while (!meets(c)) ++c;
  return c;
}

std::uint64_t binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  std::uint64_t r = 1;
  for (std::size_t i = 1; i <= k; ++i) {
    r = r * (n - k + i) / i;
    if (r > (1ULL << 40)) return r;
  }
  return r;
}

// Calls fn on every k-subset of `items` (lexicographic order).
template <typename Fn>
void for_each_subset(const std::vector<MedId>& items, std::size_t k, Fn&& fn) {
  std::vector<std::size_t> idx(k);
  for (std::size_t i = 0; i < k; ++i) idx[i] = i;
  std::vector<MedId> subset(k);
  const std::size_t n = items.size();
  while (true) {
    for (std::size_t i = 0; i < k; ++i) subset[i] = items[idx[i]];
    fn(subset);
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == n - k + i - 1) --i;
    if (i == 0) return;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

std::uint64_t count_containing(const TransactionDB& db, const std::vector<MedId>& items) {
  std::uint64_t c = 0;
  for (const auto& t : db.transactions()) {
    if (std::includes(t.begin(), t.end(), items.begin(), items.end())) ++c;
  }
  return c;
}

}  // namespace

std::string to_string(RuleStrength s) { return s == RuleStrength::Strong ? "strong" : "weak"; }

std::vector<Itemset> frequent_itemsets(const TransactionDB& db, double min_support,
                                       std::optional<std::size_t> max_len) {
  if (!(min_support > 0.0 && min_support <= 1.0)) throw Error("min_support must lie in (0, 1]");
  if (max_len && *max_len == 0) throw Error("max_len must be positive");
  const std::uint64_t n = db.size();
  const std::uint64_t min_count = min_count_for(min_support, n);
  auto support_of = [n](std::uint64_t c) { return static_cast<double>(c) / static_cast<double>(n); };

  std::vector<Itemset> result;
  std::vector<Itemset> level;
  std::vector<bool> frequent_item(db.catalog().size(), false);
  for (const auto& e : db.catalog()) {
    if (e.frequency >= min_count) {
      level.push_back({{e.med_id}, e.frequency, support_of(e.frequency)});
      frequent_item[e.med_id] = true;
    }
  }

  std::size_t k = 1;
  while (!level.empty()) {
    result.insert(result.end(), level.begin(), level.end());
    if (max_len && k >= *max_len) break;
    ++k;

    // Join step: merge (k-1)-itemsets sharing their first k-2 items, then
    // prune any candidate with an infrequent (k-1)-subset.
    std::map<std::vector<MedId>, std::uint64_t> prev;
    for (const auto& s : level) prev.emplace(s.items, s.count);
    std::map<std::vector<MedId>, std::uint64_t> candidates;
    for (std::size_t i = 0; i < level.size(); ++i) {
      const auto& a = level[i].items;
      for (std::size_t j = i + 1; j < level.size(); ++j) {
        const auto& b = level[j].items;
        if (!std::equal(a.begin(), a.end() - 1, b.begin())) break;
        std::vector<MedId> cand = a;
        cand.push_back(b.back());
        bool ok = true;
        for (std::size_t drop = 0; drop + 2 < cand.size() && ok; ++drop) {
          std::vector<MedId> sub;
          for (std::size_t x = 0; x < cand.size(); ++x) {
            if (x != drop) sub.push_back(cand[x]);
          }
          ok = prev.count(sub) > 0;
        }
        if (ok) candidates.emplace(std::move(cand), 0);
      }
    }
    if (candidates.empty()) break;

    // Count: enumerate a transaction's k-subsets when that is cheaper than
    // scanning the candidate list.
    std::vector<MedId> filtered;
    for (const auto& t : db.transactions()) {
      filtered.clear();
      for (MedId m : t) {
        if (frequent_item[m]) filtered.push_back(m);
      }
      if (filtered.size() < k) continue;
      if (binomial(filtered.size(), k) <= candidates.size()) {
        for_each_subset(filtered, k, [&](const std::vector<MedId>& sub) {
          auto it = candidates.find(sub);
          if (it != candidates.end()) ++it->second;
        });
      } else {
        for (auto& [items, count] : candidates) {
          if (std::includes(filtered.begin(), filtered.end(), items.begin(), items.end())) ++count;
        }
      }
    }

    level.clear();
    for (auto& [items, count] : candidates) {
      if (count >= min_count) level.push_back({items, count, support_of(count)});
    }
  }

  std::stable_sort(result.begin(), result.end(), [](const Itemset& a, const Itemset& b) {
    if (a.items.size() != b.items.size()) return a.items.size() < b.items.size();
    return a.items < b.items;
  });
  return result;
}

RuleStrength classify_rule(const AssociationRule& rule, double min_support, double min_confidence) {
  return rule.support >= min_support && rule.confidence >= min_confidence ? RuleStrength::Strong
                                                                          : RuleStrength::Weak;
}

RuleSet derive_rules(std::span<const Itemset> itemsets, const TransactionDB& db, RuleParams params) {
  if (!(params.min_confidence >= 0.0 && params.min_confidence <= 1.0)) {
    throw Error("min_confidence must lie in [0, 1]");
  }
  std::map<std::vector<MedId>, std::uint64_t> counts;
  for (const auto& s : itemsets) {
    for (MedId m : s.items) {
      if (!db.contains(m)) throw Error("foreign itemset");
    }
    counts.emplace(s.items, s.count);
  }
  auto count_of = [&](const std::vector<MedId>& items) {
    auto it = counts.find(items);
    if (it != counts.end()) return it->second;
    std::uint64_t c = count_containing(db, items);
    counts.emplace(items, c);
    return c;
  };

  const std::uint64_t n = db.size();
  RuleSet out;
  out.params = params;
  out.db_fingerprint = db.fingerprint();
  for (const auto& s : itemsets) {
    const std::size_t k = s.items.size();
    if (k < 2) continue;
    if (k > 31) throw Error("itemset too long for rule derivation");
    for (std::uint32_t mask = 1; mask + 1 < (1u << k); ++mask) {
      AssociationRule r;
      for (std::size_t i = 0; i < k; ++i) {
        ((mask >> i) & 1u ? r.antecedent : r.consequent).push_back(s.items[i]);
      }
      r.count = s.count;
      r.antecedent_count = count_of(r.antecedent);
      r.consequent_count = count_of(r.consequent);
      r.n = n;
      r.support = static_cast<double>(r.count) / static_cast<double>(n);
      r.confidence = static_cast<double>(r.count) / static_cast<double>(r.antecedent_count);
      r.lift = (static_cast<double>(r.count) * static_cast<double>(n)) /
               (static_cast<double>(r.antecedent_count) * static_cast<double>(r.consequent_count));
      r.strength = classify_rule(r, params.min_support, params.min_confidence);
      out.rules.push_back(std::move(r));
    }
  }
  std::sort(out.rules.begin(), out.rules.end(), [](const AssociationRule& a, const AssociationRule& b) {
    return std::tie(a.antecedent, a.consequent) < std::tie(b.antecedent, b.consequent);
  });
  return out;
}

json ruleset_to_json(const RuleSet& rules) {
  json arr = json::array();
  for (const auto& r : rules.rules) {
    arr.push_back({{"antecedent", r.antecedent},
                   {"consequent", r.consequent},
                   {"count", r.count},
                   {"antecedent_count", r.antecedent_count},
                   {"consequent_count", r.consequent_count},
                   {"support", r.support},
                   {"confidence", r.confidence},
                   {"lift", r.lift},
                   {"strength", to_string(r.strength)}});
  }
  const std::uint64_t n = rules.rules.empty() ? 0 : rules.rules.front().n;
  return {{"params", {{"min_support", rules.params.min_support}, {"min_confidence", rules.params.min_confidence}}},
          {"db_fingerprint", rules.db_fingerprint},
          {"n", n},
          {"rules", std::move(arr)}};
}

RuleSet ruleset_from_json(const json& doc) {
  RuleSet out;
  out.params.min_support = doc.at("params").at("min_support").get<double>();
  out.params.min_confidence = doc.at("params").at("min_confidence").get<double>();
  out.db_fingerprint = doc.at("db_fingerprint").get<std::string>();
  const auto n = doc.at("n").get<std::uint64_t>();
  for (const auto& j : doc.at("rules")) {
    AssociationRule r;
    r.antecedent = j.at("antecedent").get<std::vector<MedId>>();
    r.consequent = j.at("consequent").get<std::vector<MedId>>();
    r.count = j.at("count").get<std::uint64_t>();
    r.antecedent_count = j.at("antecedent_count").get<std::uint64_t>();
    r.consequent_count = j.at("consequent_count").get<std::uint64_t>();
    r.support = j.at("support").get<double>();
    r.confidence = j.at("confidence").get<double>();
    r.lift = j.at("lift").get<double>();
    r.n = n;
    const auto strength = j.at("strength").get<std::string>();
    if (strength != "strong" && strength != "weak") throw Error("bad rule strength " + strength);
    r.strength = strength == "strong" ? RuleStrength::Strong : RuleStrength::Weak;
    out.rules.push_back(std::move(r));
  }
  return out;
}

void write_rules_csv(std::ostream& out, const RuleSet& rules, std::span<const MedicineCatalogEntry> catalog) {
  auto names = [&](const std::vector<MedId>& items) {
    std::vector<std::string> parts;
    for (MedId m : items) parts.push_back(m < catalog.size() ? catalog[m].name : std::to_string(m));
    return csv_field(join(parts, " | "));
  };
  out << "antecedents,consequents,support,confidence,lift,strength\n";
  char buf[96];
  for (const auto& r : rules.rules) {
    std::snprintf(buf, sizeof buf, "%.6g,%.6g,%.6g", r.support, r.confidence, r.lift);
    out << names(r.antecedent) << ',' << names(r.consequent) << ',' << buf << ',' << to_string(r.strength) << '\n';
  }
}

}  // namespace recomed
