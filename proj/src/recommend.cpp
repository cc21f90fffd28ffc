#include "recomed/recommend.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "recomed/error.hpp"

namespace recomed {

using nlohmann::json;

std::string to_string(Flag f) { return f == Flag::Discouraged ? "discouraged" : "none"; }

double combine_score(const ScoreWeights& w, const ScoreComponents& c) {
  return w.rule * c.rule_conf + w.jaccard * c.max_jaccard + w.cluster * (c.same_cluster ? 1.0 : 0.0);
}

namespace {

bool inside(const std::vector<MedId>& sorted_items, const std::set<MedId>& query) {
  return std::all_of(sorted_items.begin(), sorted_items.end(), [&](MedId m) { return query.count(m) > 0; });
}

struct Evidence {
  std::vector<std::size_t> strong;
  std::vector<std::size_t> weak;
  bool in_cluster = false;
};

// Candidate pool with the evidence that put each candidate there.
class Pool {
 public:
  Pool(const ClusterModel& model, const RuleSet& rules, std::span<const MedId> query_ids, std::vector<MedId>* unknown) {
    for (MedId q : query_ids) {
      if (model.contains(q)) {
        query_.insert(q);
      } else if (unknown) {
        unknown->push_back(q);
      }
    }
    if (query_.empty()) {
      std::vector<std::string> names;
      for (MedId q : query_ids) names.push_back("#" + std::to_string(q));
      throw UnknownMedicinesError(std::move(names));
    }
    for (MedId q : query_) {
      auto it = model.partition.assignment.find(q);
      if (it == model.partition.assignment.end()) continue;
      query_clusters_.insert(it->second);
      for (MedId c : model.partition.communities[it->second]) evidence_[c].in_cluster = true;
    }
    for (std::size_t i = 0; i < rules.rules.size(); ++i) {
      const auto& r = rules.rules[i];
      if (!inside(r.antecedent, query_)) continue;
      for (MedId c : r.consequent) {
        auto& ev = evidence_[c];
        (r.strength == RuleStrength::Strong ? ev.strong : ev.weak).push_back(i);
      }
    }
    for (auto it = evidence_.begin(); it != evidence_.end();) {
      MedId c = it->first;
      bool drop = query_.count(c) || model.stoplist.med_ids.count(c) || model.outliers.med_ids.count(c) ||
                  !model.contains(c);
      it = drop ? evidence_.erase(it) : std::next(it);
    }
  }

  const std::set<MedId>& query() const { return query_; }
  const std::map<MedId, Evidence>& candidates() const { return evidence_; }
  const std::set<std::size_t>& query_clusters() const { return query_clusters_; }

 private:
  std::set<MedId> query_;
  std::set<std::size_t> query_clusters_;
  std::map<MedId, Evidence> evidence_;
};

ScoreComponents components_for(const ClusterModel& model, const RuleSet& rules, const Pool& pool, MedId c,
                               const Evidence& ev) {
  ScoreComponents sc;
  for (std::size_t i : ev.strong) sc.rule_conf = std::max(sc.rule_conf, rules.rules[i].confidence);
  for (MedId q : pool.query()) sc.max_jaccard = std::max(sc.max_jaccard, model.similarity.weight(q, c));
  sc.same_cluster = ev.in_cluster;
  return sc;
}

}  // namespace

RecommendResult recommend(const ClusterModel& model, const RuleSet& rules, std::span<const MedId> query,
                          std::size_t k) {
  if (k < 1) throw Error("k must be at least 1");
  RecommendResult result;
  Pool pool(model, rules, query, &result.unknown);
  for (const auto& [c, ev] : pool.candidates()) {
    Recommendation r;
    r.med_id = c;
    r.name = model.catalog[c].name;
    r.components = components_for(model, rules, pool, c, ev);
    r.score = combine_score(model.config.weights, r.components);
    r.atc = model.annotations.at(c);
    r.flag = ev.weak.empty() ? Flag::None : Flag::Discouraged;
    result.items.push_back(std::move(r));
  }
  std::sort(result.items.begin(), result.items.end(), [](const Recommendation& a, const Recommendation& b) {
    if (a.flag != b.flag) return a.flag == Flag::None;
    if (a.score != b.score) return a.score > b.score;
    return a.med_id < b.med_id;
  });
  if (result.items.size() > k) result.items.resize(k);
  return result;
}

Explanation explain(const ClusterModel& model, const RuleSet& rules, std::span<const MedId> query, MedId candidate) {
  Pool pool(model, rules, query, nullptr);
  auto it = pool.candidates().find(candidate);
  if (it == pool.candidates().end()) {
    throw Error("medicine " + std::to_string(candidate) + " is not a candidate for this query");
  }
  const Evidence& ev = it->second;
  Explanation e;
  e.candidate = candidate;
  for (std::size_t i : ev.strong) e.fired_rules.push_back({i, rules.rules[i]});
  for (std::size_t i : ev.weak) e.discouraging_rules.push_back({i, rules.rules[i]});
  if (ev.in_cluster) e.shared_cluster_id = model.partition.assignment.at(candidate);
  for (MedId q : pool.query()) e.jaccard_details.push_back({q, model.similarity.weight(q, candidate)});
  std::set<char> letters;
  for (const auto& code : model.annotations.at(candidate).codes) letters.insert(code.anatomical_group());
  e.atc_classes.assign(letters.begin(), letters.end());
  e.weights = model.config.weights;
  e.components = components_for(model, rules, pool, candidate, ev);
  e.score = combine_score(e.weights, e.components);
  e.flag = ev.weak.empty() ? Flag::None : Flag::Discouraged;
  return e;
}

NameResolution resolve_medicines(const ClusterModel& model, std::span<const std::string> names) {
  NameResolution out;
  std::set<MedId> seen;
  for (const auto& n : names) {
    auto ids = model.find_by_name(n);
    if (ids.empty()) {
      out.unknown.push_back(n);
      continue;
    }
    for (MedId id : ids) {
      if (seen.insert(id).second) out.known.push_back(id);
    }
  }
  return out;
}

json recommendation_to_json(const ClusterModel& model, const Recommendation& r) {
  std::string badge = r.atc.matched ? std::string(1, r.atc.codes.front().anatomical_group()) : "unmatched";
  return {{"med_id", r.med_id},
          {"name", r.name},
          {"generic_code", model.catalog.at(r.med_id).generic_code},
          {"score", r.score},
          {"components",
           {{"rule_conf", r.components.rule_conf},
            {"max_jaccard", r.components.max_jaccard},
            {"same_cluster", r.components.same_cluster}}},
          {"atc", {{"matched", r.atc.matched}, {"codes", code_strings(r.atc.codes)}, {"badge", badge}}},
          {"flag", to_string(r.flag)}};
}

namespace {

json rule_json(const ClusterModel& model, const FiredRule& f) {
  auto names = [&](const std::vector<MedId>& ids) {
    std::vector<std::string> out;
    for (MedId m : ids) out.push_back(model.catalog.at(m).name);
    return out;
  };
  return {{"rule_id", f.rule_id},
          {"antecedent", names(f.rule.antecedent)},
          {"consequent", names(f.rule.consequent)},
          {"support", f.rule.support},
          {"confidence", f.rule.confidence},
          {"lift", f.rule.lift},
          {"strength", to_string(f.rule.strength)}};
}

}  // namespace

json explanation_to_json(const ClusterModel& model, const Explanation& e) {
  json fired = json::array(), discouraging = json::array(), details = json::array();
  for (const auto& f : e.fired_rules) fired.push_back(rule_json(model, f));
  for (const auto& f : e.discouraging_rules) discouraging.push_back(rule_json(model, f));
  for (const auto& d : e.jaccard_details) {
    details.push_back({{"med_id", d.query_med}, {"name", model.catalog.at(d.query_med).name}, {"jaccard", d.jaccard}});
  }
  std::vector<std::string> letters;
  for (char c : e.atc_classes) letters.emplace_back(1, c);
  return {{"candidate", e.candidate},
          {"name", model.catalog.at(e.candidate).name},
          {"fired_rules", std::move(fired)},
          {"discouraging_rules", std::move(discouraging)},
          {"shared_cluster_id", e.shared_cluster_id ? json(*e.shared_cluster_id) : json(nullptr)},
          {"jaccard_details", std::move(details)},
          {"atc_classes", letters},
          {"weights", {{"rule", e.weights.rule}, {"jaccard", e.weights.jaccard}, {"cluster", e.weights.cluster}}},
          {"components",
           {{"rule_conf", e.components.rule_conf},
            {"max_jaccard", e.components.max_jaccard},
            {"same_cluster", e.components.same_cluster}}},
          {"score", e.score},
          {"flag", to_string(e.flag)}};
}

json recommend_response_json(const ClusterModel& model, const RecommendResult& result,
                             const std::vector<std::string>& unknown_names) {
  json items = json::array();
  for (const auto& r : result.items) items.push_back(recommendation_to_json(model, r));
  return {{"recommendations", std::move(items)}, {"unknown", unknown_names}};
}

}  // namespace recomed
