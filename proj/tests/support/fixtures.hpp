#pragma once

// Corpus and graph generators shared by the unit tests and the acceptance
// runner.

#include <cstdio>
#include <string>
#include <vector>

#include "recomed/cluster.hpp"
#include "recomed/fingerprint.hpp"
#include "recomed/graph.hpp"
#include "recomed/ingest.hpp"
#include "recomed/model.hpp"
#include "recomed/random.hpp"

namespace fixture {

inline std::string med_name(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "MED %03zu", i);
  return buf;
}

inline std::vector<recomed::RawPrescriptionRecord> records_from(const std::vector<std::vector<std::string>>& rx) {
  std::vector<recomed::RawPrescriptionRecord> out;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    recomed::RawPrescriptionRecord r;
    r.rx_id = "rx-" + std::to_string(i + 1);
    for (const auto& name : rx[i]) r.items.push_back({name, "", 1.0});
    out.push_back(std::move(r));
  }
  return out;
}

inline recomed::TransactionDB db_from(const std::vector<std::vector<std::string>>& rx) {
  auto recs = records_from(rx);
  return recomed::build_transaction_db(recs);
}

// Ids equal indices because "MED %03zu" sorts numerically. Unused
// medicines are dropped by the builder, so callers read ids from the db.
inline recomed::TransactionDB random_db(recomed::Rng& rng, std::size_t max_tx, std::size_t max_meds,
                                        double density = 0.3) {
  std::size_t n_tx = 1 + recomed::uniform_below(rng, max_tx);
  std::size_t n_meds = 1 + recomed::uniform_below(rng, max_meds);
  std::vector<std::vector<std::string>> rx;
  for (std::size_t t = 0; t < n_tx; ++t) {
    std::vector<std::string> items;
    for (std::size_t m = 0; m < n_meds; ++m) {
      if (recomed::bernoulli(rng, density)) items.push_back(med_name(m));
    }
    if (items.empty()) items.push_back(med_name(recomed::uniform_below(rng, n_meds)));
    rx.push_back(std::move(items));
  }
  return db_from(rx);
}

inline const char* kProcaine = "PENICILLIN G PROCAINE 800,000 U VIAL";
inline const char* kBenzathine = "PENICILLIN G BENZATHINE (PEN LA) 1,200,000 U VIAL";
inline const char* kWater = "WATER FOR INJECTION 5ML P-AMP";

// 10,000 prescriptions: both penicillins together in 15 (always with
// water), water in 759 overall, filler medicines elsewhere.
inline recomed::TransactionDB table1_db() {
  std::vector<std::vector<std::string>> rx;
  for (int i = 0; i < 15; ++i) rx.push_back({kProcaine, kBenzathine, kWater});
  for (int i = 0; i < 744; ++i) rx.push_back({kWater, "FILLER " + std::to_string(i % 40)});
  for (int i = 0; i < 10000 - 759; ++i) rx.push_back({"FILLER " + std::to_string(i % 97)});
  return db_from(rx);
}

// Weighted graph with planted groups: every intra-group pair at weight
// 0.8 +- 0.1, every inter-group pair at 0.05 +- 0.05 (zero draws dropped).
// Node id = group * size + j.
struct PlantedGraph {
  recomed::SimGraph graph;
  std::map<recomed::MedId, std::size_t> group;
};

inline PlantedGraph planted_graph(std::size_t groups, std::size_t size, std::uint64_t seed) {
  recomed::Rng rng(seed);
  PlantedGraph pg;
  const auto n = static_cast<recomed::MedId>(groups * size);
  for (recomed::MedId i = 0; i < n; ++i) {
    pg.graph.nodes.push_back(i);
    pg.group[i] = i / size;
  }
  for (recomed::MedId i = 0; i < n; ++i) {
    for (recomed::MedId j = i + 1; j < n; ++j) {
      bool same = pg.group[i] == pg.group[j];
      double w = same ? 0.7 + 0.2 * recomed::uniform_unit(rng) : 0.1 * recomed::uniform_unit(rng);
      if (w > 0) pg.graph.edges[{i, j}] = w;
    }
  }
  return pg;
}

// Engine settings for the synthetic profile: group co-occurrence is spread
// over 10 medicines, so within-group Jaccard sits near 0.15, and the
// frequency distribution has three tiers (noise, group, stop).
inline recomed::EngineConfig synthetic_config() {
  recomed::EngineConfig cfg;
  cfg.jenks_k = 3;
  cfg.stop_class_count = 1;
  cfg.eps = 0.9;
  return cfg;
}

// Hand-built model. Ids: A0 B1 C2 D3 E4 O5 S6 X7.
//   communities {A,B,C}, {D}, {E}, {X}; O outlier; S stop.
//   rules: A->D strong 0.95, A->E weak 0.5, A->O and A->S strong, AB->X strong.
//   similarity: A-B 0.5, A-C 0.2, A-D 0.1, B-C 0.4.
inline recomed::ModelArtifact tiny_model() {
  using namespace recomed;
  ModelArtifact art;
  auto& m = art.model;
  const char* names[] = {"A", "B", "C", "D", "E", "O", "S", "X"};
  for (MedId i = 0; i < 8; ++i) m.catalog.push_back({i, names[i], names[i], "", 10});
  m.partition = Partition::from_labels({{0, 0}, {1, 0}, {2, 0}, {3, 1}, {4, 2}, {7, 3}});
  m.outliers.med_ids = {5};
  m.outliers.eps = 0.7;
  m.outliers.min_pts = 3;
  m.stoplist.med_ids = {6};
  m.similarity.nodes = {0, 1, 2, 3, 4, 5, 7};
  m.similarity.edges = {{{0, 1}, 0.5}, {{0, 2}, 0.2}, {{0, 3}, 0.1}, {{1, 2}, 0.4}};
  const char* codes[] = {"C09CA01", "C07AB02", "", "S01ED01", "L04AX01", "", "", ""};
  for (MedId i = 0; i < 8; ++i) {
    AtcAnnotation a;
    a.med_id = i;
    if (*codes[i]) a.codes.push_back(*AtcCode::parse(codes[i]));
    a.matched = !a.codes.empty();
    m.annotations.push_back(a);
  }
  auto rule = [](std::vector<MedId> a, std::vector<MedId> c, double conf, RuleStrength s) {
    AssociationRule r;
    r.antecedent = std::move(a);
    r.consequent = std::move(c);
    r.n = 100;
    r.count = static_cast<std::uint64_t>(conf * 20);
    r.antecedent_count = 20;
    r.consequent_count = 20;
    r.support = static_cast<double>(r.count) / 100.0;
    r.confidence = conf;
    r.lift = conf / 0.2;
    r.strength = s;
    return r;
  };
  art.rules.rules = {rule({0}, {3}, 0.95, RuleStrength::Strong), rule({0}, {4}, 0.5, RuleStrength::Weak),
                     rule({0}, {5}, 1.0, RuleStrength::Strong), rule({0}, {6}, 1.0, RuleStrength::Strong),
                     rule({0, 1}, {7}, 1.0, RuleStrength::Strong)};
  m.ruleset_ref = fingerprint(ruleset_to_json(art.rules).dump());
  return art;
}

}  // namespace fixture
