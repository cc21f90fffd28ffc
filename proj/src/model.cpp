#include "recomed/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "recomed/error.hpp"
#include "recomed/fingerprint.hpp"
#include "recomed/text.hpp"

namespace recomed {

using nlohmann::json;

void EngineConfig::validate() const {
  auto fraction = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!(min_support > 0.0 && min_support <= 1.0)) throw Error("config: min_support must lie in (0, 1]");
  if (!fraction(min_confidence)) throw Error("config: min_confidence must lie in [0, 1]");
  if (max_len < 1) throw Error("config: max_len must be at least 1");
  if (jenks_k < 1) throw Error("config: jenks_k must be at least 1");
  if (stop_class_count >= jenks_k) throw Error("config: stop_class_count must be smaller than jenks_k");
  if (!fraction(min_jaccard)) throw Error("config: min_jaccard must lie in [0, 1]");
  if (!(eps > 0.0 && eps <= 1.0)) throw Error("config: eps must lie in (0, 1]");
  if (min_pts < 1) throw Error("config: min_pts must be at least 1");
  if (!(resolution > 0.0)) throw Error("config: resolution must be positive");
  if (weights.rule < 0 || weights.jaccard < 0 || weights.cluster < 0) throw Error("config: weights must be non-negative");
  if (std::abs(weights.rule + weights.jaccard + weights.cluster - 1.0) > 1e-9) throw Error("config: weights must sum to 1");
}

json config_to_json(const EngineConfig& c) {
  return {{"min_support", c.min_support},
          {"min_confidence", c.min_confidence},
          {"max_len", c.max_len},
          {"jenks_k", c.jenks_k},
          {"stop_class_count", c.stop_class_count},
          {"min_jaccard", c.min_jaccard},
          {"eps", c.eps},
          {"min_pts", c.min_pts},
          {"resolution", c.resolution},
          {"seed", c.seed},
          {"weights", {{"rule", c.weights.rule}, {"jaccard", c.weights.jaccard}, {"cluster", c.weights.cluster}}},
          {"stop_forced_in", c.stop_forced_in},
          {"stop_forced_out", c.stop_forced_out}};
}

EngineConfig config_from_json(const json& j) {
  EngineConfig c;
  c.min_support = j.at("min_support").get<double>();
  c.min_confidence = j.at("min_confidence").get<double>();
  c.max_len = j.at("max_len").get<std::size_t>();
  c.jenks_k = j.at("jenks_k").get<std::size_t>();
  c.stop_class_count = j.at("stop_class_count").get<std::size_t>();
  c.min_jaccard = j.at("min_jaccard").get<double>();
  c.eps = j.at("eps").get<double>();
  c.min_pts = j.at("min_pts").get<std::size_t>();
  c.resolution = j.at("resolution").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.weights.rule = j.at("weights").at("rule").get<double>();
  c.weights.jaccard = j.at("weights").at("jaccard").get<double>();
  c.weights.cluster = j.at("weights").at("cluster").get<double>();
  c.stop_forced_in = j.at("stop_forced_in").get<std::vector<std::string>>();
  c.stop_forced_out = j.at("stop_forced_out").get<std::vector<std::string>>();
  return c;
}

const MedicineCatalogEntry& ClusterModel::medicine(MedId id) const {
  if (!contains(id)) throw Error("unknown med_id " + std::to_string(id));
  return catalog[id];
}

std::vector<MedId> ClusterModel::find_by_name(std::string_view name) const {
  const std::string key = normalize_name(name);
  std::vector<MedId> out;
  auto lo = std::lower_bound(catalog.begin(), catalog.end(), key,
                             [](const MedicineCatalogEntry& e, const std::string& k) { return e.normalized_name < k; });
  for (; lo != catalog.end() && lo->normalized_name == key; ++lo) out.push_back(lo->med_id);
  return out;
}

namespace {

template <typename Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const UnknownMedicinesError&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(std::string(name) + ": " + e.what());
  }
}

std::set<MedId> resolve_names(const TransactionDB& db, const std::vector<std::string>& names) {
  std::set<MedId> out;
  for (const auto& n : names) {
    auto ids = db.find_by_name(n);
    if (ids.empty()) throw Error("unknown medicine in stop overrides: " + n);
    out.insert(ids.begin(), ids.end());
  }
  return out;
}

json catalog_to_json(const std::vector<MedicineCatalogEntry>& catalog) {
  json arr = json::array();
  for (const auto& e : catalog) {
    arr.push_back({{"med_id", e.med_id},
                   {"name", e.name},
                   {"normalized_name", e.normalized_name},
                   {"generic_code", e.generic_code},
                   {"frequency", e.frequency}});
  }
  return arr;
}

}  // namespace

StopProposal propose_stop_list(const TransactionDB& db, const EngineConfig& cfg) {
  cfg.validate();
  StopProposal p;
  p.graph = stage("cooccurrence", [&] { return build_cooccurrence_graph(db); });
  p.jenks = stage("jenks", [&] {
    auto values = p.graph.frequency_values();
    std::size_t k = cfg.jenks_k;
    if (cfg.stop_class_count == 0) {
      // Nothing is removed, so a corpus with fewer distinct frequencies than
      // jenks_k only narrows the report.
      std::set<double> distinct(values.begin(), values.end());
      k = std::min(k, distinct.size());
    }
    return jenks_breaks(values, k);
  });
  p.stoplist = stage("stoplist", [&] {
    StopOverrides overrides{resolve_names(db, cfg.stop_forced_in), resolve_names(db, cfg.stop_forced_out)};
    return select_stop_medicines(p.graph, p.jenks, cfg.stop_class_count, overrides);
  });
  return p;
}

ModelArtifact build_model(const TransactionDB& db, const AtcIndex& atc, const EngineConfig& cfg, std::string built_at) {
  stage("config", [&] { cfg.validate(); });
  ModelArtifact art;
  art.rules = stage("apriori", [&] {
    auto itemsets = frequent_itemsets(db, cfg.min_support, cfg.max_len);
    return derive_rules(itemsets, db, {cfg.min_support, cfg.min_confidence});
  });

  StopProposal proposal = propose_stop_list(db, cfg);
  auto pruned = stage("prune", [&] { return prune_graph(proposal.graph, proposal.stoplist); });
  if (pruned.graph.nodes.empty()) throw Error("prune: pipeline degenerate");
  SimGraph sim = stage("jaccard", [&] { return rebuild_jaccard_graph(db, pruned.graph, cfg.min_jaccard); });

  ClusterModel& m = art.model;
  m.catalog = db.catalog();
  m.config = cfg;
  m.jenks = std::move(proposal.jenks);
  m.stoplist = std::move(proposal.stoplist);
  m.prune_report = std::move(pruned.report);
  m.annotations = stage("atc", [&] {
    std::vector<AtcAnnotation> out;
    for (const auto& e : db.catalog()) out.push_back(match_medicine(e, atc));
    return out;
  });
  m.outliers = stage("dbscan", [&] { return dbscan_outliers(sim, cfg.eps, cfg.min_pts); });
  if (m.outliers.med_ids.size() == sim.nodes.size()) throw Error("dbscan: pipeline degenerate (every medicine is an outlier)");
  m.partition = stage("louvain", [&] { return louvain(sim, m.outliers, cfg.resolution, cfg.seed); });
  m.similarity = std::move(sim);
  m.db_fingerprint = db.fingerprint();
  m.atc_fingerprint = atc.fingerprint();
  m.ruleset_ref = fingerprint(ruleset_to_json(art.rules).dump());
  m.built_at = std::move(built_at);
  return art;
}

std::string serialize_model(const ModelArtifact& art) {
  const ClusterModel& m = art.model;
  json annotations = json::array();
  for (const auto& a : m.annotations) annotations.push_back(annotation_to_json(a));
  json similarity = json::array();
  for (const auto& [key, w] : m.similarity.edges) similarity.push_back({key.first, key.second, w});
  json jenks = {{"k", m.jenks.k},
                {"within_ssd", m.jenks.within_ssd},
                {"assignment", m.jenks.assignment},
                {"classes", jenks_table_json(m.jenks)}};
  json doc = {
      {"format", kModelFormat},
      {"config", config_to_json(m.config)},
      {"provenance",
       {{"db_fingerprint", m.db_fingerprint},
        {"atc_fingerprint", m.atc_fingerprint},
        {"ruleset_ref", m.ruleset_ref},
        {"built_at", m.built_at}}},
      {"catalog", catalog_to_json(m.catalog)},
      {"jenks", std::move(jenks)},
      {"stoplist",
       {{"med_ids", m.stoplist.med_ids},
        {"source_classes", m.stoplist.source_classes},
        {"forced_in", m.stoplist.overrides.forced_in},
        {"forced_out", m.stoplist.overrides.forced_out}}},
      {"prune_report", prune_report_json(m.prune_report)},
      {"similarity", {{"nodes", m.similarity.nodes}, {"edges", std::move(similarity)}}},
      {"outliers", {{"med_ids", m.outliers.med_ids}, {"eps", m.outliers.eps}, {"min_pts", m.outliers.min_pts}}},
      {"partition", partition_to_json(m.partition)},
      {"annotations", std::move(annotations)},
      {"rules", ruleset_to_json(art.rules)},
  };
  return doc.dump() + "\n";
}

ModelArtifact parse_model(std::string_view text) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw Error("model artifact is not valid JSON");
  try {
    if (doc.at("format").get<std::string>() != kModelFormat) throw Error("unsupported model format");
    ModelArtifact art;
    ClusterModel& m = art.model;
    m.config = config_from_json(doc.at("config"));
    const auto& prov = doc.at("provenance");
    m.db_fingerprint = prov.at("db_fingerprint").get<std::string>();
    m.atc_fingerprint = prov.at("atc_fingerprint").get<std::string>();
    m.ruleset_ref = prov.at("ruleset_ref").get<std::string>();
    m.built_at = prov.at("built_at").get<std::string>();
    for (const auto& e : doc.at("catalog")) {
      m.catalog.push_back({e.at("med_id").get<MedId>(), e.at("name").get<std::string>(),
                           e.at("normalized_name").get<std::string>(), e.at("generic_code").get<std::string>(),
                           e.at("frequency").get<std::uint64_t>()});
      if (m.catalog.back().med_id != m.catalog.size() - 1) throw Error("catalog ids must be contiguous");
    }
    m.jenks = jenks_from_json(doc.at("jenks"));
    const auto& stop = doc.at("stoplist");
    m.stoplist.med_ids = stop.at("med_ids").get<std::set<MedId>>();
    m.stoplist.source_classes = stop.at("source_classes").get<std::vector<std::size_t>>();
    m.stoplist.overrides.forced_in = stop.at("forced_in").get<std::set<MedId>>();
    m.stoplist.overrides.forced_out = stop.at("forced_out").get<std::set<MedId>>();
    m.prune_report = prune_report_from_json(doc.at("prune_report"));
    m.similarity.nodes = doc.at("similarity").at("nodes").get<std::vector<MedId>>();
    for (const auto& e : doc.at("similarity").at("edges")) {
      m.similarity.edges.emplace(make_pair_key(e.at(0).get<MedId>(), e.at(1).get<MedId>()), e.at(2).get<double>());
    }
    const auto& out = doc.at("outliers");
    m.outliers.med_ids = out.at("med_ids").get<std::set<MedId>>();
    m.outliers.eps = out.at("eps").get<double>();
    m.outliers.min_pts = out.at("min_pts").get<std::size_t>();
    m.partition = partition_from_json(doc.at("partition"));
    for (const auto& a : doc.at("annotations")) m.annotations.push_back(annotation_from_json(a));
    if (m.annotations.size() != m.catalog.size()) throw Error("annotations do not cover the catalog");
    art.rules = ruleset_from_json(doc.at("rules"));
    if (fingerprint(ruleset_to_json(art.rules).dump()) != m.ruleset_ref) throw Error("rules do not match ruleset_ref");
    for (const auto& [id, c] : m.partition.assignment) {
      if (m.outliers.med_ids.count(id)) throw Error("outlier present in partition");
      if (!m.contains(id)) throw Error("partition references unknown medicine");
    }
    return art;
  } catch (const json::exception& e) {
    throw Error(std::string("malformed model artifact: ") + e.what());
  }
}

void save_model(const ModelArtifact& artifact, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << serialize_model(artifact);
  if (!out) throw Error("write failed: " + path.string());
}

ModelArtifact load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_model(buf.str());
}

void write_partition_csv(std::ostream& out, const ClusterModel& m) {
  out << "med_id,medicine,community,is_outlier,atc_codes\n";
  for (MedId id : m.similarity.nodes) {
    auto it = m.partition.assignment.find(id);
    long community = it == m.partition.assignment.end() ? -1 : static_cast<long>(it->second);
    bool outlier = m.outliers.med_ids.count(id) > 0;
    out << id << ',' << csv_field(m.catalog[id].name) << ',' << community << ',' << (outlier ? 1 : 0) << ','
        << csv_field(join(code_strings(m.annotations[id].codes), " ")) << '\n';
  }
}

}  // namespace recomed
