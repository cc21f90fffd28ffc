#include "recomed/graph.hpp"

#include <algorithm>
#include <ostream>

#include "recomed/error.hpp"

namespace recomed {

using nlohmann::json;

std::vector<double> CoGraph::frequency_values() const {
  std::vector<double> out;
  out.reserve(nodes.size());
  for (const auto& [id, f] : nodes) out.push_back(static_cast<double>(f));
  return out;
}

CoGraph build_cooccurrence_graph(const TransactionDB& db) {
  CoGraph g;
  for (const auto& e : db.catalog()) g.nodes.emplace(e.med_id, e.frequency);
  for (const auto& t : db.transactions()) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      for (std::size_t j = i + 1; j < t.size(); ++j) ++g.edges[{t[i], t[j]}];
    }
  }
  return g;
}

StopList select_stop_medicines(const CoGraph& graph, const JenksClassification& cls,
                               std::size_t stop_class_count, const StopOverrides& overrides) {
  if (stop_class_count >= cls.k) throw Error("stop_class_count must be smaller than the class count");
  if (cls.assignment.size() != graph.nodes.size()) throw Error("classification does not match graph nodes");
  for (MedId m : overrides.forced_in) {
    if (overrides.forced_out.count(m)) throw Error("medicine both forced in and out of the stop list");
    if (!graph.nodes.count(m)) throw Error("unknown medicine in stop overrides");
  }
  StopList out;
  out.overrides = overrides;
  const std::size_t first_stop_class = cls.k - stop_class_count;
  for (std::size_t c = first_stop_class; c < cls.k; ++c) out.source_classes.push_back(c);
  std::size_t pos = 0;
  for (const auto& [id, freq] : graph.nodes) {
    if (cls.assignment[pos++] >= first_stop_class) out.med_ids.insert(id);
  }
  out.med_ids.insert(overrides.forced_in.begin(), overrides.forced_in.end());
  for (MedId m : overrides.forced_out) out.med_ids.erase(m);
  return out;
}

PruneResult prune_graph(const CoGraph& graph, const StopList& stop) {
  for (MedId m : stop.med_ids) {
    if (!graph.nodes.count(m)) throw Error("unknown medicine in stop list");
  }
  PruneResult r;
  r.report.nodes_before = graph.nodes.size();
  r.report.edges_before = graph.edges.size();
  r.report.removed.assign(stop.med_ids.begin(), stop.med_ids.end());
  for (const auto& [id, f] : graph.nodes) {
    if (!stop.med_ids.count(id)) r.graph.nodes.emplace(id, f);
  }
  std::set<MedId> touched;
  for (const auto& [key, count] : graph.edges) {
    if (stop.med_ids.count(key.first) || stop.med_ids.count(key.second)) continue;
    r.graph.edges.emplace_hint(r.graph.edges.end(), key, count);
    touched.insert(key.first);
    touched.insert(key.second);
  }
  r.report.nodes_after = r.graph.nodes.size();
  r.report.edges_after = r.graph.edges.size();
  r.report.isolated_after = r.graph.nodes.size() - touched.size();
  return r;
}

JaccardRatio jaccard_similarity(const TransactionDB& db, MedId a, MedId b) {
  if (!db.contains(a) || !db.contains(b)) throw Error("unknown med_id in jaccard_similarity");
  JaccardRatio r;
  for (const auto& t : db.transactions()) {
    bool has_a = std::binary_search(t.begin(), t.end(), a);
    bool has_b = a == b ? has_a : std::binary_search(t.begin(), t.end(), b);
    if (has_a && has_b) ++r.intersection;
    if (has_a || has_b) ++r.union_size;
  }
  return r;
}

double SimGraph::weight(MedId a, MedId b) const {
  auto it = edges.find(make_pair_key(a, b));
  return it == edges.end() ? 0.0 : it->second;
}

SimGraph rebuild_jaccard_graph(const TransactionDB& db, const CoGraph& pruned, double min_jaccard) {
  if (!(min_jaccard >= 0.0 && min_jaccard <= 1.0)) throw Error("min_jaccard must lie in [0, 1]");
  SimGraph g;
  for (const auto& [id, f] : pruned.nodes) {
    if (!db.contains(id)) throw Error("pruned graph references unknown medicine");
    g.nodes.push_back(id);
  }
  // A prescription containing a surviving medicine still contains it after
  // stop medicines are deleted, so catalog frequencies give |Pa| directly.
  for (const auto& [key, co] : pruned.edges) {
    if (co == 0) continue;
    JaccardRatio r{co, db.medicine(key.first).frequency + db.medicine(key.second).frequency - co};
    double j = r.value();
    if (j >= min_jaccard && j > 0.0) g.edges.emplace_hint(g.edges.end(), key, j);
  }
  return g;
}

void write_edge_list(std::ostream& out, const CoGraph& graph) {
  for (const auto& [key, count] : graph.edges) out << key.first << ' ' << key.second << ' ' << count << '\n';
}

void write_edge_list(std::ostream& out, const SimGraph& graph) {
  char buf[64];
  for (const auto& [key, w] : graph.edges) {
    std::snprintf(buf, sizeof buf, "%.17g", w);
    out << key.first << ' ' << key.second << ' ' << buf << '\n';
  }
}

json prune_report_json(const PruneReport& r) {
  return {{"nodes_before", r.nodes_before}, {"nodes_after", r.nodes_after},
          {"edges_before", r.edges_before}, {"edges_after", r.edges_after},
          {"removed", r.removed},           {"isolated_after", r.isolated_after}};
}

PruneReport prune_report_from_json(const json& doc) {
  PruneReport r;
  r.nodes_before = doc.at("nodes_before").get<std::size_t>();
  r.nodes_after = doc.at("nodes_after").get<std::size_t>();
  r.edges_before = doc.at("edges_before").get<std::size_t>();
  r.edges_after = doc.at("edges_after").get<std::size_t>();
  r.removed = doc.at("removed").get<std::vector<MedId>>();
  r.isolated_after = doc.at("isolated_after").get<std::size_t>();
  return r;
}

json graph_report_json(const JenksClassification& cls, const StopList& stop, const PruneReport& r) {
  json table = {
      {"parameters", {"Number of edges", "Number of nodes"}},
      {"before", {r.edges_before, r.nodes_before}},
      {"after", {r.edges_after, r.nodes_after}},
  };
  return {{"jenks", jenks_table_json(cls)},
          {"stop_medicines", stop.med_ids},
          {"stop_classes", stop.source_classes},
          {"prune", prune_report_json(r)},
          {"prune_table", std::move(table)}};
}

}  // namespace recomed
