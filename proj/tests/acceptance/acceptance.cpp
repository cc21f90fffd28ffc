// One PASS/FAIL line per acceptance criterion. Exit status is non-zero if
// any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "cli.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "recomed/atc.hpp"
#include "recomed/model.hpp"
#include "recomed/recommend.hpp"
#include "recomed/service.hpp"
#include "recomed/synth.hpp"
#include "recomed/text.hpp"

using namespace recomed;
using nlohmann::json;

namespace {

// Tolerances and budgets.
constexpr int kAprioriDbs = 200;
constexpr double kAprioriBudgetSec = 60.0;
constexpr double kTable1Support = 0.0015;
constexpr double kTable1Lift = 13.17;
constexpr double kTable1LiftTol = 0.01;
constexpr int kJenksCases = 500;
constexpr double kJenksRelTol = 1e-9;
constexpr int kPruneCorpora = 50;
constexpr int kJaccardPairs = 1000;
constexpr double kTwoTriangleQ = 0.5;
constexpr double kModularityTol = 1e-9;
constexpr int kLouvainSeeds = 100;
constexpr int kLouvainMinGood = 95;
constexpr double kLouvainMinAri = 0.9;
constexpr double kLouvainBudgetSec = 30.0;
constexpr int kDbscanGraphs = 100;
constexpr int kDbscanShuffles = 100;
constexpr double kE2eMinAri = 0.9;
constexpr double kE2eMinPurity = 0.95;
constexpr double kE2eBudgetSec = 120.0;
constexpr double kTable7Accuracy = 29.0 / 30.0;
constexpr double kTable7Tol = 1e-9;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Outcome()>& check) {
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  failures += !o.pass;
  std::cout << (o.pass ? "PASS" : "FAIL") << "  " << name << "  " << o.detail << std::endl;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::vector<oracle::Tx> oracle_txs(const TransactionDB& db) {
  std::vector<oracle::Tx> v;
  for (const auto& t : db.transactions()) v.emplace_back(t.begin(), t.end());
  return v;
}

Labeling labeling(const std::map<MedId, std::size_t>& m) {
  Labeling l;
  for (const auto& [k, v] : m) l[k] = static_cast<std::int64_t>(v);
  return l;
}

Outcome apriori_oracle() {
  Rng rng(20240601);
  const double supports[] = {0.05, 0.1, 0.25, 0.5};
  auto t0 = Clock::now();
  std::size_t itemsets = 0, rules = 0;
  for (int i = 0; i < kAprioriDbs; ++i) {
    auto db = fixture::random_db(rng, 200, 12, 0.15 + 0.3 * uniform_unit(rng));
    double ms = supports[i % 4];
    double mc = 0.5 + 0.5 * uniform_unit(rng);
    auto txs = oracle_txs(db);
    auto counts = oracle::count_table(txs, static_cast<std::uint32_t>(db.catalog().size()));
    auto want = oracle::frequent_itemsets(counts, db.size(), ms, 64);
    auto got = frequent_itemsets(db, ms, std::nullopt);
    if (got.size() != want.size()) return {false, "db " + std::to_string(i) + ": itemset count differs"};
    for (std::size_t j = 0; j < got.size(); ++j) {
      if (got[j].items != std::vector<MedId>(want[j].items.begin(), want[j].items.end()) ||
          got[j].count != want[j].count ||
          got[j].support != static_cast<double>(want[j].count) / static_cast<double>(db.size())) {
        return {false, "db " + std::to_string(i) + ": itemset " + std::to_string(j) + " differs"};
      }
    }
    auto rs = derive_rules(got, db, {ms, mc});
    auto wr = oracle::rules(counts, db.size(), want, ms, mc);
    if (rs.rules.size() != wr.size()) return {false, "db " + std::to_string(i) + ": rule count differs"};
    for (std::size_t j = 0; j < wr.size(); ++j) {
      const auto& a = rs.rules[j];
      const auto& b = wr[j];
      bool same = a.antecedent == std::vector<MedId>(b.antecedent.begin(), b.antecedent.end()) &&
                  a.consequent == std::vector<MedId>(b.consequent.begin(), b.consequent.end()) &&
                  a.count == b.count && a.antecedent_count == b.antecedent_count &&
                  a.consequent_count == b.consequent_count && a.support == b.support &&
                  a.confidence == b.confidence && a.lift == b.lift &&
                  (a.strength == RuleStrength::Strong) == b.strong;
      if (!same) return {false, "db " + std::to_string(i) + ": rule " + std::to_string(j) + " differs"};
    }
    itemsets += got.size();
    rules += wr.size();
  }
  double secs = seconds_since(t0);
  return {secs < kAprioriBudgetSec, std::to_string(kAprioriDbs) + " dbs, " + std::to_string(itemsets) + " itemsets, " +
                                        std::to_string(rules) + " rules exact; " + fmt("%.2f", secs) + " s (< 60 s)"};
}

Outcome table1() {
  auto db = fixture::table1_db();
  auto rs = derive_rules(frequent_itemsets(db, 0.001), db, {});
  auto p = db.find_by_name(fixture::kProcaine).at(0);
  auto b = db.find_by_name(fixture::kBenzathine).at(0);
  auto w = db.find_by_name(fixture::kWater).at(0);
  std::vector<MedId> ante{std::min(p, b), std::max(p, b)};
  for (const auto& r : rs.rules) {
    if (r.antecedent != ante || r.consequent != std::vector<MedId>{w}) continue;
    bool ok = r.support == kTable1Support && r.confidence == 1.0 && std::abs(r.lift - kTable1Lift) <= kTable1LiftTol;
    return {ok, "support " + fmt("%.17g", r.support) + ", confidence " + fmt("%.17g", r.confidence) + ", lift " +
                    fmt("%.6f", r.lift) + " (13.17 +- 0.01), " + to_string(r.strength)};
  }
  return {false, "rule not mined"};
}

Outcome jenks_optimality() {
  Rng rng(77);
  for (int i = 0; i < kJenksCases; ++i) {
    std::size_t n = 1 + uniform_below(rng, 15);
    std::vector<double> v(n);
    std::uint64_t range = bernoulli(rng, 0.5) ? 8 : 1000;
    for (auto& x : v) x = static_cast<double>(1 + uniform_below(rng, range));
    std::size_t distinct = std::set<double>(v.begin(), v.end()).size();
    std::size_t k = 1 + uniform_below(rng, std::min<std::size_t>(4, distinct));
    auto c = jenks_breaks(v, k);
    auto opt = oracle::jenks_exhaustive(v, k);
    std::size_t total = 0;
    for (const auto& cl : c.classes) total += cl.member_count;
    std::vector<double> sum(k, 0), cnt(k, 0);
    for (std::size_t j = 0; j < n; ++j) {
      sum[c.assignment[j]] += v[j];
      cnt[c.assignment[j]] += 1;
    }
    double ssd = 0;
    for (std::size_t j = 0; j < n; ++j) {
      double m = sum[c.assignment[j]] / cnt[c.assignment[j]];
      ssd += (v[j] - m) * (v[j] - m);
    }
    bool contiguous = true;
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b < n; ++b) {
        if (v[a] < v[b] && c.assignment[a] > c.assignment[b]) contiguous = false;
      }
    }
    if (total != n || !contiguous || std::abs(ssd - opt.best) > kJenksRelTol * std::max(1.0, opt.best)) {
      return {false, "case " + std::to_string(i) + ": ssd " + fmt("%.12g", ssd) + " vs " + fmt("%.12g", opt.best)};
    }
  }
  return {true, std::to_string(kJenksCases) + " cases (n <= 15, k <= 4) match the exhaustive minimizer; counts sum to n"};
}

Outcome pruning_bookkeeping() {
  Rng rng(4242);
  bool layout = true;
  for (int i = 0; i < kPruneCorpora; ++i) {
    auto db = fixture::random_db(rng, 150, 14, 0.25);
    auto g = build_cooccurrence_graph(db);
    auto values = g.frequency_values();
    std::size_t distinct = std::set<double>(values.begin(), values.end()).size();
    if (distinct < 2) continue;
    std::size_t k = std::min<std::size_t>(5, distinct);
    auto cls = jenks_breaks(values, k);
    std::size_t top = 1 + uniform_below(rng, k - 1);
    auto stop = select_stop_medicines(g, cls, top);
    auto pr = prune_graph(g, stop);

    // Oracle: delete stop medicines from every transaction and recount.
    std::map<MedId, std::uint64_t> nodes;
    std::map<NodePair, std::uint64_t> edges;
    for (const auto& e : db.catalog()) {
      if (!stop.med_ids.count(e.med_id)) nodes[e.med_id] = 0;
    }
    for (const auto& t : db.transactions()) {
      std::vector<MedId> kept;
      for (MedId m : t) {
        if (!stop.med_ids.count(m)) kept.push_back(m);
      }
      for (MedId m : kept) ++nodes[m];
      for (std::size_t a = 0; a < kept.size(); ++a) {
        for (std::size_t b = a + 1; b < kept.size(); ++b) ++edges[{kept[a], kept[b]}];
      }
    }
    std::size_t incident = 0;
    for (const auto& [e, c] : g.edges) incident += stop.med_ids.count(e.first) || stop.med_ids.count(e.second);
    const auto& r = pr.report;
    bool arithmetic = r.nodes_after == r.nodes_before - r.removed.size() &&
                      r.edges_after == r.edges_before - incident && r.nodes_before == g.nodes.size() &&
                      r.edges_before == g.edges.size() && r.removed.size() == stop.med_ids.size();
    if (pr.graph.nodes != nodes || pr.graph.edges != edges || !arithmetic) {
      return {false, "corpus " + std::to_string(i) + " differs from the recount"};
    }
    auto table = graph_report_json(cls, stop, r)["prune_table"];
    layout = layout && table["before"] == json::array({r.edges_before, r.nodes_before}) &&
             table["after"] == json::array({r.edges_after, r.nodes_after});
  }
  return {layout, std::to_string(kPruneCorpora) + " corpora equal the stop-deleted recount; report arithmetic exact" +
                      std::string(layout ? "; edges/nodes before/after table emitted" : "; table layout wrong")};
}

Outcome jaccard_properties() {
  Rng rng(555);
  int pairs = 0;
  while (pairs < kJaccardPairs) {
    auto db = fixture::random_db(rng, 100, 10, 0.3);
    auto txs = oracle_txs(db);
    auto n_meds = db.catalog().size();
    for (int j = 0; j < 50 && pairs < kJaccardPairs; ++j, ++pairs) {
      MedId a = static_cast<MedId>(uniform_below(rng, n_meds));
      MedId b = static_cast<MedId>(uniform_below(rng, n_meds));
      auto ab = jaccard_similarity(db, a, b);
      auto ba = jaccard_similarity(db, b, a);
      auto [inter, uni] = oracle::jaccard(txs, a, b);
      double numerator = ab.value() * static_cast<double>(ab.union_size);
      bool ok = ab.value() == ba.value() && ab.value() >= 0 && ab.value() <= 1 &&
                jaccard_similarity(db, a, a).value() == 1.0 && ab.intersection == inter && ab.union_size == uni &&
                std::abs(numerator - std::round(numerator)) < 1e-9;
      if (!ok) return {false, "pair " + std::to_string(pairs) + " failed"};
    }
  }
  return {true, std::to_string(kJaccardPairs) + " pairs: symmetric, in [0,1], identity 1, integer numerator, oracle exact"};
}

Outcome louvain_desk_scale() {
  auto t0 = Clock::now();
  SimGraph tri;
  tri.nodes = {0, 1, 2, 3, 4, 5};
  tri.edges = {{{0, 1}, 1}, {{0, 2}, 1}, {{1, 2}, 1}, {{3, 4}, 1}, {{3, 5}, 1}, {{4, 5}, 1}};
  auto r = louvain_detailed(tri, {}, {});
  oracle::WeightedEdges e;
  for (const auto& [k, w] : tri.edges) e[{k.first, k.second}] = w;
  double best = -1;
  std::vector<std::uint32_t> nodes{0, 1, 2, 3, 4, 5};
  oracle::for_each_partition(nodes, [&](const std::map<std::uint32_t, int>& l) {
    best = std::max(best, oracle::modularity(nodes, e, l, 1.0));
  });
  bool triangles = r.partition.communities == std::vector<std::vector<MedId>>{{0, 1, 2}, {3, 4, 5}} &&
                   std::abs(r.modularity - kTwoTriangleQ) <= kModularityTol &&
                   std::abs(best - kTwoTriangleQ) <= kModularityTol;

  int good = 0;
  double worst = 1.0;
  for (int seed = 0; seed < kLouvainSeeds; ++seed) {
    auto pg = fixture::planted_graph(6, 10, 1000 + static_cast<std::uint64_t>(seed));
    auto p = louvain(pg.graph, {}, 1.0, static_cast<std::uint64_t>(seed));
    double ari = adjusted_rand_index(labeling(pg.group), labeling(p.assignment));
    worst = std::min(worst, ari);
    good += ari >= kLouvainMinAri;
  }
  double secs = seconds_since(t0);
  bool ok = triangles && good >= kLouvainMinGood && secs < kLouvainBudgetSec;
  return {ok, "two triangles Q=" + fmt("%.12f", r.modularity) + " (exhaustive best " + fmt("%.12f", best) + ")" +
                  (triangles ? "" : " WRONG") + "; planted 6x10 ARI >= 0.9 in " + std::to_string(good) + "/" +
                  std::to_string(kLouvainSeeds) + " seeds (min " + fmt("%.4f", worst) + "); " + fmt("%.2f", secs) +
                  " s (< 30 s)"};
}

Outcome dbscan_checks() {
  Rng rng(909);
  for (int i = 0; i < kDbscanGraphs; ++i) {
    auto pg = fixture::planted_graph(3, 6, 300 + static_cast<std::uint64_t>(i));
    std::set<MedId> isolated;
    std::size_t extra = 1 + uniform_below(rng, 4);
    for (std::size_t j = 0; j < extra; ++j) {
      MedId id = static_cast<MedId>(pg.graph.nodes.size());
      pg.graph.nodes.push_back(id);
      isolated.insert(id);
    }
    double eps = 0.1 + 0.9 * uniform_unit(rng);
    std::size_t min_pts = 2 + uniform_below(rng, 4);
    auto o = dbscan_outliers(pg.graph, eps, min_pts);
    for (MedId id : isolated) {
      if (!o.med_ids.count(id)) return {false, "graph " + std::to_string(i) + ": isolated node not flagged"};
    }
  }
  // Sparse graph so that noise, border and core points all occur.
  auto pg = fixture::planted_graph(4, 8, 7);
  for (auto it = pg.graph.edges.begin(); it != pg.graph.edges.end();) {
    it = bernoulli(rng, 0.75) ? pg.graph.edges.erase(it) : std::next(it);
  }
  auto base = dbscan_outliers(pg.graph, 0.3, 3);
  for (int s = 0; s < kDbscanShuffles; ++s) {
    std::vector<MedId> perm(pg.graph.nodes);
    shuffle(std::span<MedId>(perm), rng);
    SimGraph h;
    for (MedId v : pg.graph.nodes) h.nodes.push_back(perm[v]);
    std::sort(h.nodes.begin(), h.nodes.end());
    for (const auto& [e, w] : pg.graph.edges) h.edges[make_pair_key(perm[e.first], perm[e.second])] = w;
    std::set<MedId> mapped;
    for (MedId v : base.med_ids) mapped.insert(perm[v]);
    if (dbscan_outliers(h, 0.3, 3).med_ids != mapped) return {false, "shuffle " + std::to_string(s) + " changed noise"};
  }
  return {true, "isolated nodes flagged in " + std::to_string(kDbscanGraphs) + " graphs; noise set (" +
                    std::to_string(base.med_ids.size()) + " of " + std::to_string(pg.graph.nodes.size()) +
                    ") invariant under " + std::to_string(kDbscanShuffles) + " id permutations"};
}

Outcome end_to_end() {
  auto t0 = Clock::now();
  SynthConfig sc;  // 10,000 prescriptions, 6 groups x 10, 3 stop medicines, p_stop 0.5
  sc.seed = 2024;
  auto corpus = generate_synthetic(sc);
  std::istringstream atc_in(corpus.atc_table);
  auto atc = load_atc_table(atc_in).index;
  auto art = build_model(corpus.db, atc, fixture::synthetic_config());
  auto ev = evaluate_model(art.model, corpus.truth, 1);
  double secs = seconds_since(t0);
  double purity = ev.purity.weighted_mean.value_or(0.0);
  bool ok = ev.stop_list_exact && ev.ari >= kE2eMinAri && purity >= kE2eMinPurity && secs < kE2eBudgetSec;
  return {ok, std::string("stop list ") + (ev.stop_list_exact ? "exact" : "WRONG") + " (" +
                  std::to_string(ev.found_stop.size()) + " found), ARI " + fmt("%.4f", ev.ari) + ", level-1 purity " +
                  fmt("%.4f", purity) + ", " + std::to_string(art.model.partition.communities.size()) +
                  " communities, " + std::to_string(art.model.outliers.med_ids.size()) + " outliers; " +
                  fmt("%.2f", secs) + " s (< 120 s)"};
}

Outcome atc_fixture() {
  auto idx = load_atc_table_file(std::string(RECOMED_DATA_DIR) + "/atc_fixture.tsv").index;
  const std::vector<std::pair<std::string, std::vector<std::string>>> published{
      {"ACETAZOLAMIDE 250MG TAB", {"S01EC01"}},
      {"ATROPINE SULFATE 0.5% 10ML OPH DROP", {"S01FA01"}},
      {"PREDNISOLONE ACETATE 1% OPH DROP", {"S01BA04", "S01CB02", "S02BA03", "S03BA02"}},
      {"TIMOLOL MALEATE 0.5% 5ML OPH DROP", {"S01ED01"}},
      {"LATANOPROST 50MCG/ML OPH DROP", {"S01EE01"}},
      {"prednisolone 5mg tab", {"C05AA04"}},
      {"propranolol hcl 10mg tab", {"C07AA05"}},
      {"metoprolol tartrate 50mg tab", {"C07AB02"}},
      {"carvedilol 6.25mg tab", {"C07AG02"}},
      {"losartan potassium 25mg tab", {"C09CA01"}},
      {"diltiazem hcl sr 120mg tab", {"C05AE03", "C08DB01"}},
  };
  std::size_t ok = 0;
  std::string first_bad;
  for (MedId i = 0; i < published.size(); ++i) {
    const auto& [name, codes] = published[i];
    MedicineCatalogEntry e{i, name, normalize_name(name), "", 1};
    auto a = match_medicine(e, idx);
    if (a.matched && code_strings(a.codes) == codes) {
      ++ok;
    } else if (first_bad.empty()) {
      first_bad = name;
    }
  }
  bool pass = ok == published.size();
  return {pass, std::to_string(ok) + "/" + std::to_string(published.size()) +
                    " published medicines map to their codes (incl. the 4-code prednisolone acetate row)" +
                    (pass ? "" : "; first mismatch: " + first_bad)};
}

Outcome table7() {
  auto sample = load_tagged_sample_file(std::string(RECOMED_DATA_DIR) + "/table7.csv");
  double acc = evaluate_tags(sample);
  return {sample.rows.size() == 30 && std::abs(acc - kTable7Accuracy) <= kTable7Tol,
          std::to_string(sample.rows.size()) + " rows, accuracy " + fmt("%.10f", acc) + " (29/30 +- 1e-9)"};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

Outcome determinism() {
  namespace fs = std::filesystem;
  auto dir = fs::temp_directory_path() / "recomed_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto path = [&](const char* name) { return (dir / name).string(); };
  std::istringstream none;
  std::ostringstream sink, err;

  SynthConfig sc;
  sc.seed = 99;
  auto corpus = generate_synthetic(sc);
  {
    std::ofstream rx(path("rx.jsonl"), std::ios::binary);
    write_prescriptions_jsonl(rx, corpus.records);
    std::ofstream atc(path("atc.tsv"), std::ios::binary);
    atc << corpus.atc_table;
  }
  auto build = [&](const char* out) {
    return cli_run({"build", "--input", path("rx.jsonl"), "--atc", path("atc.tsv"), "--out", path(out), "--jenks-k", "3",
                    "--stop-classes", "1", "--eps", "0.9", "--seed", "7"},
                   none, sink, err);
  };
  if (build("m1.json") != 0 || build("m2.json") != 0) return {false, "cli build failed: " + err.str()};
  std::string m1 = slurp(path("m1.json")), m2 = slurp(path("m2.json"));
  bool bytes_equal = m1 == m2 && !m1.empty();

  Service service(load_model_snapshot(path("m1.json")));
  HttpServer server(service);
  int port = server.bind("127.0.0.1", 0);
  std::thread th([&] { server.listen(); });
  httplib::Client client("127.0.0.1", port);

  const auto& model = service.snapshot()->artifact.model;
  std::size_t queries = 0, identical = 0;
  for (MedId id = 0; id < model.catalog.size(); id += 3) {
    if (model.stoplist.med_ids.count(id)) continue;
    std::vector<std::string> meds{model.catalog[id].name};
    if (id + 1 < model.catalog.size()) meds.push_back(model.catalog[id + 1].name);
    std::ostringstream out;
    std::string joined = meds.size() > 1 ? meds[0] + ";" + meds[1] : meds[0];
    int code = cli_run({"recommend", "--model", path("m1.json"), "--meds", joined, "-k", "8", "--json"}, none, out, err);
    auto res = client.Post("/api/v1/recommend", json{{"medicines", meds}, {"k", 8}}.dump(), "application/json");
    ++queries;
    if (code == 0 && res && res->status == 200 &&
        json::parse(out.str())["recommendations"] == json::parse(res->body)["recommendations"]) {
      ++identical;
    }
  }
  server.stop();
  th.join();
  fs::remove_all(dir);
  bool ok = bytes_equal && queries > 0 && identical == queries;
  return {ok, std::string("artifacts ") + (bytes_equal ? "byte-identical" : "DIFFER") + " (" +
                  std::to_string(m1.size()) + " bytes); CLI == HTTP API on " + std::to_string(identical) + "/" +
                  std::to_string(queries) + " queries"};
}

}  // namespace

int main() {
  report("apriori-oracle", apriori_oracle);
  report("table1-metrics", table1);
  report("jenks-optimality", jenks_optimality);
  report("pruning-bookkeeping", pruning_bookkeeping);
  report("jaccard-properties", jaccard_properties);
  report("louvain-desk-scale", louvain_desk_scale);
  report("dbscan-outliers", dbscan_checks);
  report("e2e-synthetic", end_to_end);
  report("atc-fixture", atc_fixture);
  report("table7-accuracy", table7);
  report("determinism", determinism);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
