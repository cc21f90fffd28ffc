#include "recomed/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>

#include "recomed/atc.hpp"
#include "recomed/error.hpp"
#include "recomed/random.hpp"
#include "recomed/text.hpp"

namespace recomed {

using nlohmann::json;

void SynthConfig::validate() const {
  if (n_groups < 1 || meds_per_group < 1 || n_prescriptions < 1) throw Error("synth: counts must be positive");
  if (n_groups > kAnatomicalGroups.size()) throw Error("synth: at most 14 groups (one per anatomical letter)");
  if (meds_per_group > 99) throw Error("synth: at most 99 medicines per group");
  if (!(p_stop >= 0.0 && p_stop <= 1.0) || !(p_noise >= 0.0 && p_noise <= 1.0)) {
    throw Error("synth: probabilities must lie in [0, 1]");
  }
  if (min_items > max_items) throw Error("synth: min_items exceeds max_items");
}

namespace {

std::string two_digits(std::size_t v) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%02zu", v);
  return buf;
}

std::string group_med_name(std::size_t g, std::size_t j) {
  return "SYN " + std::string(1, kAnatomicalGroups[g]) + two_digits(g + 1) + " MED " + two_digits(j + 1) + " TAB";
}

std::string group_med_code(std::size_t g, std::size_t j) {
  return std::string(1, kAnatomicalGroups[g]) + two_digits(g + 1) + "AA" + two_digits(j + 1);
}

}  // namespace

SyntheticCorpus generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  std::vector<std::string> warnings;
  std::size_t lo = std::min(cfg.min_items, cfg.meds_per_group);
  std::size_t hi = std::min(cfg.max_items, cfg.meds_per_group);
  if (lo < 1) {
    warnings.push_back("min_items clamped to 1 so no prescription is empty");
    lo = 1;
    hi = std::max(hi, lo);
  }
  if (cfg.max_items > cfg.meds_per_group) warnings.push_back("max_items clamped to meds_per_group");

  std::vector<std::vector<RawItem>> group_items(cfg.n_groups);
  for (std::size_t g = 0; g < cfg.n_groups; ++g) {
    for (std::size_t j = 0; j < cfg.meds_per_group; ++j) {
      group_items[g].push_back({group_med_name(g, j), "GEN-G" + two_digits(g + 1) + "-" + two_digits(j + 1), 1.0});
    }
  }
  std::vector<RawItem> stop_items, noise_items;
  for (std::size_t s = 0; s < cfg.n_stop; ++s) {
    stop_items.push_back({"SYN STOP " + two_digits(s + 1) + " AMP", "GEN-S-" + two_digits(s + 1), 1.0});
  }
  for (std::size_t s = 0; s < cfg.n_noise_meds; ++s) {
    noise_items.push_back({"SYN NOISE " + two_digits(s + 1) + " CAP", "GEN-N-" + two_digits(s + 1), 1.0});
  }

  Rng rng(cfg.seed);
  std::vector<RawPrescriptionRecord> records;
  records.reserve(cfg.n_prescriptions);
  std::vector<std::size_t> order(cfg.meds_per_group);
  for (std::size_t i = 0; i < cfg.n_prescriptions; ++i) {
    RawPrescriptionRecord rec;
    rec.rx_id = "syn-" + std::to_string(i + 1);
    rec.pharmacy = "synthetic";
    rec.location = "synthetic";
    std::size_t g = static_cast<std::size_t>(uniform_below(rng, cfg.n_groups));
    std::size_t take = lo + static_cast<std::size_t>(uniform_below(rng, hi - lo + 1));
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t t = 0; t < take; ++t) {
      std::size_t j = t + static_cast<std::size_t>(uniform_below(rng, order.size() - t));
      std::swap(order[t], order[j]);
      rec.items.push_back(group_items[g][order[t]]);
    }
    for (const auto& s : stop_items) {
      if (bernoulli(rng, cfg.p_stop)) rec.items.push_back(s);
    }
    for (const auto& s : noise_items) {
      if (bernoulli(rng, cfg.p_noise)) rec.items.push_back(s);
    }
    records.push_back(std::move(rec));
  }

  TransactionDB db = build_transaction_db(records);
  GroundTruth truth;
  for (std::size_t g = 0; g < cfg.n_groups; ++g) {
    for (const auto& item : group_items[g]) {
      for (MedId id : db.find_by_name(item.name)) truth.group_of.emplace(id, g);
    }
  }
  for (const auto& s : stop_items) {
    for (MedId id : db.find_by_name(s.name)) truth.stop_set.insert(id);
  }
  for (const auto& s : noise_items) {
    for (MedId id : db.find_by_name(s.name)) truth.noise_set.insert(id);
  }

  std::string atc = "key\tcode\tdescription\n";
  for (std::size_t g = 0; g < cfg.n_groups; ++g) {
    for (std::size_t j = 0; j < cfg.meds_per_group; ++j) {
      atc += normalize_name(group_med_name(g, j)) + "\t" + group_med_code(g, j) + "\tsynthetic group " +
             std::to_string(g + 1) + "\n";
    }
  }
  return {std::move(records), std::move(db), std::move(truth), std::move(atc), std::move(warnings)};
}

json truth_to_json(const TransactionDB& db, const GroundTruth& truth) {
  json groups = json::object();
  for (const auto& [id, g] : truth.group_of) groups[db.medicine(id).normalized_name] = g;
  std::vector<std::string> stop, noise;
  for (MedId id : truth.stop_set) stop.push_back(db.medicine(id).normalized_name);
  for (MedId id : truth.noise_set) noise.push_back(db.medicine(id).normalized_name);
  return {{"format", "recomed-truth/1"}, {"groups", std::move(groups)}, {"stop", stop}, {"noise", noise}};
}

GroundTruth truth_from_json(const json& doc, const std::vector<MedicineCatalogEntry>& catalog) {
  if (doc.value("format", "") != "recomed-truth/1") throw Error("unsupported ground-truth format");
  std::map<std::string, std::vector<MedId>> by_name;
  for (const auto& e : catalog) by_name[e.normalized_name].push_back(e.med_id);
  GroundTruth t;
  for (const auto& [name, g] : doc.at("groups").items()) {
    auto it = by_name.find(normalize_name(name));
    if (it == by_name.end()) continue;
    for (MedId id : it->second) t.group_of.emplace(id, g.get<std::size_t>());
  }
  auto read_set = [&](const char* key, std::set<MedId>& out) {
    for (const auto& n : doc.at(key)) {
      auto it = by_name.find(normalize_name(n.get<std::string>()));
      if (it != by_name.end()) out.insert(it->second.begin(), it->second.end());
    }
  };
  read_set("stop", t.stop_set);
  read_set("noise", t.noise_set);
  return t;
}

double adjusted_rand_index(const Labeling& a, const Labeling& b) {
  if (a.size() != b.size()) throw Error("labelings cover different element sets");
  std::map<std::pair<std::int64_t, std::int64_t>, std::uint64_t> table;
  std::map<std::int64_t, std::uint64_t> rows, cols;
  for (auto ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib) {
    if (ia->first != ib->first) throw Error("labelings cover different element sets");
    ++table[{ia->second, ib->second}];
    ++rows[ia->second];
    ++cols[ib->second];
  }
  auto pairs = [](std::uint64_t x) { return static_cast<double>(x) * static_cast<double>(x - (x > 0)) / 2.0; };
  double index = 0, sum_rows = 0, sum_cols = 0;
  for (const auto& [k, n] : table) index += pairs(n);
  for (const auto& [k, n] : rows) sum_rows += pairs(n);
  for (const auto& [k, n] : cols) sum_cols += pairs(n);
  const double total = pairs(a.size());
  if (total == 0) return 1.0;
  const double expected = sum_rows * sum_cols / total;
  const double max_index = 0.5 * (sum_rows + sum_cols);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

PurityReport atc_purity(const ClusterModel& model, int level) {
  if (level < 1 || level > 5) throw Error("ATC level must lie in 1..5");
  PurityReport report;
  report.level = level;
  double weighted = 0;
  std::size_t matched_total = 0;
  for (std::size_t c = 0; c < model.partition.communities.size(); ++c) {
    std::vector<std::set<std::string>> prefixes;
    std::map<std::string, std::size_t> votes;
    for (MedId id : model.partition.communities[c]) {
      const auto& ann = model.annotations.at(id);
      if (!ann.matched) continue;
      std::set<std::string> p;
      for (const auto& code : ann.codes) p.insert(atc_level(code, level));
      for (const auto& s : p) ++votes[s];
      prefixes.push_back(std::move(p));
    }
    if (prefixes.empty()) continue;
    std::string modal;
    std::size_t best = 0;
    for (const auto& [prefix, n] : votes) {
      if (n > best) {
        best = n;
        modal = prefix;
      }
    }
    std::size_t hits = 0;
    for (const auto& p : prefixes) hits += p.count(modal);
    double purity = static_cast<double>(hits) / static_cast<double>(prefixes.size());
    report.per_cluster[c] = purity;
    weighted += purity * static_cast<double>(prefixes.size());
    matched_total += prefixes.size();
  }
  if (matched_total > 0) report.weighted_mean = weighted / static_cast<double>(matched_total);
  return report;
}

TaggedSample load_tagged_sample(std::istream& in) {
  TaggedSample sample;
  std::string line;
  bool header = true;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    auto f = split_delimited(line, ',');
    if (f.size() < 4) throw Error("tagged sample line " + std::to_string(line_no) + ": expected 5 columns");
    TaggedRow row;
    row.index = std::stoul(std::string(trim(f[0])));
    row.id = std::string(trim(f[1]));
    row.medicine = std::string(trim(f[2]));
    std::string tag(trim(f[3]));
    if (tag != "0" && tag != "1") throw Error("tagged sample line " + std::to_string(line_no) + ": tag must be 0 or 1");
    row.tag = tag == "1" ? 1 : 0;
    if (f.size() > 4) {
      std::string cell = f[4];
      for (char& ch : cell) {
        if (ch == ',' || ch == ';') ch = ' ';
      }
      std::size_t pos = 0;
      while (pos < cell.size()) {
        while (pos < cell.size() && cell[pos] == ' ') ++pos;
        std::size_t end = cell.find(' ', pos);
        if (end == std::string::npos) end = cell.size();
        if (end > pos) {
          auto code = AtcCode::parse(cell.substr(pos, end - pos));
          if (!code) throw Error("tagged sample line " + std::to_string(line_no) + ": malformed ATC code");
          row.codes.push_back(*code);
        }
        pos = end;
      }
    }
    sample.rows.push_back(std::move(row));
  }
  return sample;
}

TaggedSample load_tagged_sample_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  return load_tagged_sample(in);
}

double evaluate_tags(const TaggedSample& sample) {
  if (sample.rows.empty()) throw Error("empty tagged sample");
  std::size_t ones = 0;
  for (const auto& r : sample.rows) ones += r.tag == 1;
  return static_cast<double>(ones) / static_cast<double>(sample.rows.size());
}

EvaluationReport evaluate_model(const ClusterModel& model, const GroundTruth& truth, int purity_level) {
  EvaluationReport r;
  Labeling planted, found;
  std::int64_t next_singleton = -1;
  for (const auto& [id, g] : truth.group_of) {
    planted[id] = static_cast<std::int64_t>(g);
    auto it = model.partition.assignment.find(id);
    found[id] = it == model.partition.assignment.end() ? next_singleton-- : static_cast<std::int64_t>(it->second);
  }
  r.ari_elements = planted.size();
  r.ari = planted.empty() ? 0.0 : adjusted_rand_index(planted, found);
  r.purity = atc_purity(model, purity_level);
  r.planted_stop = truth.stop_set;
  r.found_stop = model.stoplist.med_ids;
  r.stop_list_exact = r.planted_stop == r.found_stop;
  return r;
}

json evaluation_to_json(const EvaluationReport& r) {
  json per_cluster = json::object();
  for (const auto& [c, p] : r.purity.per_cluster) per_cluster[std::to_string(c)] = p;
  return {{"ari", r.ari},
          {"ari_elements", r.ari_elements},
          {"purity",
           {{"level", r.purity.level},
            {"per_cluster", std::move(per_cluster)},
            {"weighted_mean", r.purity.weighted_mean ? json(*r.purity.weighted_mean) : json(nullptr)}}},
          {"stop_list_exact", r.stop_list_exact},
          {"planted_stop", r.planted_stop},
          {"found_stop", r.found_stop}};
}

}  // namespace recomed
