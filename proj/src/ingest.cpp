#include "recomed/ingest.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <tuple>

#include "recomed/error.hpp"
#include "recomed/fingerprint.hpp"
#include "recomed/random.hpp"
#include "recomed/text.hpp"

namespace recomed {

using nlohmann::json;

namespace {

const json* field(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

std::optional<std::string> optional_string(const json& obj, const char* key, std::string& error) {
  const json* v = field(obj, key);
  if (!v) return std::string();
  if (!v->is_string()) {
    error = std::string("schema: ") + key + " must be a string";
    return std::nullopt;
  }
  return v->get<std::string>();
}

// Returns the record or leaves a rejection reason in `error`.
std::optional<RawPrescriptionRecord> record_from_json(const json& doc, std::string& error) {
  if (!doc.is_object()) {
    error = "schema: line is not an object";
    return std::nullopt;
  }
  RawPrescriptionRecord rec;
  const json* rx = field(doc, "rx_id");
  if (!rx || !rx->is_string() || rx->get_ref<const std::string&>().empty()) {
    error = "schema: rx_id must be a non-empty string";
    return std::nullopt;
  }
  rec.rx_id = rx->get<std::string>();
  auto pharmacy = optional_string(doc, "pharmacy", error);
  if (!pharmacy) return std::nullopt;
  auto location = optional_string(doc, "location", error);
  if (!location) return std::nullopt;
  rec.pharmacy = std::move(*pharmacy);
  rec.location = std::move(*location);

  const json* items = field(doc, "items");
  if (!items || !items->is_array()) {
    error = "schema: items must be an array";
    return std::nullopt;
  }
  for (const json& it : *items) {
    if (!it.is_object()) {
      error = "schema: item is not an object";
      return std::nullopt;
    }
    const json* name = field(it, "name");
    const json* code = field(it, "generic_code");
    const json* qty = field(it, "quantity");
    if (!name || !name->is_string() || normalize_name(name->get<std::string>()).empty()) {
      error = "schema: item name must be a non-empty string";
      return std::nullopt;
    }
    if (!code || !code->is_string()) {
      error = "schema: item generic_code must be a string";
      return std::nullopt;
    }
    if (!qty || !qty->is_number() || qty->get<double>() < 0.0) {
      error = "schema: item quantity must be a non-negative number";
      return std::nullopt;
    }
    rec.items.push_back({name->get<std::string>(), code->get<std::string>(), qty->get<double>()});
  }
  if (rec.items.empty()) {
    error = "empty prescription";
    return std::nullopt;
  }
  return rec;
}

using MedKey = std::pair<std::string, std::string>;

MedKey key_of(const RawItem& item) {
  return {normalize_name(item.name), std::string(trim(item.generic_code))};
}

}  // namespace

ParseResult parse_prescriptions(std::istream& in) {
  ParseResult result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    ++result.report.lines_read;
    std::string error;
    std::optional<RawPrescriptionRecord> rec;
    if (trim(line).empty()) {
      error = "blank line";
    } else {
      json doc = json::parse(line, nullptr, false);
      if (doc.is_discarded()) {
        error = "parse";
      } else {
        rec = record_from_json(doc, error);
      }
    }
    if (rec) {
      ++result.report.records_ok;
      result.records.push_back(std::move(*rec));
    } else {
      ++result.report.records_rejected;
      result.report.rejection_reasons.push_back({line_no, error});
    }
  }
  if (in.bad()) throw Error("I/O failure while reading prescriptions");
  return result;
}

json record_to_json(const RawPrescriptionRecord& record) {
  json items = json::array();
  for (const auto& it : record.items) {
    items.push_back({{"name", it.name}, {"generic_code", it.generic_code}, {"quantity", it.quantity}});
  }
  return {{"rx_id", record.rx_id},
          {"pharmacy", record.pharmacy},
          {"location", record.location},
          {"items", std::move(items)}};
}

void write_prescriptions_jsonl(std::ostream& out, std::span<const RawPrescriptionRecord> records) {
  for (const auto& rec : records) out << record_to_json(rec).dump() << '\n';
}

TransactionDB::TransactionDB(std::vector<Transaction> transactions,
                             std::vector<MedicineCatalogEntry> catalog)
    : transactions_(std::move(transactions)), catalog_(std::move(catalog)) {
  if (transactions_.empty()) throw Error("empty corpus");
  for (std::size_t i = 0; i < catalog_.size(); ++i) {
    const auto& e = catalog_[i];
    if (e.med_id != i) throw Error("catalog ids must be contiguous from 0");
    if (i > 0) {
      const auto& p = catalog_[i - 1];
      if (std::tie(p.normalized_name, p.generic_code) >= std::tie(e.normalized_name, e.generic_code)) {
        throw Error("catalog keys must be unique and sorted");
      }
    }
  }
  for (const auto& t : transactions_) {
    if (t.empty()) throw Error("empty transaction");
    for (std::size_t j = 0; j < t.size(); ++j) {
      if (t[j] >= catalog_.size()) throw Error("transaction references unknown medicine");
      if (j > 0 && t[j - 1] >= t[j]) throw Error("transaction is not a sorted set");
    }
  }
  auto freq = recount_frequencies(*this);
  for (std::size_t i = 0; i < catalog_.size(); ++i) {
    if (freq[i] == 0) throw Error("catalog medicine " + catalog_[i].normalized_name + " never prescribed");
    if (freq[i] != catalog_[i].frequency) throw Error("catalog frequency mismatch for " + catalog_[i].normalized_name);
  }
}

const MedicineCatalogEntry& TransactionDB::medicine(MedId id) const {
  if (!contains(id)) throw Error("unknown med_id " + std::to_string(id));
  return catalog_[id];
}

std::vector<MedId> TransactionDB::find_by_name(std::string_view name) const {
  const std::string key = normalize_name(name);
  auto lo = std::lower_bound(catalog_.begin(), catalog_.end(), key,
                             [](const MedicineCatalogEntry& e, const std::string& k) { return e.normalized_name < k; });
  std::vector<MedId> out;
  for (; lo != catalog_.end() && lo->normalized_name == key; ++lo) out.push_back(lo->med_id);
  return out;
}

std::string TransactionDB::fingerprint() const { return recomed::fingerprint(db_to_json(*this).dump()); }

std::vector<std::uint64_t> recount_frequencies(const TransactionDB& db) {
  std::vector<std::uint64_t> freq(db.catalog().size(), 0);
  for (const auto& t : db.transactions()) {
    for (MedId m : t) ++freq.at(m);
  }
  return freq;
}

TransactionDB build_transaction_db(std::span<const RawPrescriptionRecord> records) {
  // Canonical key order first, so ids never depend on which record arrived first.
  std::map<MedKey, std::string> display;  // key -> smallest original spelling
  for (const auto& rec : records) {
    for (const auto& item : rec.items) {
      MedKey key = key_of(item);
      if (key.first.empty()) continue;
      std::string original(trim(item.name));
      auto [it, inserted] = display.emplace(key, original);
      if (!inserted && original < it->second) it->second = original;
    }
  }

  std::map<MedKey, MedId> ids;
  std::vector<MedicineCatalogEntry> catalog;
  for (const auto& [key, name] : display) {
    MedId id = static_cast<MedId>(catalog.size());
    ids.emplace(key, id);
    catalog.push_back({id, name, key.first, key.second, 0});
  }

  std::vector<Transaction> transactions;
  transactions.reserve(records.size());
  for (const auto& rec : records) {
    Transaction t;
    for (const auto& item : rec.items) {
      auto it = ids.find(key_of(item));
      if (it != ids.end()) t.push_back(it->second);
    }
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    if (t.empty()) continue;
    for (MedId m : t) ++catalog[m].frequency;
    transactions.push_back(std::move(t));
  }
  if (transactions.empty()) throw Error("empty corpus");
  return TransactionDB(std::move(transactions), std::move(catalog));
}

TransactionDB sample_transactions(const TransactionDB& db, std::size_t n, std::uint64_t seed) {
  if (n < 1 || n > db.size()) {
    throw Error("sample size " + std::to_string(n) + " outside [1, " + std::to_string(db.size()) + "]");
  }
  std::vector<std::size_t> idx(db.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(seed);
  // Partial Fisher-Yates: the first n slots become the sample.
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = i + static_cast<std::size_t>(uniform_below(rng, idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(n);
  std::sort(idx.begin(), idx.end());

  std::vector<std::uint64_t> freq(db.catalog().size(), 0);
  for (std::size_t i : idx) {
    for (MedId m : db.transactions()[i]) ++freq[m];
  }
  std::vector<MedId> remap(db.catalog().size(), 0);
  std::vector<MedicineCatalogEntry> catalog;
  for (const auto& e : db.catalog()) {
    if (freq[e.med_id] == 0) continue;
    remap[e.med_id] = static_cast<MedId>(catalog.size());
    auto copy = e;
    copy.med_id = remap[e.med_id];
    copy.frequency = freq[e.med_id];
    catalog.push_back(std::move(copy));
  }
  std::vector<Transaction> transactions;
  transactions.reserve(n);
  for (std::size_t i : idx) {
    Transaction t;
    for (MedId m : db.transactions()[i]) t.push_back(remap[m]);
    transactions.push_back(std::move(t));
  }
  return TransactionDB(std::move(transactions), std::move(catalog));
}

json db_to_json(const TransactionDB& db) {
  json catalog = json::array();
  for (const auto& e : db.catalog()) {
    catalog.push_back({{"med_id", e.med_id},
                       {"name", e.name},
                       {"normalized_name", e.normalized_name},
                       {"generic_code", e.generic_code},
                       {"frequency", e.frequency}});
  }
  return {{"format", kDbFormat}, {"n", db.size()}, {"catalog", std::move(catalog)}, {"transactions", db.transactions()}};
}

TransactionDB db_from_json(const json& doc) {
  try {
    if (doc.at("format").get<std::string>() != kDbFormat) throw Error("unsupported db format");
    std::vector<MedicineCatalogEntry> catalog;
    for (const auto& e : doc.at("catalog")) {
      catalog.push_back({e.at("med_id").get<MedId>(), e.at("name").get<std::string>(),
                         e.at("normalized_name").get<std::string>(), e.at("generic_code").get<std::string>(),
                         e.at("frequency").get<std::uint64_t>()});
    }
    auto transactions = doc.at("transactions").get<std::vector<Transaction>>();
    TransactionDB db(std::move(transactions), std::move(catalog));
    if (doc.contains("n") && doc.at("n").get<std::size_t>() != db.size()) throw Error("transaction count mismatch");
    return db;
  } catch (const json::exception& e) {
    throw Error(std::string("malformed db document: ") + e.what());
  }
}

void save_db(const TransactionDB& db, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << db_to_json(db).dump() << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

TransactionDB load_db(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw Error("malformed db document: " + path.string());
  return db_from_json(doc);
}

}  // namespace recomed
