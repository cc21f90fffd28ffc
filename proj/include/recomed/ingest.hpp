#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace recomed {

using MedId = std::uint32_t;

struct RawItem {
  std::string name;
  std::string generic_code;
  double quantity = 0.0;

  bool operator==(const RawItem&) const = default;
};

/// One dispensed prescription as it appears in the input feed. Pharmacy,
/// location and quantities are carried but not used by the engine.
struct RawPrescriptionRecord {
  std::string rx_id;
  std::string pharmacy;
  std::string location;
  std::vector<RawItem> items;

  bool operator==(const RawPrescriptionRecord&) const = default;
};

struct Rejection {
  std::size_t line_number = 0;
  std::string reason;
};

struct IngestReport {
  std::size_t lines_read = 0;
  std::size_t records_ok = 0;
  std::size_t records_rejected = 0;
  std::vector<Rejection> rejection_reasons;
};

struct ParseResult {
  std::vector<RawPrescriptionRecord> records;
  IngestReport report;
};

/// Reads newline-delimited prescription objects. Malformed lines are rejected
/// individually (reason "parse", "schema: ..." or "empty prescription");
/// only a failing stream throws.
ParseResult parse_prescriptions(std::istream& in);

nlohmann::json record_to_json(const RawPrescriptionRecord& record);
void write_prescriptions_jsonl(std::ostream& out, std::span<const RawPrescriptionRecord> records);

struct MedicineCatalogEntry {
  MedId med_id = 0;
  std::string name;
  std::string normalized_name;
  std::string generic_code;
  std::uint64_t frequency = 0;

  bool operator==(const MedicineCatalogEntry&) const = default;
};

/// A prescription reduced to its distinct medicines, sorted ascending.
using Transaction = std::vector<MedId>;

/// Immutable transaction database. The constructor enforces every invariant:
/// transactions are non-empty sorted sets of catalog ids, ids are contiguous
/// from zero in (normalized_name, generic_code) order, and frequencies equal
/// the number of transactions containing each medicine.
class TransactionDB {
 public:
  TransactionDB(std::vector<Transaction> transactions, std::vector<MedicineCatalogEntry> catalog);

  const std::vector<Transaction>& transactions() const noexcept { return transactions_; }
  const std::vector<MedicineCatalogEntry>& catalog() const noexcept { return catalog_; }
  std::size_t size() const noexcept { return transactions_.size(); }
  const MedicineCatalogEntry& medicine(MedId id) const;
  bool contains(MedId id) const noexcept { return id < catalog_.size(); }

  // Catalog ids whose normalized name equals normalize_name(name).
  std::vector<MedId> find_by_name(std::string_view name) const;

  std::string fingerprint() const;

  bool operator==(const TransactionDB&) const = default;

 private:
  std::vector<Transaction> transactions_;
  std::vector<MedicineCatalogEntry> catalog_;
};

/// Collapses duplicate medicines within a record and assigns ids
/// deterministically; the result does not depend on record order beyond the
/// transaction order itself. Throws "empty corpus" if nothing usable remains.
TransactionDB build_transaction_db(std::span<const RawPrescriptionRecord> records);

/// Uniform sample of n transactions without replacement, seeded. Source order
/// is preserved; medicines absent from the sample are dropped and ids are
/// reassigned densely.
TransactionDB sample_transactions(const TransactionDB& db, std::size_t n, std::uint64_t seed);

/// Recounts frequencies from the transactions, independent of the catalog.
std::vector<std::uint64_t> recount_frequencies(const TransactionDB& db);

inline constexpr std::string_view kDbFormat = "recomed-db/1";

nlohmann::json db_to_json(const TransactionDB& db);
TransactionDB db_from_json(const nlohmann::json& doc);
void save_db(const TransactionDB& db, const std::filesystem::path& path);
TransactionDB load_db(const std::filesystem::path& path);

}  // namespace recomed
