#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "recomed/ingest.hpp"

namespace recomed {

// The 14 anatomical main groups that may start an ATC code.
inline constexpr std::string_view kAnatomicalGroups = "ABCDGHJLMNPRSV";

/// Seven-character ATC code: anatomical letter, two digits, two letters, two
/// digits (e.g. C09CA01). Only constructible through parse().
class AtcCode {
 public:
  static std::optional<AtcCode> parse(std::string_view text);

  const std::string& str() const noexcept { return code_; }
  char anatomical_group() const noexcept { return code_[0]; }

  auto operator<=>(const AtcCode&) const = default;

 private:
  explicit AtcCode(std::string code) : code_(std::move(code)) {}
  std::string code_;
};

/// Prefix of the code at hierarchy level 1..5 (lengths 1, 3, 4, 5, 7).
std::string atc_level(const AtcCode& code, int level);

class AtcIndex {
 public:
  // Key is normalized with the same rules as medicine names.
  void add(std::string_view key, const AtcCode& code, std::string_view description = {});

  // Codes for an already-normalized key, or nullptr.
  const std::vector<AtcCode>* lookup(const std::string& normalized_key) const;
  std::optional<std::string> description(const AtcCode& code) const;

  const std::map<std::string, std::vector<AtcCode>>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  std::string fingerprint() const;

  bool operator==(const AtcIndex&) const = default;

 private:
  std::map<std::string, std::vector<AtcCode>> entries_;  // codes sorted, unique
  std::map<AtcCode, std::string> descriptions_;
};

struct AtcLoadReport {
  std::size_t rows_read = 0;
  std::size_t rows_ok = 0;
  std::vector<Rejection> rejected;
};

struct AtcLoadResult {
  AtcIndex index;
  AtcLoadReport report;
};

/// Reads "key<sep>codes[<sep>description]" rows, tab- or comma-separated
/// (chosen from the first data line). A code cell may hold several codes
/// separated by commas, semicolons or spaces. Blank lines and lines starting
/// with '#' are skipped, as is a header row. Throws when no row is valid.
AtcLoadResult load_atc_table(std::istream& in);
AtcLoadResult load_atc_table_file(const std::string& path);

// Tab-separated, one row per (key, code); load_atc_table reads it back
// to an equal index.
void export_atc_table(std::ostream& out, const AtcIndex& index);

struct AtcAnnotation {
  MedId med_id = 0;
  std::vector<AtcCode> codes;
  bool matched = false;

  bool operator==(const AtcAnnotation&) const = default;
};

/// Exact lookup by normalized name, then by generic code. No fuzzy matching.
AtcAnnotation match_medicine(const MedicineCatalogEntry& entry, const AtcIndex& index);

nlohmann::json annotation_to_json(const AtcAnnotation& a);
AtcAnnotation annotation_from_json(const nlohmann::json& doc);
std::vector<std::string> code_strings(const std::vector<AtcCode>& codes);

}  // namespace recomed
