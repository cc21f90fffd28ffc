#include "recomed/atc.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "recomed/error.hpp"
#include "recomed/fingerprint.hpp"
#include "recomed/text.hpp"

namespace recomed {

using nlohmann::json;

std::optional<AtcCode> AtcCode::parse(std::string_view text) {
  std::string code(trim(text));
  for (char& c : code) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (code.size() != 7) return std::nullopt;
  auto digit = [&](std::size_t i) { return std::isdigit(static_cast<unsigned char>(code[i])) != 0; };
  auto letter = [&](std::size_t i) { return code[i] >= 'A' && code[i] <= 'Z'; };
  if (kAnatomicalGroups.find(code[0]) == std::string_view::npos) return std::nullopt;
  if (!digit(1) || !digit(2) || !letter(3) || !letter(4) || !digit(5) || !digit(6)) return std::nullopt;
  return AtcCode(std::move(code));
}

std::string atc_level(const AtcCode& code, int level) {
  static constexpr std::size_t kLength[] = {0, 1, 3, 4, 5, 7};
  if (level < 1 || level > 5) throw Error("ATC level must lie in 1..5");
  return code.str().substr(0, kLength[level]);
}

void AtcIndex::add(std::string_view key, const AtcCode& code, std::string_view description) {
  auto& codes = entries_[normalize_name(key)];
  auto pos = std::lower_bound(codes.begin(), codes.end(), code);
  if (pos == codes.end() || *pos != code) codes.insert(pos, code);
  std::string desc(trim(description));
  if (!desc.empty()) descriptions_.emplace(code, std::move(desc));
}

const std::vector<AtcCode>* AtcIndex::lookup(const std::string& normalized_key) const {
  auto it = entries_.find(normalized_key);
  return it == entries_.end() ? nullptr : &it->second;
}

std::optional<std::string> AtcIndex::description(const AtcCode& code) const {
  auto it = descriptions_.find(code);
  if (it == descriptions_.end()) return std::nullopt;
  return it->second;
}

std::string AtcIndex::fingerprint() const {
  std::ostringstream out;
  export_atc_table(out, *this);
  return recomed::fingerprint(out.str());
}

namespace {

std::vector<std::string> split_codes(std::string_view cell) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : cell) {
    if (c == ',' || c == ';' || std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

bool looks_like_header(const std::vector<std::string>& fields) {
  std::string key = normalize_name(fields[0]);
  return key == "KEY" || key == "MEDICINE" || key == "NAME";
}

}  // namespace

AtcLoadResult load_atc_table(std::istream& in) {
  AtcLoadResult result;
  std::string line;
  std::size_t line_no = 0;
  char delim = 0;
  bool first_data_line = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string_view body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    if (delim == 0) delim = line.find('\t') != std::string::npos ? '\t' : ',';
    auto fields = split_delimited(line, delim);
    if (first_data_line) {
      first_data_line = false;
      if (looks_like_header(fields)) continue;
    }
    ++result.report.rows_read;
    auto reject = [&](std::string reason) { result.report.rejected.push_back({line_no, std::move(reason)}); };
    if (fields.size() < 2) {
      reject("missing code column");
      continue;
    }
    if (normalize_name(fields[0]).empty()) {
      reject("empty key");
      continue;
    }
    auto raw_codes = split_codes(fields[1]);
    if (raw_codes.empty()) {
      reject("missing code");
      continue;
    }
    std::vector<AtcCode> codes;
    std::string bad;
    for (const auto& rc : raw_codes) {
      auto code = AtcCode::parse(rc);
      if (!code) {
        bad = rc;
        break;
      }
      codes.push_back(*code);
    }
    if (!bad.empty()) {
      reject("malformed ATC code " + bad);
      continue;
    }
    std::string description;
    for (std::size_t i = 2; i < fields.size(); ++i) {
      if (i > 2) description.push_back(delim);
      description += fields[i];
    }
    for (const auto& c : codes) result.index.add(fields[0], c, description);
    ++result.report.rows_ok;
  }
  if (in.bad()) throw Error("I/O failure while reading ATC table");
  if (result.report.rows_ok == 0) throw Error("ATC table has no valid rows");
  return result;
}

AtcLoadResult load_atc_table_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  return load_atc_table(in);
}

void export_atc_table(std::ostream& out, const AtcIndex& index) {
  for (const auto& [key, codes] : index.entries()) {
    for (const auto& c : codes) {
      out << key << '\t' << c.str();
      if (auto d = index.description(c)) out << '\t' << *d;
      out << '\n';
    }
  }
}

AtcAnnotation match_medicine(const MedicineCatalogEntry& entry, const AtcIndex& index) {
  AtcAnnotation a;
  a.med_id = entry.med_id;
  const std::vector<AtcCode>* codes = index.lookup(normalize_name(entry.normalized_name.empty() ? entry.name : entry.normalized_name));
  if (!codes && !trim(entry.generic_code).empty()) codes = index.lookup(normalize_name(entry.generic_code));
  if (codes) a.codes = *codes;
  a.matched = !a.codes.empty();
  return a;
}

std::vector<std::string> code_strings(const std::vector<AtcCode>& codes) {
  std::vector<std::string> out;
  for (const auto& c : codes) out.push_back(c.str());
  return out;
}

json annotation_to_json(const AtcAnnotation& a) {
  return {{"med_id", a.med_id}, {"codes", code_strings(a.codes)}, {"matched", a.matched}};
}

AtcAnnotation annotation_from_json(const json& doc) {
  AtcAnnotation a;
  a.med_id = doc.at("med_id").get<MedId>();
  for (const auto& s : doc.at("codes")) {
    auto c = AtcCode::parse(s.get<std::string>());
    if (!c) throw Error("malformed ATC code in annotation");
    a.codes.push_back(*c);
  }
  a.matched = !a.codes.empty();
  return a;
}

}  // namespace recomed
