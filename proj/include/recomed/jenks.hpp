#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <json.hpp>

namespace recomed {

struct JenksClass {
  double min_value = 0.0;
  double max_value = 0.0;
  std::size_t member_count = 0;

  bool operator==(const JenksClass&) const = default;
};

struct JenksClassification {
  std::size_t k = 0;
  std::vector<JenksClass> classes;        // ascending
  std::vector<std::size_t> assignment;    // input position -> class index
  double within_ssd = 0.0;                // total within-class squared deviation

  bool operator==(const JenksClassification&) const = default;
};

/// Fisher-Jenks natural breaks: the contiguous partition of the sorted values
/// into k classes that minimizes total within-class squared deviation.
/// Equal values never straddle a break, so k may not exceed the number of
/// distinct values. Among equally good partitions the one whose lower classes
/// end earliest wins.
JenksClassification jenks_breaks(std::span<const double> values, std::size_t k);

// Rows of {cut_jenks, min, max, count}.
nlohmann::json jenks_table_json(const JenksClassification& cls);
JenksClassification jenks_from_json(const nlohmann::json& doc);

}  // namespace recomed
