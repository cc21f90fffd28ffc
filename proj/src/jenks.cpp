#include "recomed/jenks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "recomed/error.hpp"

namespace recomed {

using nlohmann::json;

namespace {

// Prefix sums over distinct values with multiplicities, shifted by the mean
// to keep the squared-sum cancellation small.
class SegmentCost {
 public:
  SegmentCost(const std::vector<double>& values, const std::vector<std::size_t>& weights) {
    long double total = 0, wsum = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      total += static_cast<long double>(values[i]) * weights[i];
      wsum += weights[i];
    }
    const long double shift = wsum > 0 ? total / wsum : 0;
    w_.assign(values.size() + 1, 0);
    s1_.assign(values.size() + 1, 0);
    s2_.assign(values.size() + 1, 0);
    for (std::size_t i = 0; i < values.size(); ++i) {
      long double x = static_cast<long double>(values[i]) - shift;
      w_[i + 1] = w_[i] + weights[i];
      s1_[i + 1] = s1_[i] + x * weights[i];
      s2_[i + 1] = s2_[i] + x * x * weights[i];
    }
  }

  // Squared deviation of distinct values [lo, hi).
  long double operator()(std::size_t lo, std::size_t hi) const {
    long double w = w_[hi] - w_[lo];
    long double s1 = s1_[hi] - s1_[lo];
    long double s2 = s2_[hi] - s2_[lo];
    long double v = s2 - s1 * s1 / w;
    return v < 0 ? 0 : v;
  }

 private:
  std::vector<long double> w_, s1_, s2_;
};

}  // namespace

JenksClassification jenks_breaks(std::span<const double> values, std::size_t k) {
  if (values.empty()) throw Error("jenks_breaks needs at least one value");
  std::map<double, std::size_t> hist;
  for (double v : values) {
    if (!std::isfinite(v)) throw Error("jenks_breaks values must be finite");
    ++hist[v];
  }
  const std::size_t d = hist.size();
  if (k < 1 || k > d) {
    throw Error("class count " + std::to_string(k) + " must lie in [1, " + std::to_string(d) + "] (distinct values)");
  }
  std::vector<double> distinct;
  std::vector<std::size_t> weight;
  for (auto [v, c] : hist) {
    distinct.push_back(v);
    weight.push_back(c);
  }
  SegmentCost cost(distinct, weight);

  // tail[j][i]: best cost of splitting distinct[i..d) into j classes.
  constexpr long double kInf = std::numeric_limits<long double>::infinity();
  std::vector<std::vector<long double>> tail(k + 1, std::vector<long double>(d + 1, kInf));
  for (std::size_t i = 0; i < d; ++i) tail[1][i] = cost(i, d);
  for (std::size_t j = 2; j <= k; ++j) {
    for (std::size_t i = 0; i + j <= d; ++i) {
      long double best = kInf;
      for (std::size_t m = i + 1; m + (j - 1) <= d; ++m) {
        best = std::min(best, cost(i, m) + tail[j - 1][m]);
      }
      tail[j][i] = best;
    }
  }

  // Walk forward taking the earliest break that stays optimal.
  const long double optimum = tail[k][0];
  const long double tol = 1e-9L * std::max<long double>(1, optimum);
  std::vector<std::size_t> ends;
  std::size_t start = 0;
  long double spent = 0;
  for (std::size_t remaining = k; remaining > 1; --remaining) {
    std::size_t chosen = 0;
    for (std::size_t e = start + 1; e + (remaining - 1) <= d; ++e) {
      if (spent + cost(start, e) + tail[remaining - 1][e] <= optimum + tol) {
        chosen = e;
        break;
      }
    }
    if (chosen == 0) throw Error("jenks backtrack failed");
    spent += cost(start, chosen);
    ends.push_back(chosen);
    start = chosen;
  }
  ends.push_back(d);

  JenksClassification out;
  out.k = k;
  out.within_ssd = static_cast<double>(optimum);
  std::vector<std::size_t> class_of_distinct(d);
  std::size_t lo = 0;
  for (std::size_t c = 0; c < ends.size(); ++c) {
    JenksClass jc{distinct[lo], distinct[ends[c] - 1], 0};
    for (std::size_t i = lo; i < ends[c]; ++i) {
      jc.member_count += weight[i];
      class_of_distinct[i] = c;
    }
    out.classes.push_back(jc);
    lo = ends[c];
  }
  out.assignment.reserve(values.size());
  for (double v : values) {
    auto pos = static_cast<std::size_t>(std::lower_bound(distinct.begin(), distinct.end(), v) - distinct.begin());
    out.assignment.push_back(class_of_distinct[pos]);
  }
  return out;
}

json jenks_table_json(const JenksClassification& cls) {
  json rows = json::array();
  for (std::size_t c = 0; c < cls.classes.size(); ++c) {
    rows.push_back({{"cut_jenks", c},
                    {"min", cls.classes[c].min_value},
                    {"max", cls.classes[c].max_value},
                    {"count", cls.classes[c].member_count}});
  }
  return rows;
}

JenksClassification jenks_from_json(const json& doc) {
  JenksClassification cls;
  cls.k = doc.at("k").get<std::size_t>();
  cls.within_ssd = doc.at("within_ssd").get<double>();
  cls.assignment = doc.at("assignment").get<std::vector<std::size_t>>();
  for (const auto& row : doc.at("classes")) {
    cls.classes.push_back({row.at("min").get<double>(), row.at("max").get<double>(), row.at("count").get<std::size_t>()});
  }
  return cls;
}

}  // namespace recomed
