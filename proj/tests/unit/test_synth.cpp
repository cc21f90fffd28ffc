#include <doctest.h>

#include <sstream>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "recomed/error.hpp"
#include "recomed/synth.hpp"

using namespace recomed;

namespace {

ClusterModel purity_model(const std::vector<std::vector<std::string>>& clusters_codes) {
  ClusterModel m;
  std::map<MedId, std::size_t> labels;
  MedId id = 0;
  for (std::size_t c = 0; c < clusters_codes.size(); ++c) {
    for (const auto& codes : clusters_codes[c]) {
      m.catalog.push_back({id, "M" + std::to_string(id), "M" + std::to_string(id), "", 1});
      AtcAnnotation a;
      a.med_id = id;
      std::istringstream in(codes);
      std::string code;
      while (in >> code) a.codes.push_back(*AtcCode::parse(code));
      a.matched = !a.codes.empty();
      m.annotations.push_back(a);
      labels[id++] = c;
    }
  }
  m.partition = Partition::from_labels(labels);
  return m;
}

std::vector<long> as_vector(const Labeling& l) {
  std::vector<long> v;
  for (const auto& [k, x] : l) v.push_back(static_cast<long>(x));
  return v;
}

}  // namespace

TEST_CASE("generation is deterministic per seed") {
  SynthConfig c;
  c.n_prescriptions = 500;
  c.seed = 9;
  auto a = generate_synthetic(c);
  auto b = generate_synthetic(c);
  CHECK(a.records == b.records);
  CHECK(a.db == b.db);
  CHECK(a.atc_table == b.atc_table);
  c.seed = 10;
  CHECK_FALSE(generate_synthetic(c).db == a.db);
}

TEST_CASE("truth covers the catalog with disjoint parts") {
  SynthConfig c;
  c.n_prescriptions = 2000;
  c.p_noise = 0.05;
  auto s = generate_synthetic(c);
  std::size_t total = s.truth.group_of.size() + s.truth.stop_set.size() + s.truth.noise_set.size();
  CHECK(total == s.db.catalog().size());
  for (MedId id : s.truth.stop_set) {
    CHECK(s.truth.group_of.count(id) == 0);
    CHECK(s.truth.noise_set.count(id) == 0);
  }
  auto back = truth_from_json(truth_to_json(s.db, s.truth), s.db.catalog());
  CHECK(back.group_of == s.truth.group_of);
  CHECK(back.stop_set == s.truth.stop_set);
  CHECK(back.noise_set == s.truth.noise_set);
}

TEST_CASE("zero stop and noise probability gives pure group prescriptions") {
  SynthConfig c;
  c.n_prescriptions = 1000;
  c.p_stop = 0;
  c.p_noise = 0;
  auto s = generate_synthetic(c);
  for (const auto& t : s.db.transactions()) {
    CHECK(t.size() >= 2);
    std::set<std::size_t> groups;
    for (MedId m : t) {
      REQUIRE(s.truth.group_of.count(m) == 1);
      groups.insert(s.truth.group_of.at(m));
    }
    CHECK(groups.size() == 1);
  }
}

TEST_CASE("settings that allow empty prescriptions are clamped with a warning") {
  SynthConfig c;
  c.n_prescriptions = 200;
  c.min_items = 0;
  c.max_items = 0;
  c.p_stop = 0;
  c.p_noise = 0;
  auto s = generate_synthetic(c);
  CHECK_FALSE(s.warnings.empty());
  for (const auto& t : s.db.transactions()) CHECK_FALSE(t.empty());
}

TEST_CASE("invalid configurations") {
  SynthConfig c;
  c.n_groups = 15;
  CHECK_THROWS_AS(generate_synthetic(c), Error);
  c = {};
  c.p_stop = 1.5;
  CHECK_THROWS_AS(generate_synthetic(c), Error);
  c = {};
  c.n_prescriptions = 0;
  CHECK_THROWS_AS(generate_synthetic(c), Error);
}

TEST_CASE("each group gets its own anatomical letter") {
  SynthConfig c;
  c.n_prescriptions = 100;
  auto s = generate_synthetic(c);
  std::istringstream in(s.atc_table);
  auto idx = load_atc_table(in).index;
  std::map<std::size_t, std::set<char>> letters;
  for (const auto& [id, g] : s.truth.group_of) {
    auto* codes = idx.lookup(s.db.medicine(id).normalized_name);
    REQUIRE(codes != nullptr);
    letters[g].insert(codes->front().anatomical_group());
  }
  std::set<char> all;
  for (const auto& [g, l] : letters) {
    CHECK(l.size() == 1);
    all.insert(*l.begin());
  }
  CHECK(all.size() == c.n_groups);
  for (MedId id : s.truth.stop_set) CHECK(idx.lookup(s.db.medicine(id).normalized_name) == nullptr);
}

TEST_CASE("stop medicines out-rank every group medicine with overwhelming probability") {
  // Group medicine inclusion: 1/6 groups * 3/10 expected picks = 0.05.
  const std::uint64_t n = 10000;
  const double p_group = (1.0 / 6.0) * (3.0 / 10.0);
  const std::uint64_t t = 1000;
  double stop_low = oracle::binomial_cdf(n, 0.5, t);
  double group_high = 1.0 - oracle::binomial_cdf(n, p_group, t);
  double failure = 3 * stop_low + 60 * group_high;
  CHECK(failure < 1e-3);
}

TEST_CASE("ari examples") {
  Labeling a{{0, 0}, {1, 0}, {2, 1}, {3, 1}};
  CHECK(adjusted_rand_index(a, a) == 1.0);
  Labeling one{{0, 0}, {1, 0}, {2, 0}, {3, 0}};
  CHECK(adjusted_rand_index(a, one) == doctest::Approx(oracle::ari(as_vector(a), as_vector(one))));

  Labeling big, moved;
  for (MedId i = 0; i < 100; ++i) big[i] = i / 10;
  moved = big;
  moved[0] = 1;
  double v = adjusted_rand_index(big, moved);
  CHECK(v > 0.9);
  CHECK(v < 1.0);
  CHECK(v == doctest::Approx(oracle::ari(as_vector(big), as_vector(moved))).epsilon(1e-12));

  Labeling other{{0, 0}, {1, 0}, {5, 1}, {3, 1}};
  CHECK_THROWS_AS(adjusted_rand_index(a, other), Error);
  Labeling shorter{{0, 0}};
  CHECK_THROWS_AS(adjusted_rand_index(a, shorter), Error);
}

TEST_CASE("ari is symmetric, permutation invariant and matches pair counting") {
  Rng rng(12);
  for (int round = 0; round < 200; ++round) {
    std::size_t n = 2 + uniform_below(rng, 30);
    Labeling a, b, relabeled;
    std::vector<std::int64_t> perm{0, 1, 2, 3, 4, 5};
    shuffle(std::span<std::int64_t>(perm), rng);
    for (MedId i = 0; i < n; ++i) {
      a[i] = static_cast<std::int64_t>(uniform_below(rng, 4));
      b[i] = static_cast<std::int64_t>(uniform_below(rng, 5));
      relabeled[i] = perm[static_cast<std::size_t>(a[i])];
    }
    double ab = adjusted_rand_index(a, b);
    CHECK(ab == doctest::Approx(adjusted_rand_index(b, a)).epsilon(1e-12));
    CHECK(ab == doctest::Approx(oracle::ari(as_vector(a), as_vector(b))).epsilon(1e-9));
    CHECK(adjusted_rand_index(relabeled, b) == doctest::Approx(ab).epsilon(1e-12));
    CHECK(ab <= 1.0 + 1e-12);
    CHECK(ab >= -1.0 - 1e-12);
  }
}

TEST_CASE("purity examples") {
  auto eye = purity_model({{"S01EC01", "S01FA01", "S01BA04 S01CB02 S02BA03 S03BA02", "S01ED01", "S01EE01"}});
  CHECK(atc_purity(eye, 1).per_cluster.at(0) == 1.0);

  auto mixed = purity_model({{"C09CA01", "L04AX01"}});
  CHECK(atc_purity(mixed, 1).per_cluster.at(0) == 0.5);

  auto single = purity_model({{"C09CA01"}});
  CHECK(atc_purity(single, 1).per_cluster.at(0) == 1.0);

  auto none = purity_model({{""}, {"C09CA01"}});
  auto r = atc_purity(none, 1);
  CHECK(r.per_cluster.count(0) == 0);
  CHECK(r.weighted_mean == std::optional<double>{1.0});
  CHECK_THROWS_AS(atc_purity(single, 6), Error);
}

TEST_CASE("purity ignores renumbering and unmatched members") {
  auto a = purity_model({{"C09CA01", "C07AB02", "N05BE01"}, {"S01ED01", "S01EE01"}});
  auto b = purity_model({{"S01ED01", "S01EE01"}, {"C09CA01", "C07AB02", "N05BE01"}});
  CHECK(atc_purity(a, 1).weighted_mean == atc_purity(b, 1).weighted_mean);
  auto c = purity_model({{"C09CA01", "C07AB02", "N05BE01", ""}, {"S01ED01", "", "S01EE01"}});
  CHECK(atc_purity(c, 1).weighted_mean == atc_purity(a, 1).weighted_mean);
  CHECK(*atc_purity(a, 1).weighted_mean == doctest::Approx(4.0 / 5.0));
  CHECK(*atc_purity(a, 2).weighted_mean == doctest::Approx(3.0 / 5.0));
}

TEST_CASE("tagged sample accuracy") {
  auto t7 = load_tagged_sample_file(std::string(RECOMED_DATA_DIR) + "/table7.csv");
  REQUIRE(t7.rows.size() == 30);
  CHECK(std::abs(evaluate_tags(t7) - 29.0 / 30.0) <= 1e-9);
  CHECK(t7.rows[3].tag == 0);
  CHECK(t7.rows[3].codes.front().str() == "L04AX01");
  CHECK(t7.rows[6].codes.size() == 2);

  TaggedSample ones{{{1, "1", "x", 1, {}}, {2, "2", "y", 1, {}}}};
  CHECK(evaluate_tags(ones) == 1.0);
  TaggedSample zeros{{{1, "1", "x", 0, {}}}};
  CHECK(evaluate_tags(zeros) == 0.0);
  CHECK_THROWS_AS(evaluate_tags(TaggedSample{}), Error);

  std::istringstream bad("#,Id,Medicine,Tag,ATC Code\n1,1,x,2,C09CA01\n");
  CHECK_THROWS_AS(load_tagged_sample(bad), Error);
}

TEST_CASE("ideal similarity graph recovers the planted groups") {
  SynthConfig c;
  c.n_prescriptions = 3000;
  c.p_stop = 0;
  c.p_noise = 0;
  auto s = generate_synthetic(c);
  SimGraph g;
  for (const auto& [id, grp] : s.truth.group_of) g.nodes.push_back(id);
  std::sort(g.nodes.begin(), g.nodes.end());
  for (auto [a, ga] : s.truth.group_of) {
    for (auto [b, gb] : s.truth.group_of) {
      if (a < b) g.edges[{a, b}] = ga == gb ? 0.5 : 0.01;
    }
  }
  auto p = louvain(g, {}, 1.0, 0);
  Labeling truth, found;
  for (const auto& [id, grp] : s.truth.group_of) {
    truth[id] = static_cast<std::int64_t>(grp);
    found[id] = static_cast<std::int64_t>(p.assignment.at(id));
  }
  CHECK(adjusted_rand_index(truth, found) >= 0.9);
}
