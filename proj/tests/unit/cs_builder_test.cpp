#include <gtest/gtest.h>

#include "odyssey/cs_builder.hpp"
#include "odyssey/errors.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace odyssey;

namespace {

std::string x(const std::string& s) { return "http://x/" + s; }

Triple tri(const std::string& s, const std::string& p, const std::string& o) {
  return {Term::iri(x(s)), Term::iri(x(p)), Term::iri(x(o))};
}

Triple lit(const std::string& s, const std::string& p, const std::string& v) {
  return {Term::iri(x(s)), Term::iri(x(p)), Term::literal(v)};
}

std::vector<Triple> t1_triples() {
  return {lit("e1", "p1", "v1"), lit("e1", "p2", "v2"), lit("e2", "p1", "v3"),
          lit("e2", "p2", "v4"), lit("e2", "p2", "v5"), lit("e3", "p1", "v6")};
}

Dataset t1() { return Dataset("t1", t1_triples()); }

Dataset t2() {
  auto ts = t1_triples();
  ts.push_back(lit("f1", "p9", "w"));
  ts.push_back(tri("e1", "p3", "f1"));
  return Dataset("t2", ts);
}

CsStatistics cs(std::vector<std::string> props, std::uint64_t count) {
  CsStatistics s;
  for (auto& p : props) p = x(p);
  s.cs = CharacteristicSet(props);
  s.count = count;
  for (const auto& p : s.cs.properties) s.occurrences[p] = count;
  return s;
}

const CsStatistics& find_cs(const DatasetStatistics& st, std::vector<std::string> props) {
  for (auto& p : props) p = x(p);
  auto id = st.find(CharacteristicSet(props));
  if (!id) throw std::runtime_error("missing CS");
  return st.cs_stats[*id];
}

std::map<std::string, std::uint64_t> occurrence_totals(const DatasetStatistics& st) {
  std::map<std::string, std::uint64_t> out;
  for (const auto& c : st.cs_stats)
    for (const auto& [p, n] : c.occurrences) out[p] += n;
  return out;
}

}  // namespace

TEST(BuildCs, ToyT1) {
  auto st = build_cs(t1());
  ASSERT_EQ(st.cs_stats.size(), 2u);
  const auto& a = find_cs(st, {"p1", "p2"});
  EXPECT_EQ(a.count, 2u);
  EXPECT_EQ(a.occurrences_of(x("p1")), 2u);
  EXPECT_EQ(a.occurrences_of(x("p2")), 3u);
  const auto& b = find_cs(st, {"p1"});
  EXPECT_EQ(b.count, 1u);
  EXPECT_EQ(b.occurrences_of(x("p1")), 1u);
  EXPECT_FALSE(st.merged);
}

TEST(BuildCs, Empty) { EXPECT_TRUE(build_cs(Dataset()).cs_stats.empty()); }

TEST(BuildCs, UniformSingleProperty) {
  Dataset d("d", {lit("a", "p", "1"), lit("b", "p", "2"), lit("c", "p", "3")});
  auto st = build_cs(d);
  ASSERT_EQ(st.cs_stats.size(), 1u);
  EXPECT_EQ(st.cs_stats[0].count, 3u);
}

TEST(BuildCs, CanonicalOrder) {
  auto st = build_cs(t2());
  for (std::size_t i = 1; i < st.cs_stats.size(); ++i) EXPECT_LT(st.cs_stats[i - 1].cs, st.cs_stats[i].cs);
}

TEST(BuildCs, MatchesGroupByOracle) {
  testkit::Rng rng(21);
  for (int i = 0; i < 50; ++i) {
    auto d = testkit::random_dataset(rng, {});
    auto st = build_cs(d);
    auto prof = testkit::profile(d);
    EXPECT_EQ(st.total_count(), prof.size());
    std::map<std::vector<std::string>, std::pair<std::uint64_t, std::map<std::string, std::uint64_t>>> want;
    for (const auto& [s, m] : prof) {
      auto& w = want[testkit::props_of(m)];
      ++w.first;
      for (const auto& [p, n] : m) w.second[p] += n;
    }
    ASSERT_EQ(st.cs_stats.size(), want.size());
    for (const auto& c : st.cs_stats) {
      const auto& w = want.at(c.cs.properties);
      EXPECT_EQ(c.count, w.first);
      EXPECT_EQ(c.occurrences, w.second);
      for (const auto& [p, n] : c.occurrences) EXPECT_GE(n, c.count);
    }
  }
}

TEST(BuildCp, ToyT2) {
  auto d = t2();
  auto st = build_cs(d);
  auto cps = build_cp(d, st);
  ASSERT_EQ(cps.size(), 1u);
  EXPECT_EQ(st.cs_stats[cps[0].source_cs].cs, CharacteristicSet({x("p1"), x("p2"), x("p3")}));
  EXPECT_EQ(st.cs_stats[cps[0].target_cs].cs, CharacteristicSet({x("p9")}));
  EXPECT_EQ(cps[0].predicate, x("p3"));
  EXPECT_EQ(cps[0].count, 1u);
}

TEST(BuildCp, NoLinks) {
  auto d = t1();
  EXPECT_TRUE(build_cp(d, build_cs(d)).empty());
}

TEST(BuildCp, ParallelLinksCollapse) {
  Dataset d("d", {tri("e1", "p", "f1"), tri("e1", "p", "f2"), lit("f1", "q", "a"), lit("f2", "q", "b")});
  auto cps = build_cp(d, build_cs(d));
  ASSERT_EQ(cps.size(), 1u);
  EXPECT_EQ(cps[0].count, 2u);
}

TEST(BuildCp, PerPredicateTotalsMatchScan) {
  testkit::Rng rng(22);
  for (int i = 0; i < 50; ++i) {
    auto d = testkit::random_dataset(rng, {.link_probability = 0.6});
    auto st = build_cs(d);
    auto cps = build_cp(d, st);
    std::map<std::string, std::uint64_t> got, want;
    for (const auto& cp : cps) {
      EXPECT_GE(cp.count, 1u);
      EXPECT_TRUE(st.cs_stats[cp.source_cs].cs.contains(cp.predicate));
      got[cp.predicate] += cp.count;
    }
    for (const auto& t : d.triples())
      if (t.object.is_iri() && d.has_subject(t.object)) ++want[t.predicate.value()];
    EXPECT_EQ(got, want);
  }
}

TEST(BuildCp, RejectsMergedStats) {
  auto d = t2();
  auto st = merge_to_budget(build_cs(d), 1);
  EXPECT_THROW(build_cp(d, st), std::invalid_argument);
}

TEST(MergeToBudget, NoOpWhenWithinBudget) {
  auto st = build_cs(t1());
  auto m = merge_to_budget(st, 2);
  EXPECT_FALSE(m.merged);
  EXPECT_EQ(to_json(m), to_json(st));
}

TEST(MergeToBudget, InvalidBudget) { EXPECT_THROW(merge_to_budget(build_cs(t1()), 0), InvalidBudget); }

TEST(MergeToBudget, SubsetFoldsIntoSuperset) {
  DatasetStatistics st;
  st.cs_stats = {cs({"p1"}, 1), cs({"p1", "p2"}, 10)};
  auto m = merge_to_budget(st, 1);
  ASSERT_EQ(m.cs_stats.size(), 1u);
  EXPECT_TRUE(m.merged);
  EXPECT_EQ(m.cs_stats[0].count, 11u);
  EXPECT_EQ(m.cs_stats[0].occurrences_of(x("p1")), 11u);
  EXPECT_EQ(m.cs_stats[0].occurrences_of(x("p2")), 10u);
}

TEST(MergeToBudget, SmallestSupersetWins) {
  DatasetStatistics st;
  st.cs_stats = {cs({"p1"}, 1), cs({"p1", "p2"}, 10), cs({"p1", "p2", "p3"}, 20)};
  auto m = merge_to_budget(st, 2);
  EXPECT_EQ(find_cs(m, {"p1", "p2"}).count, 11u);
  EXPECT_EQ(find_cs(m, {"p1", "p2", "p3"}).count, 20u);
}

TEST(MergeToBudget, SupersetTieGoesToSmallestSerialization) {
  DatasetStatistics st;
  st.cs_stats = {cs({"p1"}, 1), cs({"p1", "p2"}, 10), cs({"p1", "p3"}, 10)};
  auto m = merge_to_budget(st, 2);
  EXPECT_EQ(find_cs(m, {"p1", "p2"}).count, 11u);
  EXPECT_EQ(find_cs(m, {"p1", "p3"}).count, 10u);
}

TEST(MergeToBudget, SplitAcrossTwoKeptSets) {
  DatasetStatistics st;
  st.cs_stats = {cs({"p1"}, 5), cs({"p1", "p2"}, 1), cs({"p2"}, 4)};
  auto m = merge_to_budget(st, 2);
  ASSERT_EQ(m.cs_stats.size(), 2u);
  const auto& a = find_cs(m, {"p1"});
  const auto& b = find_cs(m, {"p2"});
  // Occurrences go to both parts; the entity is counted once.
  EXPECT_EQ(a.occurrences_of(x("p1")), 6u);
  EXPECT_EQ(b.occurrences_of(x("p2")), 5u);
  EXPECT_EQ(a.count + b.count, 10u);
  EXPECT_EQ(a.count, 6u);
  EXPECT_FALSE(m.catch_all);
}

TEST(MergeToBudget, CatchAllForUncoverable) {
  DatasetStatistics st;
  st.cs_stats = {cs({"p1"}, 5), cs({"p3"}, 1), cs({"p2"}, 4)};
  auto m = merge_to_budget(st, 2);
  ASSERT_EQ(m.cs_stats.size(), 2u);
  ASSERT_TRUE(m.catch_all);
  EXPECT_EQ(m.total_count(), 10u);
  EXPECT_EQ(m.cs_stats[*m.catch_all].cs, CharacteristicSet({x("p2"), x("p3")}));
}

TEST(MergeToBudget, CpsFollowMergedSets) {
  auto d = t2();
  auto st = build_statistics(d, 0);
  ASSERT_EQ(st.cs_stats.size(), 4u);
  auto m = merge_to_budget(st, 2);
  std::uint64_t total = 0;
  for (const auto& cp : m.cp_stats) {
    EXPECT_LT(cp.source_cs, m.cs_stats.size());
    EXPECT_LT(cp.target_cs, m.cs_stats.size());
    total += cp.count;
  }
  EXPECT_GE(total, 1u);
}

TEST(MergeToBudget, ConservesCountsAndOccurrences) {
  testkit::Rng rng(23);
  for (int i = 0; i < 100; ++i) {
    auto d = testkit::random_dataset(rng, {.max_predicates = 6});
    auto st = build_statistics(d, 0);
    std::size_t budget = testkit::uniform(rng, 1, std::max<std::size_t>(1, st.cs_stats.size()));
    auto m = merge_to_budget(st, budget);
    EXPECT_LE(m.cs_stats.size(), budget);
    EXPECT_EQ(m.total_count(), st.total_count());
    EXPECT_EQ(occurrence_totals(m), occurrence_totals(st));
    for (std::size_t k = 1; k < m.cs_stats.size(); ++k) EXPECT_LT(m.cs_stats[k - 1].cs, m.cs_stats[k].cs);
    for (const auto& c : m.cs_stats)
      for (const auto& [p, n] : c.occurrences) EXPECT_TRUE(c.cs.contains(p));
  }
}

TEST(MergeToBudget, Deterministic) {
  testkit::Rng rng(24);
  for (int i = 0; i < 20; ++i) {
    auto d = testkit::random_dataset(rng, {});
    auto st = build_statistics(d, 0);
    EXPECT_EQ(to_json(merge_to_budget(st, 2)).dump(), to_json(merge_to_budget(st, 2)).dump());
  }
}

TEST(ResolveCs, SplitEntityMapsToBothParts) {
  DatasetStatistics st;
  st.cs_stats = {cs({"p1"}, 5), cs({"p1", "p2"}, 1), cs({"p2"}, 4)};
  auto m = merge_to_budget(st, 2);
  auto ids = resolve_cs(m, CharacteristicSet({x("p1"), x("p2")}));
  EXPECT_EQ(ids.size(), 2u);
  EXPECT_TRUE(resolve_cs(build_cs(t1()), CharacteristicSet({x("zz")})).empty());
}

TEST(StatisticsJson, RoundTrip) {
  testkit::Rng rng(25);
  for (int i = 0; i < 20; ++i) {
    auto d = testkit::random_dataset(rng, {.link_probability = 0.5});
    auto st = build_statistics(d, i % 2 ? 3 : 0);
    auto j = to_json(st);
    auto back = statistics_from_json(j);
    EXPECT_EQ(to_json(back), j);
    EXPECT_EQ(back.merged, st.merged);
    EXPECT_EQ(back.cp_stats, st.cp_stats);
  }
}

TEST(StatisticsJson, Layout) {
  auto j = to_json(build_statistics(t2(), 0));
  EXPECT_EQ(j.at("dataset_id"), "t2");
  EXPECT_EQ(j.at("merged"), false);
  ASSERT_EQ(j.at("cs").size(), 4u);
  EXPECT_TRUE(j.at("cs")[0].contains("props"));
  EXPECT_TRUE(j.at("cs")[0].contains("occ"));
  ASSERT_EQ(j.at("cp").size(), 1u);
  EXPECT_EQ(j.at("cp")[0].at("pred"), x("p3"));
}
