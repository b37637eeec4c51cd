#include "odyssey/cs_builder.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <stdexcept>
#include <tuple>

#include "odyssey/errors.hpp"

namespace odyssey {

PredicateSet make_predicate_set(std::vector<std::string> predicates) {
  std::sort(predicates.begin(), predicates.end());
  predicates.erase(std::unique(predicates.begin(), predicates.end()), predicates.end());
  return predicates;
}

bool includes(std::span<const std::string> haystack, std::span<const std::string> needle) {
  return std::includes(haystack.begin(), haystack.end(), needle.begin(), needle.end());
}

bool CharacteristicSet::contains(const std::string& p) const {
  return std::binary_search(properties.begin(), properties.end(), p);
}

std::uint64_t CsStatistics::occurrences_of(const std::string& p) const {
  auto it = occurrences.find(p);
  return it == occurrences.end() ? 0 : it->second;
}

std::optional<std::size_t> DatasetStatistics::find(const CharacteristicSet& cs) const {
  auto it = std::lower_bound(cs_stats.begin(), cs_stats.end(), cs,
                             [](const CsStatistics& s, const CharacteristicSet& c) { return s.cs < c; });
  if (it != cs_stats.end() && it->cs == cs) return static_cast<std::size_t>(it - cs_stats.begin());
  // Documents loaded from disk are not guaranteed to be in canonical order.
  for (std::size_t i = 0; i < cs_stats.size(); ++i)
    if (cs_stats[i].cs == cs) return i;
  return std::nullopt;
}

std::uint64_t DatasetStatistics::total_count() const {
  return std::accumulate(cs_stats.begin(), cs_stats.end(), std::uint64_t{0},
                         [](std::uint64_t acc, const CsStatistics& s) { return acc + s.count; });
}

CharacteristicSet characteristic_set_of(std::span<const Triple> subject_group) {
  CharacteristicSet cs;
  for (const auto& t : subject_group) {
    // Triples of a subject arrive sorted by predicate.
    if (cs.properties.empty() || cs.properties.back() != t.predicate.value())
      cs.properties.push_back(t.predicate.value());
  }
  std::sort(cs.properties.begin(), cs.properties.end());
  cs.properties.erase(std::unique(cs.properties.begin(), cs.properties.end()), cs.properties.end());
  return cs;
}

DatasetStatistics build_cs(const Dataset& d) {
  std::map<CharacteristicSet, CsStatistics> by_cs;
  for (const auto& group : scan_by_subject(d)) {
    CharacteristicSet cs = characteristic_set_of(group.triples);
    auto& entry = by_cs[cs];
    if (entry.count == 0) entry.cs = cs;
    ++entry.count;
    for (const auto& t : group.triples) ++entry.occurrences[t.predicate.value()];
  }
  DatasetStatistics stats;
  stats.dataset_id = d.id();
  stats.cs_stats.reserve(by_cs.size());
  for (auto& [cs, s] : by_cs) stats.cs_stats.push_back(std::move(s));
  return stats;
}

namespace {

void sort_cps(std::vector<CpStatistics>& cps) {
  std::sort(cps.begin(), cps.end(), [](const CpStatistics& a, const CpStatistics& b) {
    return std::tie(a.source_cs, a.target_cs, a.predicate) < std::tie(b.source_cs, b.target_cs, b.predicate);
  });
}

}  // namespace

std::vector<CpStatistics> build_cp(const Dataset& d, const DatasetStatistics& stats) {
  if (stats.merged) throw std::invalid_argument("build_cp requires unmerged statistics");
  std::unordered_map<Term, std::size_t> cs_of;
  for (const auto& group : scan_by_subject(d)) {
    auto id = stats.find(characteristic_set_of(group.triples));
    if (!id) throw std::invalid_argument("statistics were not built from this dataset");
    cs_of.emplace(*group.subject, *id);
  }
  std::map<std::tuple<std::size_t, std::size_t, std::string>, std::uint64_t> counts;
  for (const auto& t : d.triples()) {
    if (t.object.is_literal()) continue;
    auto dst = cs_of.find(t.object);
    if (dst == cs_of.end()) continue;
    ++counts[{cs_of.at(t.subject), dst->second, t.predicate.value()}];
  }
  std::vector<CpStatistics> out;
  out.reserve(counts.size());
  for (const auto& [key, n] : counts) out.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), n});
  return out;
}

namespace {

struct Part {
  std::size_t target;  // index into the kept list
  PredicateSet properties;
};

// Smallest kept superset of `props`; ties go to the canonically smallest CS.
std::optional<std::size_t> smallest_superset(const std::vector<const CharacteristicSet*>& kept,
                                             std::span<const std::string> props) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (!kept[i]->contains_all(props)) continue;
    if (!best || kept[i]->size() < kept[*best]->size() ||
        (kept[i]->size() == kept[*best]->size() && *kept[i] < *kept[*best])) {
      best = i;
    }
  }
  return best;
}

// Where a CS that is not among `kept` goes. Empty optional = needs catch-all.
std::optional<std::vector<Part>> resolve_against(const std::vector<const CharacteristicSet*>& kept,
                                                 const CharacteristicSet& cs) {
  if (auto s = smallest_superset(kept, cs.properties)) return std::vector<Part>{{*s, cs.properties}};

  // Two-way split: the first part is the overlap with some kept CS, the rest
  // must fit in a kept CS too. Taking the full overlap loses no generality.
  std::optional<std::vector<Part>> best;
  std::size_t best_overlap = 0;
  for (std::size_t k = 0; k < kept.size(); ++k) {
    PredicateSet overlap, rest;
    std::set_intersection(cs.properties.begin(), cs.properties.end(), kept[k]->properties.begin(),
                          kept[k]->properties.end(), std::back_inserter(overlap));
    if (overlap.empty() || overlap.size() <= best_overlap) continue;
    std::set_difference(cs.properties.begin(), cs.properties.end(), overlap.begin(), overlap.end(),
                        std::back_inserter(rest));
    auto rest_target = smallest_superset(kept, rest);
    if (!rest_target) continue;
    auto overlap_target = smallest_superset(kept, overlap);
    best = std::vector<Part>{{*overlap_target, std::move(overlap)}, {*rest_target, std::move(rest)}};
    best_overlap = best->front().properties.size();
  }
  return best;
}

struct MergeOutcome {
  std::vector<CsStatistics> kept;
  std::optional<CsStatistics> catch_all;
  // original CS id -> (index into kept, or kept.size() for the catch-all)
  std::vector<std::vector<Part>> routing;
};

MergeOutcome attempt_merge(const DatasetStatistics& stats, const std::vector<std::size_t>& ranked,
                           std::size_t keep_n, bool allow_catch_all, bool& residual) {
  MergeOutcome out;
  std::vector<bool> is_kept(stats.cs_stats.size(), false);
  for (std::size_t i = 0; i < keep_n; ++i) is_kept[ranked[i]] = true;
  // Kept CSs in canonical order.
  std::vector<std::size_t> kept_ids;
  for (std::size_t i = 0; i < stats.cs_stats.size(); ++i)
    if (is_kept[i]) kept_ids.push_back(i);
  std::vector<const CharacteristicSet*> kept_sets;
  for (auto id : kept_ids) {
    out.kept.push_back(stats.cs_stats[id]);
    kept_sets.push_back(&stats.cs_stats[id].cs);
  }
  out.routing.resize(stats.cs_stats.size());
  for (std::size_t k = 0; k < kept_ids.size(); ++k)
    out.routing[kept_ids[k]] = {{k, stats.cs_stats[kept_ids[k]].cs.properties}};

  residual = false;
  for (std::size_t i = 0; i < stats.cs_stats.size(); ++i) {
    if (is_kept[i]) continue;
    const auto& removed = stats.cs_stats[i];
    auto parts = resolve_against(kept_sets, removed.cs);
    if (!parts) {
      residual = true;
      if (!allow_catch_all) return out;
      if (!out.catch_all) out.catch_all.emplace();
      auto& c = *out.catch_all;
      PredicateSet merged_props;
      std::set_union(c.cs.properties.begin(), c.cs.properties.end(), removed.cs.properties.begin(),
                     removed.cs.properties.end(), std::back_inserter(merged_props));
      c.cs.properties = std::move(merged_props);
      c.count += removed.count;
      for (const auto& [p, n] : removed.occurrences) c.occurrences[p] += n;
      out.routing[i] = {{kept_ids.size(), removed.cs.properties}};
      continue;
    }
    for (std::size_t pi = 0; pi < parts->size(); ++pi) {
      const auto& part = (*parts)[pi];
      auto& target = out.kept[part.target];
      if (pi == 0) target.count += removed.count;
      for (const auto& p : part.properties) target.occurrences[p] += removed.occurrences_of(p);
    }
    out.routing[i] = std::move(*parts);
  }
  return out;
}

}  // namespace

DatasetStatistics merge_to_budget(const DatasetStatistics& stats, std::size_t budget) {
  if (budget < 1) throw InvalidBudget("CS budget must be at least 1");
  if (stats.cs_stats.size() <= budget) return stats;

  std::vector<std::size_t> ranked(stats.cs_stats.size());
  std::iota(ranked.begin(), ranked.end(), std::size_t{0});
  std::stable_sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) {
    return stats.cs_stats[a].count > stats.cs_stats[b].count;
  });

  bool residual = false;
  MergeOutcome outcome = attempt_merge(stats, ranked, budget, false, residual);
  if (residual) outcome = attempt_merge(stats, ranked, budget - 1, true, residual);

  // Assemble the new CS list in canonical order and remember where each
  // outcome slot landed.
  std::vector<CsStatistics> slots = outcome.kept;
  if (outcome.catch_all) slots.push_back(*outcome.catch_all);
  std::vector<std::size_t> order(slots.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return slots[a].cs < slots[b].cs; });
  std::vector<std::size_t> slot_to_id(slots.size());
  DatasetStatistics out;
  out.dataset_id = stats.dataset_id;
  out.merged = true;
  out.cs_budget = budget;
  for (std::size_t i = 0; i < order.size(); ++i) {
    slot_to_id[order[i]] = i;
    out.cs_stats.push_back(std::move(slots[order[i]]));
  }
  if (outcome.catch_all) out.catch_all = slot_to_id[outcome.kept.size()];

  // Rewrite CPs: the source side follows the part holding the link
  // predicate; the target side fans out to every part.
  std::map<std::tuple<std::size_t, std::size_t, std::string>, std::uint64_t> cps;
  for (const auto& cp : stats.cp_stats) {
    const auto& src_parts = outcome.routing[cp.source_cs];
    std::size_t src_slot = src_parts.front().target;
    for (const auto& part : src_parts) {
      if (std::binary_search(part.properties.begin(), part.properties.end(), cp.predicate)) {
        src_slot = part.target;
        break;
      }
    }
    for (const auto& part : outcome.routing[cp.target_cs])
      cps[{slot_to_id[src_slot], slot_to_id[part.target], cp.predicate}] += cp.count;
  }
  for (const auto& [key, n] : cps) out.cp_stats.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), n});
  return out;
}

std::vector<std::size_t> resolve_cs(const DatasetStatistics& stats, const CharacteristicSet& cs) {
  if (auto id = stats.find(cs)) return {*id};
  if (!stats.merged) return {};
  std::vector<const CharacteristicSet*> kept;
  std::vector<std::size_t> kept_ids;
  for (std::size_t i = 0; i < stats.cs_stats.size(); ++i) {
    if (stats.catch_all && *stats.catch_all == i) continue;
    kept.push_back(&stats.cs_stats[i].cs);
    kept_ids.push_back(i);
  }
  auto parts = resolve_against(kept, cs);
  if (!parts) {
    if (stats.catch_all) return {*stats.catch_all};
    return {};
  }
  std::vector<std::size_t> ids;
  for (const auto& p : *parts) ids.push_back(kept_ids[p.target]);
  return ids;
}

std::unordered_map<Term, std::vector<std::size_t>> assign_subjects(const Dataset& d,
                                                                   const DatasetStatistics& stats) {
  std::unordered_map<Term, std::vector<std::size_t>> out;
  std::map<CharacteristicSet, std::vector<std::size_t>> memo;
  for (const auto& group : scan_by_subject(d)) {
    auto cs = characteristic_set_of(group.triples);
    auto it = memo.find(cs);
    if (it == memo.end()) it = memo.emplace(cs, resolve_cs(stats, cs)).first;
    out.emplace(*group.subject, it->second);
  }
  return out;
}

DatasetStatistics build_statistics(const Dataset& d, std::size_t budget) {
  DatasetStatistics stats = build_cs(d);
  stats.cp_stats = build_cp(d, stats);
  if (budget >= 1 && stats.cs_stats.size() > budget) stats = merge_to_budget(stats, budget);
  stats.cs_budget = budget;
  return stats;
}

nlohmann::json to_json(const DatasetStatistics& stats) {
  nlohmann::json cs = nlohmann::json::array();
  for (const auto& s : stats.cs_stats) {
    nlohmann::json occ = nlohmann::json::object();
    for (const auto& [p, n] : s.occurrences) occ[p] = n;
    cs.push_back({{"props", s.cs.properties}, {"count", s.count}, {"occ", std::move(occ)}});
  }
  nlohmann::json cp = nlohmann::json::array();
  for (const auto& c : stats.cp_stats)
    cp.push_back({{"src", c.source_cs}, {"dst", c.target_cs}, {"pred", c.predicate}, {"count", c.count}});
  nlohmann::json j = {{"dataset_id", stats.dataset_id},
                      {"merged", stats.merged},
                      {"cs_budget", stats.cs_budget},
                      {"cs", std::move(cs)},
                      {"cp", std::move(cp)}};
  if (stats.catch_all) j["catch_all"] = *stats.catch_all;
  return j;
}

DatasetStatistics statistics_from_json(const nlohmann::json& j) {
  try {
    DatasetStatistics stats;
    stats.dataset_id = j.at("dataset_id").get<std::string>();
    stats.merged = j.at("merged").get<bool>();
    stats.cs_budget = j.value("cs_budget", std::size_t{0});
    for (const auto& c : j.at("cs")) {
      CsStatistics s;
      s.cs = CharacteristicSet(c.at("props").get<std::vector<std::string>>());
      s.count = c.at("count").get<std::uint64_t>();
      for (const auto& [p, n] : c.at("occ").items()) s.occurrences[p] = n.get<std::uint64_t>();
      stats.cs_stats.push_back(std::move(s));
    }
    for (const auto& c : j.at("cp")) {
      CpStatistics cp{c.at("src").get<std::size_t>(), c.at("dst").get<std::size_t>(),
                      c.at("pred").get<std::string>(), c.at("count").get<std::uint64_t>()};
      if (cp.source_cs >= stats.cs_stats.size() || cp.target_cs >= stats.cs_stats.size())
        throw FormatError("CP references unknown CS index");
      stats.cp_stats.push_back(std::move(cp));
    }
    if (j.contains("catch_all")) stats.catch_all = j.at("catch_all").get<std::size_t>();
    sort_cps(stats.cp_stats);
    return stats;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed statistics document: ") + e.what());
  }
}

}  // namespace odyssey
