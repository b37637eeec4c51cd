#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "odyssey/rdf_model.hpp"

namespace odyssey {

// Sorted, duplicate-free list of predicate IRIs.
using PredicateSet = std::vector<std::string>;

PredicateSet make_predicate_set(std::vector<std::string> predicates);

// True iff every element of `needle` is in `haystack` (both sorted).
bool includes(std::span<const std::string> haystack, std::span<const std::string> needle);

// The set of properties of an entity. Canonical order of CSs is the
// lexicographic order of their property lists.
struct CharacteristicSet {
  PredicateSet properties;

  CharacteristicSet() = default;
  explicit CharacteristicSet(std::vector<std::string> props) : properties(make_predicate_set(std::move(props))) {}

  std::size_t size() const noexcept { return properties.size(); }
  bool contains(const std::string& p) const;
  bool contains_all(std::span<const std::string> predicates) const { return includes(properties, predicates); }

  friend bool operator==(const CharacteristicSet&, const CharacteristicSet&) = default;
  friend auto operator<=>(const CharacteristicSet&, const CharacteristicSet&) = default;
};

struct CsStatistics {
  CharacteristicSet cs;
  std::uint64_t count = 0;
  // Total triples per predicate over the entities of `cs`.
  std::map<std::string, std::uint64_t> occurrences;

  std::uint64_t occurrences_of(const std::string& p) const;
};

// Link statistic between two CSs of the same dataset; CS ids index into
// DatasetStatistics::cs_stats.
struct CpStatistics {
  std::size_t source_cs = 0;
  std::size_t target_cs = 0;
  std::string predicate;
  std::uint64_t count = 0;

  friend bool operator==(const CpStatistics&, const CpStatistics&) = default;
};

struct DatasetStatistics {
  std::string dataset_id;
  std::vector<CsStatistics> cs_stats;  // canonical CS order; index = CS id
  std::vector<CpStatistics> cp_stats;  // ordered by (source, target, predicate)
  bool merged = false;
  std::size_t cs_budget = 0;  // 0 = unbounded
  // Index of the CS that absorbed removed CSs no kept CS could cover.
  std::optional<std::size_t> catch_all;

  std::optional<std::size_t> find(const CharacteristicSet& cs) const;
  std::uint64_t total_count() const;
};

CharacteristicSet characteristic_set_of(std::span<const Triple> subject_group);

// One CsStatistics per distinct property set among the subjects of `d`.
DatasetStatistics build_cs(const Dataset& d);

// Links (e1, p, e2) where e2 is itself a subject of `d`. `stats` must be the
// unmerged output of build_cs(d).
std::vector<CpStatistics> build_cp(const Dataset& d, const DatasetStatistics& stats);

// Keeps the `budget` CSs with the largest count and folds the others into
// them: into the smallest kept superset, else split into two parts each
// covered by a kept CS, else into a catch-all CS. The split part holding the
// larger overlap receives the entity count; the other part receives only its
// occurrences, so the total count is unchanged. CPs are rewritten to the kept
// CSs. Throws InvalidBudget if budget < 1.
DatasetStatistics merge_to_budget(const DatasetStatistics& stats, std::size_t budget);

// CS ids that an entity with exact property set `cs` is attributed to in
// `stats` (one id unless the CS was split during merging; empty if the set
// is unknown and there is no catch-all).
std::vector<std::size_t> resolve_cs(const DatasetStatistics& stats, const CharacteristicSet& cs);

// Subject -> CS ids (see resolve_cs).
std::unordered_map<Term, std::vector<std::size_t>> assign_subjects(const Dataset& d,
                                                                   const DatasetStatistics& stats);

// build_cs + build_cp, then merge_to_budget when the CS count exceeds budget.
DatasetStatistics build_statistics(const Dataset& d, std::size_t budget);

nlohmann::json to_json(const DatasetStatistics& stats);
DatasetStatistics statistics_from_json(const nlohmann::json& j);

}  // namespace odyssey
