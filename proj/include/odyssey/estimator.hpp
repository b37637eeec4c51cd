#pragma once

#include <concepts>
#include <cstdint>
#include <span>
#include <string>

#include "odyssey/cs_builder.hpp"
#include "odyssey/rational.hpp"

namespace odyssey {

enum class Basis { Cs, Cp, Fcp };

const char* to_string(Basis b) noexcept;

struct CardinalityEstimate {
  Rational value = 0;
  bool exact = false;
  Basis basis = Basis::Cs;
  std::size_t contributing = 0;  // CSs or CPs/FCPs that matched
};

// Number of distinct subjects having every predicate in P (sum of count(C)
// over CSs C that contain P). Exact on unmerged statistics.
CardinalityEstimate star_cardinality_distinct(const PredicateSet& P, const DatasetStatistics& stats);

// Bag cardinality of the star: each matching CS contributes
// count(C) * prod_{p in P} occurrences(p, C) / count(C).
CardinalityEstimate star_cardinality_bag(const PredicateSet& P, const DatasetStatistics& stats);

// Any CP/FCP record: CS ids plus link predicate and count.
template <typename T>
concept LinkStatistic = requires(const T& t) {
  { t.source_cs } -> std::convertible_to<std::size_t>;
  { t.target_cs } -> std::convertible_to<std::size_t>;
  { t.predicate } -> std::convertible_to<const std::string&>;
  { t.count } -> std::convertible_to<std::uint64_t>;
};

namespace detail {

inline Rational multiplicity(const CsStatistics& s, const std::string& p) {
  if (s.count == 0) return 0;
  return Rational(s.occurrences_of(p)) / Rational(s.count);
}

template <typename T>
constexpr bool is_exact_entry(const T& t) {
  if constexpr (requires { t.exact; }) return t.exact;
  else return true;
}

}  // namespace detail

// Distinct (subject, object) pairs linked via p where the subject side has
// every predicate of Pk and the object side every predicate of Pl.
template <LinkStatistic Link>
CardinalityEstimate link_cardinality_distinct(const PredicateSet& Pk, const PredicateSet& Pl, const std::string& p,
                                              std::span<const Link> links, const DatasetStatistics& src,
                                              const DatasetStatistics& dst, Basis basis = Basis::Cp) {
  CardinalityEstimate est;
  est.basis = basis;
  est.exact = !src.merged && !dst.merged;
  for (const auto& l : links) {
    if (l.predicate != p) continue;
    if (!src.cs_stats[l.source_cs].cs.contains_all(Pk) || !dst.cs_stats[l.target_cs].cs.contains_all(Pl)) continue;
    est.value += l.count;
    est.exact = est.exact && detail::is_exact_entry(l);
    ++est.contributing;
  }
  return est;
}

// Bag variant: each matching link count is scaled by the average
// multiplicity of the other source-star predicates and of every target-star
// predicate. The link predicate itself is already covered by the count.
template <LinkStatistic Link>
CardinalityEstimate link_cardinality_bag(const PredicateSet& Pk, const PredicateSet& Pl, const std::string& p,
                                         std::span<const Link> links, const DatasetStatistics& src,
                                         const DatasetStatistics& dst, Basis basis = Basis::Cp) {
  CardinalityEstimate est;
  est.basis = basis;
  est.exact = false;
  for (const auto& l : links) {
    if (l.predicate != p) continue;
    const auto& ci = src.cs_stats[l.source_cs];
    const auto& cj = dst.cs_stats[l.target_cs];
    if (!ci.cs.contains_all(Pk) || !cj.cs.contains_all(Pl)) continue;
    Rational term = l.count;
    for (const auto& pk : Pk)
      if (pk != p) term *= detail::multiplicity(ci, pk);
    for (const auto& pl : Pl) term *= detail::multiplicity(cj, pl);
    est.value += term;
    ++est.contributing;
  }
  return est;
}

}  // namespace odyssey
