#include "odyssey/estimator.hpp"

namespace odyssey {

const char* to_string(Basis b) noexcept {
  switch (b) {
    case Basis::Cs: return "cs";
    case Basis::Cp: return "cp";
    case Basis::Fcp: return "fcp";
  }
  return "?";
}

CardinalityEstimate star_cardinality_distinct(const PredicateSet& P, const DatasetStatistics& stats) {
  CardinalityEstimate est;
  est.basis = Basis::Cs;
  est.exact = !stats.merged;
  for (const auto& s : stats.cs_stats) {
    if (!s.cs.contains_all(P)) continue;
    est.value += s.count;
    ++est.contributing;
  }
  return est;
}

CardinalityEstimate star_cardinality_bag(const PredicateSet& P, const DatasetStatistics& stats) {
  CardinalityEstimate est;
  est.basis = Basis::Cs;
  est.exact = false;
  for (const auto& s : stats.cs_stats) {
    if (!s.cs.contains_all(P) || s.count == 0) continue;
    Rational term = s.count;
    for (const auto& p : P) term *= detail::multiplicity(s, p);
    est.value += term;
    ++est.contributing;
  }
  return est;
}

}  // namespace odyssey
