#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "odyssey/estimator.hpp"
#include "odyssey/fed_linker.hpp"
#include "odyssey/query_model.hpp"
#include "odyssey/rational.hpp"

namespace odyssey {

struct StarSources {
  std::vector<std::string> datasets;  // federation order
  std::map<std::string, std::vector<std::size_t>> relevant_cs;
};

// Reference to a statistic backing a link: a CP of one dataset or an FCP.
struct LinkEntry {
  enum class Kind { Cp, Fcp } kind = Kind::Cp;
  std::string dataset;  // Cp only
  std::size_t index = 0;  // into that dataset's cp_stats, or into fed.fcps

  friend auto operator<=>(const LinkEntry&, const LinkEntry&) = default;
};

struct LinkSupport {
  std::set<std::pair<std::string, std::string>> pairs;  // (source dataset, target dataset)
  std::vector<LinkEntry> entries;
};

struct SourceSelection {
  std::vector<StarSources> stars;  // parallel to StarGraph::stars
  std::vector<LinkSupport> links;  // parallel to StarGraph::links
  bool empty_result = false;

  // Sum over triple patterns of the number of selected sources.
  std::size_t nss(const StarGraph& sg) const;
};

// Datasets per star are those holding a CS that covers the star's
// predicates; link support prunes datasets that cannot take part in a link
// until nothing changes.
SourceSelection select_sources(const StarGraph& sg, const FederationStatistics& fed);

// Greedy order: repeatedly drop the pattern whose removal leaves the
// cheapest remaining subset (distinct-subject count over `datasets`) and put
// it last.
std::vector<TriplePattern> order_star(const StarSubquery& star, const FederationStatistics& fed,
                                      const std::vector<std::string>& datasets);

struct PlanNode {
  enum class Kind { Leaf, Join };
  Kind kind = Kind::Leaf;

  // Leaf
  std::size_t star = 0;
  std::vector<TriplePattern> patterns;
  std::vector<std::pair<std::string, Rational>> source_cards;  // per selected dataset

  // Join
  std::shared_ptr<const PlanNode> left;
  std::shared_ptr<const PlanNode> right;
  std::vector<std::string> join_vars;
  bool cartesian = false;

  Rational est_card = 0;
  Rational cost = 0;
  // Set when every star below is answered by this one endpoint; the whole
  // subtree then ships as one request.
  std::optional<std::string> endpoint;
  double endpoint_weight = 1;
  std::map<std::string, double> source_weights;  // leaf cost weights
  std::size_t remote_requests = 0;

  std::vector<std::size_t> star_sequence() const;  // leaves in order
};

using PlanPtr = std::shared_ptr<const PlanNode>;

// Leaf: weighted sum of per-source cards. Co-located subtree: its result
// size times the endpoint weight. Join: result size plus both inputs.
Rational plan_cost(const PlanNode& node);

struct DpEntry {
  std::uint64_t subset = 0;
  std::vector<std::size_t> stars;
  Rational est_card = 0;
  Rational cost = 0;
  std::size_t remote_requests = 0;
};

struct Plan {
  PlanPtr root;
  std::vector<DpEntry> table;  // best plan per connected subset, by subset
  bool empty_result = false;
};

// Exact DP over connected star subsets (bushy trees). Disconnected graphs are
// planned per component and then cross-joined in ascending cardinality.
Plan plan_joins(const StarGraph& sg, const SourceSelection& sel, const FederationStatistics& fed, bool distinct);

// Subset cardinality used by the planner. Exposed for inspection only.
class CardinalityModel {
 public:
  CardinalityModel(const StarGraph& sg, const SourceSelection& sel, const FederationStatistics& fed, bool distinct);

  const Rational& star_card(std::size_t k) const { return star_card_[k]; }
  const std::vector<std::pair<std::string, Rational>>& star_source_cards(std::size_t k) const {
    return source_cards_[k];
  }
  const Rational& link_card(std::size_t link) const { return link_card_[link]; }
  // Product of star cards times a factor per adjacent pair inside `subset`.
  Rational subset_card(std::uint64_t subset) const;

 private:
  const StarGraph& sg_;
  std::vector<Rational> star_card_;
  std::vector<std::vector<std::pair<std::string, Rational>>> source_cards_;
  std::vector<Rational> link_card_;
};

nlohmann::json to_json(const PlanNode& node);
nlohmann::json explain_json(const Plan& plan);

}  // namespace odyssey
