#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "odyssey/cs_builder.hpp"
#include "odyssey/rdf_model.hpp"

namespace odyssey {

struct Query {
  std::vector<TriplePattern> patterns;  // labels 1..n in textual order
  bool distinct = false;
  std::vector<std::string> projection;  // empty means SELECT *

  // Projection with `*` expanded to every pattern variable in order of first
  // appearance.
  std::vector<std::string> projected_variables() const;
};

// Parses SELECT [DISTINCT] (* | ?v ...) WHERE { BGP } with PREFIX
// declarations, the `;` / `,` abbreviations, `a`, and literal shorthands.
// Throws UnsupportedFeature or SyntaxError (byte offset).
Query parse_query(std::string_view text);

// SPARQL rendering of a BGP with full IRIs, used for remote subqueries.
std::string render_select(std::span<const TriplePattern> patterns, const std::vector<std::string>& projection,
                          bool distinct);

struct StarSubquery {
  PatternTerm center;
  std::vector<TriplePattern> patterns;  // ascending label
  PredicateSet P;

  std::set<std::string> variables() const;
  int first_label() const { return patterns.front().label; }
};

struct StarLink {
  std::size_t from = 0;  // star whose pattern carries the predicate
  std::size_t to = 0;    // star whose center is that pattern's object
  std::string predicate;
  int label = 0;  // tp label of the linking pattern

  friend bool operator==(const StarLink&, const StarLink&) = default;
};

struct StarGraph {
  std::vector<StarSubquery> stars;  // ordered by smallest tp label
  std::vector<StarLink> links;      // ordered by (from, to, label)

  std::vector<std::string> shared_variables(std::size_t a, std::size_t b) const;
  // True when stars a and b share a variable or are linked.
  bool adjacent(std::size_t a, std::size_t b) const;
};

// Groups patterns by subject term into stars and derives the links.
// Throws FallbackRequired when any predicate is a variable.
StarGraph decompose_stars(const Query& q);

}  // namespace odyssey
