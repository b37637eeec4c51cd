#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace odyssey {

// An RDF term. Ordering is byte-lexicographic on the N-Triples serialization;
// blank nodes additionally carry the scope (dataset) they were parsed in, so
// equal labels from different files never compare equal.
class Term {
 public:
  enum class Kind : std::uint8_t { Iri, Literal, Blank };

  Term() = default;

  static Term iri(std::string value);
  static Term literal(std::string lexical, std::string datatype = {}, std::string lang = {});
  static Term blank(std::string label, std::string scope = {});

  Kind kind() const noexcept { return kind_; }
  bool is_iri() const noexcept { return kind_ == Kind::Iri; }
  bool is_literal() const noexcept { return kind_ == Kind::Literal; }
  bool is_blank() const noexcept { return kind_ == Kind::Blank; }

  // IRI string, literal lexical form, or blank label.
  const std::string& value() const noexcept { return value_; }
  const std::string& datatype() const noexcept { return datatype_; }
  const std::string& lang() const noexcept { return lang_; }
  const std::string& scope() const noexcept { return scope_; }

  // N-Triples serialization.
  const std::string& str() const noexcept { return nt_; }

  friend bool operator==(const Term& a, const Term& b) noexcept {
    return a.nt_ == b.nt_ && a.scope_ == b.scope_;
  }
  friend std::strong_ordering operator<=>(const Term& a, const Term& b) noexcept {
    if (auto c = a.nt_.compare(b.nt_); c != 0) return c < 0 ? std::strong_ordering::less : std::strong_ordering::greater;
    if (auto c = a.scope_.compare(b.scope_); c != 0) return c < 0 ? std::strong_ordering::less : std::strong_ordering::greater;
    return std::strong_ordering::equal;
  }

 private:
  Kind kind_ = Kind::Iri;
  std::string value_;
  std::string datatype_;
  std::string lang_;
  std::string scope_;
  std::string nt_;
};

struct Triple {
  Term subject;
  Term predicate;
  Term object;

  friend bool operator==(const Triple&, const Triple&) = default;
  friend auto operator<=>(const Triple&, const Triple&) = default;
};

std::ostream& operator<<(std::ostream& os, const Term& t);
std::ostream& operator<<(std::ostream& os, const Triple& t);

// Immutable set of triples, sorted by (subject, predicate, object).
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::string id, std::vector<Triple> triples);

  const std::string& id() const noexcept { return id_; }
  std::span<const Triple> triples() const noexcept { return triples_; }
  std::size_t size() const noexcept { return triples_.size(); }
  bool empty() const noexcept { return triples_.empty(); }

  // Contiguous run of triples with the given subject (and predicate, if given).
  std::span<const Triple> with_subject(const Term& subject) const;
  std::span<const Triple> with_subject_predicate(const Term& subject, const Term& predicate) const;
  // Indices into triples() of all triples with the given predicate IRI.
  std::span<const std::size_t> with_predicate(const std::string& predicate_iri) const;

  bool has_subject(const Term& t) const { return !with_subject(t).empty(); }

 private:
  std::string id_;
  std::vector<Triple> triples_;
  std::unordered_map<std::string, std::vector<std::size_t>> by_predicate_;
};

struct ParseOptions {
  std::string dataset_id;
  // Skip malformed lines instead of throwing; each skipped line is reported
  // in ParseResult::warnings.
  bool lenient = false;
};

struct ParseResult {
  Dataset dataset;
  std::vector<std::string> warnings;
};

// Throws SyntaxError (line-numbered) unless options.lenient is set.
ParseResult parse_ntriples(std::istream& in, const ParseOptions& options = {});
ParseResult parse_ntriples(std::string_view text, const ParseOptions& options = {});
ParseResult parse_ntriples_file(const std::string& path, const ParseOptions& options = {});

// Parses a single N-Triples term (`<iri>`, `_:b`, `"lit"@en`, `"1"^^<dt>`).
Term parse_term(std::string_view text, const std::string& blank_scope = {});

void write_ntriples(const Dataset& d, std::ostream& out);

struct SubjectGroup {
  const Term* subject;
  std::span<const Triple> triples;
};

// Every subject exactly once, in ascending term order; each group holds all
// triples of that subject ordered by predicate then object.
std::vector<SubjectGroup> scan_by_subject(const Dataset& d);

// --- basic graph patterns ---------------------------------------------------

struct Variable {
  std::string name;  // without the leading '?'

  friend bool operator==(const Variable&, const Variable&) = default;
  friend auto operator<=>(const Variable&, const Variable&) = default;
};

using PatternTerm = std::variant<Variable, Term>;

std::string to_string(const PatternTerm& t);  // "?x" or the N-Triples form
PatternTerm parse_pattern_term(std::string_view text);

inline bool is_variable(const PatternTerm& t) { return std::holds_alternative<Variable>(t); }

struct TriplePattern {
  PatternTerm subject;
  PatternTerm predicate;
  PatternTerm object;
  int label = 0;  // 1-based tp index within the query

  std::vector<std::string> variables() const;

  friend bool operator==(const TriplePattern&, const TriplePattern&) = default;
};

std::string to_string(const TriplePattern& tp);

// Solution mapping: variable name -> bound term.
using Binding = std::map<std::string, Term>;

// Standard BGP matching. Patterns are evaluated in the given order. With
// `distinct` the result is a set (sorted); otherwise a bag.
std::vector<Binding> evaluate_bgp(const Dataset& d, std::span<const TriplePattern> patterns,
                                  bool distinct = false);

}  // namespace odyssey

template <>
struct std::hash<odyssey::Term> {
  std::size_t operator()(const odyssey::Term& t) const noexcept {
    return std::hash<std::string>{}(t.str()) ^ (std::hash<std::string>{}(t.scope()) << 1);
  }
};
