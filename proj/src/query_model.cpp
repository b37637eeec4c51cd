#include "odyssey/query_model.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>

#include "odyssey/errors.hpp"

namespace odyssey {

namespace {

constexpr const char* kXsd = "http://www.w3.org/2001/XMLSchema#";
constexpr const char* kRdfType = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";

std::string upper(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

bool is_name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || static_cast<unsigned char>(c) >= 0x80;
}

class Parser {
 public:
  explicit Parser(std::string_view text) : s_(text) {}

  Query run() {
    Query q;
    skip_ws();
    while (peek_keyword("PREFIX") || peek_keyword("BASE")) {
      if (peek_keyword("BASE")) throw UnsupportedFeature("BASE");
      consume_keyword("PREFIX");
      skip_ws();
      std::size_t start = pos_;
      while (pos_ < s_.size() && s_[pos_] != ':' && is_name_char(s_[pos_])) ++pos_;
      std::string name(s_.substr(start, pos_ - start));
      expect(':');
      skip_ws();
      prefixes_[name] = read_iri();
      skip_ws();
    }
    for (const char* form : {"CONSTRUCT", "ASK", "DESCRIBE", "INSERT", "DELETE"})
      if (peek_keyword(form)) throw UnsupportedFeature(form);
    consume_keyword("SELECT");
    skip_ws();
    if (peek_keyword("DISTINCT")) {
      consume_keyword("DISTINCT");
      q.distinct = true;
    } else if (peek_keyword("REDUCED")) {
      throw UnsupportedFeature("REDUCED");
    }
    skip_ws();
    if (at('*')) {
      ++pos_;
    } else {
      while (at('?') || at('$')) {
        q.projection.push_back(read_variable().name);
        skip_ws();
      }
      if (at('(')) throw UnsupportedFeature("projection expression");
      if (q.projection.empty()) fail("expected '*' or variables after SELECT");
    }
    skip_ws();
    if (peek_keyword("FROM")) throw UnsupportedFeature("FROM");
    if (peek_keyword("WHERE")) consume_keyword("WHERE");
    skip_ws();
    expect('{');
    parse_bgp(q);
    expect('}');
    skip_ws();
    for (const char* mod : {"ORDER", "LIMIT", "OFFSET", "GROUP", "HAVING", "VALUES"})
      if (peek_keyword(mod)) throw UnsupportedFeature(mod);
    if (pos_ != s_.size()) fail("unexpected trailing input");

    std::set<std::string> vars;
    for (const auto& tp : q.patterns)
      for (auto& v : tp.variables()) vars.insert(v);
    for (const auto& v : q.projection)
      if (!vars.count(v)) throw SyntaxError(0, "projected variable ?" + v + " does not occur in the pattern");
    return q;
  }

 private:
  [[noreturn]] void fail(const std::string& reason) const { throw SyntaxError(pos_, reason); }

  bool at(char c) const { return pos_ < s_.size() && s_[pos_] == c; }

  void expect(char c) {
    skip_ws();
    if (!at(c)) fail(std::string("expected '") + c + "'");
    ++pos_;
    skip_ws();
  }

  void skip_ws() {
    while (pos_ < s_.size()) {
      char c = s_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else if (c == '#') {
        while (pos_ < s_.size() && s_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  bool peek_keyword(std::string_view kw) const {
    if (s_.size() - pos_ < kw.size()) return false;
    if (upper(s_.substr(pos_, kw.size())) != kw) return false;
    return pos_ + kw.size() == s_.size() || !is_name_char(s_[pos_ + kw.size()]);
  }

  void consume_keyword(std::string_view kw) {
    if (!peek_keyword(kw)) fail("expected " + std::string(kw));
    pos_ += kw.size();
  }

  std::string read_iri() {
    if (!at('<')) fail("expected IRI");
    auto end = s_.find('>', pos_);
    if (end == std::string_view::npos) fail("unterminated IRI");
    std::string iri(s_.substr(pos_ + 1, end - pos_ - 1));
    pos_ = end + 1;
    return iri;
  }

  Variable read_variable() {
    ++pos_;  // '?' or '$'
    std::size_t start = pos_;
    while (pos_ < s_.size() && is_name_char(s_[pos_])) ++pos_;
    if (pos_ == start) fail("empty variable name");
    return Variable{std::string(s_.substr(start, pos_ - start))};
  }

  std::string read_prefixed_name() {
    std::size_t start = pos_;
    while (pos_ < s_.size() && s_[pos_] != ':' && is_name_char(s_[pos_])) ++pos_;
    if (!at(':')) {
      pos_ = start;
      fail("expected term");
    }
    std::string prefix(s_.substr(start, pos_ - start));
    ++pos_;
    std::size_t local_start = pos_;
    while (pos_ < s_.size() && (is_name_char(s_[pos_]) || s_[pos_] == '.' || s_[pos_] == '%')) ++pos_;
    // A local name never ends with '.'; that dot terminates the triple.
    while (pos_ > local_start && s_[pos_ - 1] == '.') --pos_;
    auto it = prefixes_.find(prefix);
    if (it == prefixes_.end()) {
      pos_ = start;
      fail("undeclared prefix '" + prefix + ":'");
    }
    return it->second + std::string(s_.substr(local_start, pos_ - local_start));
  }

  Term read_literal() {
    char quote = s_[pos_];
    std::size_t start = pos_;
    ++pos_;
    std::string lex;
    while (pos_ < s_.size() && s_[pos_] != quote) {
      if (s_[pos_] == '\\' && pos_ + 1 < s_.size()) {
        char e = s_[pos_ + 1];
        switch (e) {
          case 'n': lex += '\n'; break;
          case 't': lex += '\t'; break;
          case 'r': lex += '\r'; break;
          case '"': lex += '"'; break;
          case '\'': lex += '\''; break;
          case '\\': lex += '\\'; break;
          default: pos_ += 1; fail("unsupported escape");
        }
        pos_ += 2;
      } else {
        lex += s_[pos_++];
      }
    }
    if (pos_ >= s_.size()) {
      pos_ = start;
      fail("unterminated literal");
    }
    ++pos_;
    if (at('@')) {
      ++pos_;
      std::size_t ls = pos_;
      while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '-')) ++pos_;
      return Term::literal(lex, {}, std::string(s_.substr(ls, pos_ - ls)));
    }
    if (s_.substr(pos_, 2) == "^^") {
      pos_ += 2;
      std::string dt = at('<') ? read_iri() : read_prefixed_name();
      return Term::literal(lex, dt);
    }
    return Term::literal(lex);
  }

  Term read_number() {
    std::size_t start = pos_;
    if (at('+') || at('-')) ++pos_;
    bool dot = false, exp = false;
    while (pos_ < s_.size()) {
      char c = s_[pos_];
      if (std::isdigit(static_cast<unsigned char>(c))) {
        ++pos_;
      } else if (c == '.' && !dot && !exp && pos_ + 1 < s_.size() &&
                 std::isdigit(static_cast<unsigned char>(s_[pos_ + 1]))) {
        dot = true;
        ++pos_;
      } else if ((c == 'e' || c == 'E') && !exp) {
        exp = true;
        ++pos_;
        if (at('+') || at('-')) ++pos_;
      } else {
        break;
      }
    }
    std::string lex(s_.substr(start, pos_ - start));
    const char* type = exp ? "double" : dot ? "decimal" : "integer";
    return Term::literal(lex, std::string(kXsd) + type);
  }

  PatternTerm read_term(bool predicate_position) {
    skip_ws();
    if (pos_ >= s_.size()) fail("unexpected end of query");
    char c = s_[pos_];
    if (c == '?' || c == '$') return read_variable();
    if (c == '<') return Term::iri(read_iri());
    if (c == '_' || c == '[') throw UnsupportedFeature("blank node");
    if (c == '(') throw UnsupportedFeature("collection");
    if (c == '^' || c == '!') throw UnsupportedFeature("property path");
    if (c == '"' || c == '\'') {
      if (predicate_position) fail("literal in predicate position");
      return read_literal();
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '+' || c == '-') {
      if (predicate_position) fail("number in predicate position");
      return read_number();
    }
    // `a` is case-sensitive, unlike the keywords.
    if (predicate_position && c == 'a' && (pos_ + 1 == s_.size() || !is_name_char(s_[pos_ + 1])) &&
        !(pos_ + 1 < s_.size() && s_[pos_ + 1] == ':')) {
      ++pos_;
      return Term::iri(kRdfType);
    }
    if (!predicate_position && (peek_keyword("TRUE") || peek_keyword("FALSE"))) {
      std::string lex = peek_keyword("TRUE") ? "true" : "false";
      pos_ += lex.size();
      return Term::literal(lex, std::string(kXsd) + "boolean");
    }
    return Term::iri(read_prefixed_name());
  }

  void reject_group_keywords() {
    for (const char* kw : {"FILTER", "OPTIONAL", "UNION", "MINUS", "BIND", "VALUES", "SERVICE", "GRAPH"})
      if (peek_keyword(kw)) throw UnsupportedFeature(kw);
    if (at('{')) throw UnsupportedFeature("nested group");
  }

  void check_path_after_predicate() {
    skip_ws();
    if (at('/') || at('|') || at('*') || at('+') || at('^')) throw UnsupportedFeature("property path");
    // '?' directly glued to a predicate is a path modifier; a separated one
    // starts the object variable.
    if (at('?') && pos_ > 0 && !std::isspace(static_cast<unsigned char>(s_[pos_ - 1])))
      throw UnsupportedFeature("property path");
  }

  void parse_bgp(Query& q) {
    int label = 0;
    while (true) {
      skip_ws();
      if (at('}')) return;
      reject_group_keywords();
      PatternTerm subject = read_term(false);
      if (std::holds_alternative<Term>(subject) && std::get<Term>(subject).is_literal())
        fail("literal in subject position");
      while (true) {
        PatternTerm predicate = read_term(true);
        check_path_after_predicate();
        while (true) {
          PatternTerm object = read_term(false);
          q.patterns.push_back(TriplePattern{subject, predicate, object, ++label});
          skip_ws();
          if (!at(',')) break;
          ++pos_;
        }
        skip_ws();
        if (!at(';')) break;
        ++pos_;
        skip_ws();
        if (at('.') || at('}')) break;  // trailing ';'
      }
      skip_ws();
      if (at('.')) {
        ++pos_;
        continue;
      }
      if (at('}')) return;
      reject_group_keywords();
      fail("expected '.', ';', ',' or '}'");
    }
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  std::map<std::string, std::string> prefixes_;
};

}  // namespace

std::vector<std::string> Query::projected_variables() const {
  if (!projection.empty()) return projection;
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& tp : patterns)
    for (const auto& v : tp.variables())
      if (seen.insert(v).second) out.push_back(v);
  return out;
}

Query parse_query(std::string_view text) { return Parser(text).run(); }

std::string render_select(std::span<const TriplePattern> patterns, const std::vector<std::string>& projection,
                          bool distinct) {
  std::ostringstream os;
  os << "SELECT ";
  if (distinct) os << "DISTINCT ";
  if (projection.empty()) {
    os << '*';
  } else {
    for (std::size_t i = 0; i < projection.size(); ++i) os << (i ? " ?" : "?") << projection[i];
  }
  os << " WHERE {";
  for (const auto& tp : patterns) os << ' ' << to_string(tp.subject) << ' ' << to_string(tp.predicate) << ' '
                                     << to_string(tp.object) << " .";
  os << " }";
  return os.str();
}

std::set<std::string> StarSubquery::variables() const {
  std::set<std::string> out;
  for (const auto& tp : patterns)
    for (auto& v : tp.variables()) out.insert(std::move(v));
  return out;
}

std::vector<std::string> StarGraph::shared_variables(std::size_t a, std::size_t b) const {
  auto va = stars[a].variables();
  auto vb = stars[b].variables();
  std::vector<std::string> out;
  std::set_intersection(va.begin(), va.end(), vb.begin(), vb.end(), std::back_inserter(out));
  return out;
}

bool StarGraph::adjacent(std::size_t a, std::size_t b) const {
  for (const auto& l : links)
    if ((l.from == a && l.to == b) || (l.from == b && l.to == a)) return true;
  return !shared_variables(a, b).empty();
}

StarGraph decompose_stars(const Query& q) {
  for (const auto& tp : q.patterns)
    if (is_variable(tp.predicate))
      throw FallbackRequired("pattern tp" + std::to_string(tp.label) + " has a variable predicate");

  std::vector<TriplePattern> sorted = q.patterns;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.label < b.label; });

  StarGraph g;
  std::map<std::string, std::size_t> by_center;
  for (const auto& tp : sorted) {
    std::string key = to_string(tp.subject);
    auto [it, fresh] = by_center.try_emplace(key, g.stars.size());
    if (fresh) g.stars.push_back(StarSubquery{tp.subject, {}, {}});
    g.stars[it->second].patterns.push_back(tp);
  }
  for (auto& star : g.stars) {
    std::vector<std::string> preds;
    for (const auto& tp : star.patterns) preds.push_back(std::get<Term>(tp.predicate).value());
    star.P = make_predicate_set(std::move(preds));
  }
  for (std::size_t k = 0; k < g.stars.size(); ++k) {
    for (const auto& tp : g.stars[k].patterns) {
      auto it = by_center.find(to_string(tp.object));
      if (it == by_center.end() || it->second == k) continue;
      g.links.push_back(StarLink{k, it->second, std::get<Term>(tp.predicate).value(), tp.label});
    }
  }
  std::sort(g.links.begin(), g.links.end(), [](const auto& a, const auto& b) {
    return std::tie(a.from, a.to, a.label) < std::tie(b.from, b.to, b.label);
  });
  return g;
}

}  // namespace odyssey
