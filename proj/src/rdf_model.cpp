#include "odyssey/rdf_model.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <sstream>

#include "odyssey/errors.hpp"

namespace odyssey {

namespace {

void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

bool iri_char_needs_escape(unsigned char c) {
  return c <= 0x20 || c == '<' || c == '>' || c == '"' || c == '{' || c == '}' || c == '|' ||
         c == '^' || c == '`' || c == '\\';
}

std::string escape_iri(const std::string& v) {
  std::string out;
  out.reserve(v.size());
  for (unsigned char c : v) {
    if (iri_char_needs_escape(c)) {
      char buf[8];
      std::snprintf(buf, sizeof buf, "\\u%04X", static_cast<unsigned>(c));
      out += buf;
    } else {
      out.push_back(static_cast<char>(c));
    }
  }
  return out;
}

std::string escape_literal(const std::string& v) {
  std::string out;
  out.reserve(v.size() + 2);
  for (char c : v) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

// Cursor over a single line / term. Errors are raised as SyntaxError with the
// line number supplied by the caller.
class TermReader {
 public:
  TermReader(std::string_view text, std::size_t line, const std::string& scope)
      : s_(text), line_(line), scope_(scope) {}

  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == '\r')) ++pos_;
  }
  bool at_end() const { return pos_ >= s_.size(); }
  char peek() const { return at_end() ? '\0' : s_[pos_]; }
  std::size_t pos() const { return pos_; }
  void advance() { ++pos_; }

  [[noreturn]] void fail(const std::string& why) const { throw SyntaxError(line_, why); }

  Term read_subject() {
    char c = peek();
    if (c == '<') return Term::iri(read_iri());
    if (c == '_') return read_blank();
    fail("expected IRI or blank node as subject");
  }

  Term read_predicate() {
    if (peek() != '<') fail("expected IRI as predicate");
    return Term::iri(read_iri());
  }

  Term read_object() {
    char c = peek();
    if (c == '<') return Term::iri(read_iri());
    if (c == '_') return read_blank();
    if (c == '"') return read_literal();
    fail("expected IRI, blank node or literal as object");
  }

  Term read_any() { return read_object(); }

 private:
  std::uint32_t read_hex(int digits) {
    if (pos_ + digits > s_.size()) fail("truncated unicode escape");
    std::uint32_t v = 0;
    for (int i = 0; i < digits; ++i) {
      char c = s_[pos_++];
      v <<= 4;
      if (c >= '0' && c <= '9') v |= static_cast<std::uint32_t>(c - '0');
      else if (c >= 'a' && c <= 'f') v |= static_cast<std::uint32_t>(c - 'a' + 10);
      else if (c >= 'A' && c <= 'F') v |= static_cast<std::uint32_t>(c - 'A' + 10);
      else fail("bad hex digit in unicode escape");
    }
    return v;
  }

  std::string read_iri() {
    ++pos_;  // '<'
    std::string out;
    while (true) {
      if (at_end()) fail("unterminated IRI");
      char c = s_[pos_++];
      if (c == '>') break;
      if (c == '\\') {
        if (at_end()) fail("dangling escape in IRI");
        char e = s_[pos_++];
        if (e == 'u') append_utf8(out, read_hex(4));
        else if (e == 'U') append_utf8(out, read_hex(8));
        else fail("invalid escape in IRI");
        continue;
      }
      if (iri_char_needs_escape(static_cast<unsigned char>(c))) fail("invalid character in IRI");
      out.push_back(c);
    }
    if (out.empty()) fail("empty IRI");
    return out;
  }

  Term read_blank() {
    if (s_.substr(pos_, 2) != "_:") fail("expected '_:'");
    pos_ += 2;
    std::size_t start = pos_;
    while (!at_end()) {
      unsigned char c = static_cast<unsigned char>(s_[pos_]);
      if (std::isalnum(c) || c == '_' || c == '-' || c == '.' || c >= 0x80) ++pos_;
      else break;
    }
    while (pos_ > start && s_[pos_ - 1] == '.') --pos_;
    if (pos_ == start) fail("empty blank node label");
    return Term::blank(std::string(s_.substr(start, pos_ - start)), scope_);
  }

  Term read_literal() {
    ++pos_;  // '"'
    std::string lex;
    while (true) {
      if (at_end()) fail("unterminated literal");
      char c = s_[pos_++];
      if (c == '"') break;
      if (c == '\\') {
        if (at_end()) fail("dangling escape in literal");
        char e = s_[pos_++];
        switch (e) {
          case 't': lex.push_back('\t'); break;
          case 'b': lex.push_back('\b'); break;
          case 'n': lex.push_back('\n'); break;
          case 'r': lex.push_back('\r'); break;
          case 'f': lex.push_back('\f'); break;
          case '"': lex.push_back('"'); break;
          case '\'': lex.push_back('\''); break;
          case '\\': lex.push_back('\\'); break;
          case 'u': append_utf8(lex, read_hex(4)); break;
          case 'U': append_utf8(lex, read_hex(8)); break;
          default: fail("invalid escape in literal");
        }
        continue;
      }
      if (c == '\n' || c == '\r') fail("raw line break in literal");
      lex.push_back(c);
    }
    if (peek() == '@') {
      ++pos_;
      std::size_t start = pos_;
      while (!at_end() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '-')) ++pos_;
      if (pos_ == start) fail("empty language tag");
      return Term::literal(std::move(lex), {}, std::string(s_.substr(start, pos_ - start)));
    }
    if (s_.substr(pos_, 2) == "^^") {
      pos_ += 2;
      if (peek() != '<') fail("expected datatype IRI");
      return Term::literal(std::move(lex), read_iri());
    }
    return Term::literal(std::move(lex));
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  std::size_t line_;
  const std::string& scope_;
};

Triple parse_line(std::string_view line, std::size_t line_no, const std::string& scope) {
  TermReader r(line, line_no, scope);
  r.skip_ws();
  Triple t;
  t.subject = r.read_subject();
  r.skip_ws();
  t.predicate = r.read_predicate();
  r.skip_ws();
  t.object = r.read_object();
  r.skip_ws();
  if (r.peek() != '.') r.fail("missing terminating '.'");
  r.advance();
  r.skip_ws();
  if (!r.at_end() && r.peek() != '#') r.fail("trailing characters after '.'");
  return t;
}

bool blank_or_comment(std::string_view line) {
  for (char c : line) {
    if (c == ' ' || c == '\t' || c == '\r') continue;
    return c == '#';
  }
  return true;
}

}  // namespace

Term Term::iri(std::string value) {
  Term t;
  t.kind_ = Kind::Iri;
  t.nt_ = "<" + escape_iri(value) + ">";
  t.value_ = std::move(value);
  return t;
}

Term Term::literal(std::string lexical, std::string datatype, std::string lang) {
  Term t;
  t.kind_ = Kind::Literal;
  t.nt_ = "\"" + escape_literal(lexical) + "\"";
  if (!lang.empty()) t.nt_ += "@" + lang;
  else if (!datatype.empty()) t.nt_ += "^^<" + escape_iri(datatype) + ">";
  t.value_ = std::move(lexical);
  t.datatype_ = lang.empty() ? std::move(datatype) : std::string();
  t.lang_ = std::move(lang);
  return t;
}

Term Term::blank(std::string label, std::string scope) {
  Term t;
  t.kind_ = Kind::Blank;
  t.nt_ = "_:" + label;
  t.value_ = std::move(label);
  t.scope_ = std::move(scope);
  return t;
}

std::ostream& operator<<(std::ostream& os, const Term& t) { return os << t.str(); }

std::ostream& operator<<(std::ostream& os, const Triple& t) {
  return os << t.subject << ' ' << t.predicate << ' ' << t.object << " .";
}

Dataset::Dataset(std::string id, std::vector<Triple> triples)
    : id_(std::move(id)), triples_(std::move(triples)) {
  std::sort(triples_.begin(), triples_.end());
  triples_.erase(std::unique(triples_.begin(), triples_.end()), triples_.end());
  for (std::size_t i = 0; i < triples_.size(); ++i) {
    by_predicate_[triples_[i].predicate.value()].push_back(i);
  }
}

std::span<const Triple> Dataset::with_subject(const Term& subject) const {
  auto lo = std::lower_bound(triples_.begin(), triples_.end(), subject,
                             [](const Triple& t, const Term& s) { return t.subject < s; });
  auto hi = std::upper_bound(lo, triples_.end(), subject,
                             [](const Term& s, const Triple& t) { return s < t.subject; });
  return {lo, hi};
}

std::span<const Triple> Dataset::with_subject_predicate(const Term& subject, const Term& predicate) const {
  auto run = with_subject(subject);
  auto lo = std::lower_bound(run.begin(), run.end(), predicate,
                             [](const Triple& t, const Term& p) { return t.predicate < p; });
  auto hi = std::upper_bound(lo, run.end(), predicate,
                             [](const Term& p, const Triple& t) { return p < t.predicate; });
  return {lo, hi};
}

std::span<const std::size_t> Dataset::with_predicate(const std::string& predicate_iri) const {
  auto it = by_predicate_.find(predicate_iri);
  if (it == by_predicate_.end()) return {};
  return it->second;
}

ParseResult parse_ntriples(std::istream& in, const ParseOptions& options) {
  std::vector<Triple> triples;
  std::vector<std::string> warnings;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank_or_comment(line)) continue;
    try {
      triples.push_back(parse_line(line, line_no, options.dataset_id));
    } catch (const SyntaxError& e) {
      if (!options.lenient) throw;
      warnings.push_back(e.what());
    }
  }
  return {Dataset(options.dataset_id, std::move(triples)), std::move(warnings)};
}

ParseResult parse_ntriples(std::string_view text, const ParseOptions& options) {
  std::istringstream in{std::string(text)};
  return parse_ntriples(in, options);
}

ParseResult parse_ntriples_file(const std::string& path, const ParseOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return parse_ntriples(in, options);
}

Term parse_term(std::string_view text, const std::string& blank_scope) {
  TermReader r(text, 0, blank_scope);
  r.skip_ws();
  Term t = r.read_any();
  r.skip_ws();
  if (!r.at_end()) r.fail("trailing characters after term");
  return t;
}

void write_ntriples(const Dataset& d, std::ostream& out) {
  for (const auto& t : d.triples()) out << t << '\n';
}

std::vector<SubjectGroup> scan_by_subject(const Dataset& d) {
  std::vector<SubjectGroup> groups;
  auto all = d.triples();
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i + 1;
    while (j < all.size() && all[j].subject == all[i].subject) ++j;
    groups.push_back({&all[i].subject, all.subspan(i, j - i)});
    i = j;
  }
  return groups;
}

// --- patterns ---------------------------------------------------------------

std::string to_string(const PatternTerm& t) {
  if (const auto* v = std::get_if<Variable>(&t)) return "?" + v->name;
  return std::get<Term>(t).str();
}

PatternTerm parse_pattern_term(std::string_view text) {
  if (!text.empty() && (text[0] == '?' || text[0] == '$')) return Variable{std::string(text.substr(1))};
  return parse_term(text);
}

std::vector<std::string> TriplePattern::variables() const {
  std::vector<std::string> out;
  for (const auto* t : {&subject, &predicate, &object}) {
    if (const auto* v = std::get_if<Variable>(t)) {
      if (std::find(out.begin(), out.end(), v->name) == out.end()) out.push_back(v->name);
    }
  }
  return out;
}

std::string to_string(const TriplePattern& tp) {
  return to_string(tp.subject) + " " + to_string(tp.predicate) + " " + to_string(tp.object);
}

namespace {

// Resolves a pattern position against the current binding: either a bound
// term or the name of a still-free variable.
const Term* resolve(const PatternTerm& pt, const Binding& b, const std::string** free_var) {
  if (const auto* v = std::get_if<Variable>(&pt)) {
    auto it = b.find(v->name);
    if (it != b.end()) return &it->second;
    *free_var = &v->name;
    return nullptr;
  }
  return &std::get<Term>(pt);
}

bool unify(const PatternTerm& pt, const Term& value, Binding& b) {
  if (const auto* v = std::get_if<Variable>(&pt)) {
    auto [it, inserted] = b.try_emplace(v->name, value);
    return inserted || it->second == value;
  }
  return std::get<Term>(pt) == value;
}

}  // namespace

std::vector<Binding> evaluate_bgp(const Dataset& d, std::span<const TriplePattern> patterns, bool distinct) {
  std::vector<Binding> current;
  if (patterns.empty()) return current;
  current.emplace_back();
  for (const auto& tp : patterns) {
    std::vector<Binding> next;
    for (const auto& b : current) {
      const std::string* fs = nullptr;
      const std::string* fp = nullptr;
      const Term* s = resolve(tp.subject, b, &fs);
      const Term* p = resolve(tp.predicate, b, &fp);
      auto try_triple = [&](const Triple& t) {
        Binding ext = b;
        if (unify(tp.subject, t.subject, ext) && unify(tp.predicate, t.predicate, ext) &&
            unify(tp.object, t.object, ext)) {
          next.push_back(std::move(ext));
        }
      };
      if (s != nullptr) {
        auto run = p != nullptr ? d.with_subject_predicate(*s, *p) : d.with_subject(*s);
        for (const auto& t : run) try_triple(t);
      } else if (p != nullptr) {
        if (!p->is_iri()) continue;
        for (std::size_t idx : d.with_predicate(p->value())) try_triple(d.triples()[idx]);
      } else {
        for (const auto& t : d.triples()) try_triple(t);
      }
    }
    current = std::move(next);
    if (current.empty()) break;
  }
  if (distinct) {
    std::sort(current.begin(), current.end());
    current.erase(std::unique(current.begin(), current.end()), current.end());
  }
  return current;
}

}  // namespace odyssey
