#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "odyssey/cs_builder.hpp"
#include "odyssey/rdf_model.hpp"

namespace odyssey {

struct ObjectKey {
  std::string predicate;
  std::size_t cs = 0;

  friend bool operator==(const ObjectKey&, const ObjectKey&) = default;
  friend auto operator<=>(const ObjectKey&, const ObjectKey&) = default;
};

// local_subjects(C): IRIs of subjects attributed to CS C.
// local_objects(p, C): IRI objects of triples (e, p, o) with e in CS C, each
// with the number of such triples.
struct EntityDescriptions {
  std::string dataset_id;
  std::map<std::size_t, std::set<std::string>> local_subjects;
  std::map<ObjectKey, std::map<std::string, std::uint64_t>> local_objects;
};

// IRIs only; blank nodes never link across datasets.
EntityDescriptions build_descriptions(const Dataset& d, const DatasetStatistics& stats);

nlohmann::json to_json(const EntityDescriptions& desc);
EntityDescriptions descriptions_from_json(const nlohmann::json& j);

// Splits after the last '/' or '#'. Without either, the prefix is empty.
std::pair<std::string, std::string> split_iri(std::string_view iri);

inline constexpr std::string_view kSuffixHashId = "fnv1a-64";

// FNV-1a over the UTF-8 bytes of the suffix.
constexpr std::uint64_t suffix_hash(std::string_view suffix) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : suffix) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint16_t lsb(std::uint64_t h) noexcept { return static_cast<std::uint16_t>(h % 65536); }

// lsb value -> multiplicity
using LsbMultiset = std::map<std::uint16_t, std::uint32_t>;

// Bucket (children non-empty) or leaf (children empty). num counts the lsb
// entries (with multiplicity) summarized below the node.
struct SynopsisNode {
  std::uint64_t mn = 0;
  std::uint64_t mx = 0;
  std::uint64_t num = 0;
  std::vector<SynopsisNode> children;
  std::map<std::size_t, LsbMultiset> subj;
  std::map<ObjectKey, LsbMultiset> obj;

  bool is_leaf() const noexcept { return children.empty(); }
  bool overlaps(const SynopsisNode& other) const noexcept { return mn <= other.mx && other.mn <= mx; }
};

struct SynopsisTree {
  std::string dataset_id;
  std::string hash_fn_id{kSuffixHashId};
  std::size_t leaf_capacity = 4096;
  std::map<std::string, SynopsisNode> prefixes;
};

inline constexpr std::size_t kDefaultLeafCapacity = 4096;
inline constexpr std::size_t kBucketFanout = 16;

// Role of an IRI in the descriptions: subject of CS `cs`, or object of
// predicate `predicate` for subjects of CS `cs`.
struct Role {
  enum class Kind { Subject, Object };
  Kind kind = Kind::Subject;
  std::size_t cs = 0;
  std::string predicate;

  static Role subject(std::size_t cs) { return {Kind::Subject, cs, {}}; }
  static Role object(std::string predicate, std::size_t cs) { return {Kind::Object, cs, std::move(predicate)}; }
};

// Throws std::invalid_argument if leaf_capacity is 0.
SynopsisTree build_tree(const EntityDescriptions& desc, std::size_t leaf_capacity = kDefaultLeafCapacity);

// False only if the IRI was certainly not inserted in that role.
bool membership_maybe(const SynopsisTree& tree, std::string_view iri, const Role& role);

// Decrements the lsb multiplicity of `iri` in `role`; node ranges are left
// as they are. Throws NotPresent if membership_maybe is false.
SynopsisTree remove_entity(SynopsisTree tree, std::string_view iri, const Role& role);

// Structural violations (empty when the tree is well formed): num sums,
// range containment, disjoint sorted children, lsb bounds.
std::vector<std::string> audit(const SynopsisTree& tree);

nlohmann::json to_json(const SynopsisTree& tree);
SynopsisTree synopsis_from_json(const nlohmann::json& j);

}  // namespace odyssey
