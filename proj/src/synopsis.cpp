#include "odyssey/synopsis.hpp"

#include <algorithm>
#include <stdexcept>

#include "odyssey/errors.hpp"

namespace odyssey {

EntityDescriptions build_descriptions(const Dataset& d, const DatasetStatistics& stats) {
  EntityDescriptions desc;
  desc.dataset_id = d.id();
  auto assignment = assign_subjects(d, stats);
  for (const auto& group : scan_by_subject(d)) {
    const auto& ids = assignment.at(*group.subject);
    if (group.subject->is_iri()) {
      for (auto id : ids) desc.local_subjects[id].insert(group.subject->value());
    }
    for (const auto& t : group.triples) {
      if (!t.object.is_iri()) continue;
      // For split CSs the link belongs to the part holding the predicate.
      for (auto id : ids) {
        if (ids.size() > 1 && !stats.cs_stats[id].cs.contains(t.predicate.value())) continue;
        ++desc.local_objects[{t.predicate.value(), id}][t.object.value()];
      }
    }
  }
  return desc;
}

nlohmann::json to_json(const EntityDescriptions& desc) {
  nlohmann::json subj = nlohmann::json::object();
  for (const auto& [cs, iris] : desc.local_subjects) subj[std::to_string(cs)] = iris;
  nlohmann::json obj = nlohmann::json::object();
  for (const auto& [key, iris] : desc.local_objects) obj[key.predicate + "|" + std::to_string(key.cs)] = iris;
  return {{"dataset_id", desc.dataset_id}, {"local_subjects", std::move(subj)}, {"local_objects", std::move(obj)}};
}

namespace {

ObjectKey parse_object_key(const std::string& key) {
  auto bar = key.rfind('|');
  if (bar == std::string::npos) throw FormatError("object key without '|': " + key);
  return {key.substr(0, bar), static_cast<std::size_t>(std::stoull(key.substr(bar + 1)))};
}

}  // namespace

EntityDescriptions descriptions_from_json(const nlohmann::json& j) {
  try {
    EntityDescriptions desc;
    desc.dataset_id = j.at("dataset_id").get<std::string>();
    for (const auto& [k, v] : j.at("local_subjects").items())
      desc.local_subjects[std::stoull(k)] = v.get<std::set<std::string>>();
    for (const auto& [k, v] : j.at("local_objects").items())
      desc.local_objects[parse_object_key(k)] = v.get<std::map<std::string, std::uint64_t>>();
    return desc;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed descriptions document: ") + e.what());
  }
}

std::pair<std::string, std::string> split_iri(std::string_view iri) {
  auto cut = iri.find_last_of("/#");
  if (cut == std::string_view::npos) return {std::string(), std::string(iri)};
  return {std::string(iri.substr(0, cut + 1)), std::string(iri.substr(cut + 1))};
}

namespace {

struct Entry {
  std::uint64_t hash;
  const Role* role;
};

// Sizes of `parts` groups differing by at most one, covering n items.
std::vector<std::size_t> balanced_sizes(std::size_t n, std::size_t parts) {
  std::vector<std::size_t> sizes(parts, n / parts);
  for (std::size_t i = 0; i < n % parts; ++i) ++sizes[i];
  return sizes;
}

void add_to_leaf(SynopsisNode& leaf, std::uint64_t h, const Role& role) {
  auto& ms = role.kind == Role::Kind::Subject ? leaf.subj[role.cs] : leaf.obj[{role.predicate, role.cs}];
  ++ms[lsb(h)];
  ++leaf.num;
}

SynopsisNode build_prefix(std::vector<Entry>& entries, std::size_t leaf_capacity) {
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.hash < b.hash; });
  std::vector<std::uint64_t> distinct;
  for (const auto& e : entries)
    if (distinct.empty() || distinct.back() != e.hash) distinct.push_back(e.hash);

  std::size_t n_leaves = (distinct.size() + leaf_capacity - 1) / leaf_capacity;
  std::vector<SynopsisNode> level;
  std::size_t di = 0, ei = 0;
  for (std::size_t sz : balanced_sizes(distinct.size(), n_leaves)) {
    SynopsisNode leaf;
    leaf.mn = distinct[di];
    leaf.mx = distinct[di + sz - 1];
    di += sz;
    while (ei < entries.size() && entries[ei].hash <= leaf.mx) {
      add_to_leaf(leaf, entries[ei].hash, *entries[ei].role);
      ++ei;
    }
    level.push_back(std::move(leaf));
  }

  // Middle levels: group consecutive nodes until one bucket remains. A single
  // leaf still gets a bucket above it so every prefix roots at a bucket.
  do {
    std::size_t n_groups = (level.size() + kBucketFanout - 1) / kBucketFanout;
    std::vector<SynopsisNode> parents;
    std::size_t ci = 0;
    for (std::size_t sz : balanced_sizes(level.size(), n_groups)) {
      SynopsisNode bucket;
      bucket.mn = level[ci].mn;
      bucket.mx = level[ci + sz - 1].mx;
      for (std::size_t k = 0; k < sz; ++k) {
        bucket.num += level[ci + k].num;
        bucket.children.push_back(std::move(level[ci + k]));
      }
      ci += sz;
      parents.push_back(std::move(bucket));
    }
    level = std::move(parents);
  } while (level.size() > 1);
  return std::move(level.front());
}

// Leaf whose range contains h, descending through buckets; nullptr if none.
template <typename Node>
Node* find_leaf(Node& root, std::uint64_t h, std::vector<Node*>* path = nullptr) {
  Node* node = &root;
  while (true) {
    if (h < node->mn || h > node->mx) return nullptr;
    if (path) path->push_back(node);
    if (node->is_leaf()) return node;
    auto& kids = node->children;
    auto it = std::upper_bound(kids.begin(), kids.end(), h,
                               [](std::uint64_t v, const SynopsisNode& c) { return v < c.mn; });
    if (it == kids.begin()) return nullptr;
    node = &*std::prev(it);
  }
}

const LsbMultiset* role_multiset(const SynopsisNode& leaf, const Role& role) {
  if (role.kind == Role::Kind::Subject) {
    auto it = leaf.subj.find(role.cs);
    return it == leaf.subj.end() ? nullptr : &it->second;
  }
  auto it = leaf.obj.find({role.predicate, role.cs});
  return it == leaf.obj.end() ? nullptr : &it->second;
}

}  // namespace

SynopsisTree build_tree(const EntityDescriptions& desc, std::size_t leaf_capacity) {
  if (leaf_capacity == 0) throw std::invalid_argument("leaf capacity must be at least 1");
  std::vector<Role> roles;
  std::map<std::string, std::vector<std::pair<std::uint64_t, std::size_t>>> raw;
  auto insert = [&](const std::string& iri, std::size_t role_idx) {
    auto [prefix, suffix] = split_iri(iri);
    raw[prefix].emplace_back(suffix_hash(suffix), role_idx);
  };
  for (const auto& [cs, iris] : desc.local_subjects) {
    roles.push_back(Role::subject(cs));
    for (const auto& iri : iris) insert(iri, roles.size() - 1);
  }
  // One entry per object IRI, however many triples point at it.
  for (const auto& [key, iris] : desc.local_objects) {
    roles.push_back(Role::object(key.predicate, key.cs));
    for (const auto& [iri, n] : iris) insert(iri, roles.size() - 1);
  }

  SynopsisTree tree;
  tree.dataset_id = desc.dataset_id;
  tree.leaf_capacity = leaf_capacity;
  for (auto& [prefix, items] : raw) {
    std::vector<Entry> entries;
    entries.reserve(items.size());
    for (const auto& [h, r] : items) entries.push_back({h, &roles[r]});
    tree.prefixes.emplace(prefix, build_prefix(entries, leaf_capacity));
  }
  return tree;
}

bool membership_maybe(const SynopsisTree& tree, std::string_view iri, const Role& role) {
  auto [prefix, suffix] = split_iri(iri);
  auto it = tree.prefixes.find(prefix);
  if (it == tree.prefixes.end()) return false;
  std::uint64_t h = suffix_hash(suffix);
  const SynopsisNode* leaf = find_leaf(it->second, h);
  if (leaf == nullptr) return false;
  const LsbMultiset* ms = role_multiset(*leaf, role);
  return ms != nullptr && ms->contains(lsb(h));
}

SynopsisTree remove_entity(SynopsisTree tree, std::string_view iri, const Role& role) {
  if (!membership_maybe(tree, iri, role)) throw NotPresent("IRI not present in that role: " + std::string(iri));
  auto [prefix, suffix] = split_iri(iri);
  std::uint64_t h = suffix_hash(suffix);
  std::vector<SynopsisNode*> path;
  SynopsisNode* leaf = find_leaf(tree.prefixes.at(prefix), h, &path);
  if (role.kind == Role::Kind::Subject) {
    auto& ms = leaf->subj.at(role.cs);
    if (--ms.at(lsb(h)) == 0) ms.erase(lsb(h));
    if (ms.empty()) leaf->subj.erase(role.cs);
  } else {
    ObjectKey key{role.predicate, role.cs};
    auto& ms = leaf->obj.at(key);
    if (--ms.at(lsb(h)) == 0) ms.erase(lsb(h));
    if (ms.empty()) leaf->obj.erase(key);
  }
  for (auto* node : path) --node->num;
  return tree;
}

namespace {

void audit_node(const SynopsisNode& node, const std::string& where, std::vector<std::string>& out) {
  if (node.mn > node.mx) out.push_back(where + ": mn > mx");
  if (node.is_leaf()) {
    std::uint64_t total = 0;
    for (const auto& [cs, ms] : node.subj)
      for (const auto& [v, m] : ms) total += m;
    for (const auto& [k, ms] : node.obj)
      for (const auto& [v, m] : ms) total += m;
    if (total != node.num) out.push_back(where + ": leaf num does not match lsb multiplicities");
    return;
  }
  std::uint64_t sum = 0;
  for (std::size_t i = 0; i < node.children.size(); ++i) {
    const auto& c = node.children[i];
    sum += c.num;
    if (c.mn < node.mn || c.mx > node.mx) out.push_back(where + ": child range escapes parent");
    if (i > 0 && node.children[i - 1].mx >= c.mn) out.push_back(where + ": child ranges overlap or unsorted");
    audit_node(c, where + "/" + std::to_string(i), out);
  }
  if (sum != node.num) out.push_back(where + ": bucket num is not the sum of its children");
}

nlohmann::json node_to_json(const SynopsisNode& node) {
  nlohmann::json j = {{"mn", node.mn}, {"mx", node.mx}, {"num", node.num}};
  if (!node.is_leaf()) {
    nlohmann::json kids = nlohmann::json::array();
    for (const auto& c : node.children) kids.push_back(node_to_json(c));
    j["children"] = std::move(kids);
    return j;
  }
  auto ms_json = [](const LsbMultiset& ms) {
    nlohmann::json m = nlohmann::json::object();
    for (const auto& [v, n] : ms) m[std::to_string(v)] = n;
    return m;
  };
  nlohmann::json subj = nlohmann::json::object();
  for (const auto& [cs, ms] : node.subj) subj[std::to_string(cs)] = ms_json(ms);
  nlohmann::json obj = nlohmann::json::object();
  for (const auto& [k, ms] : node.obj) obj[k.predicate + "|" + std::to_string(k.cs)] = ms_json(ms);
  j["subj"] = std::move(subj);
  j["obj"] = std::move(obj);
  return j;
}

LsbMultiset ms_from_json(const nlohmann::json& j) {
  LsbMultiset ms;
  for (const auto& [k, v] : j.items()) {
    auto value = std::stoul(k);
    if (value >= 65536) throw FormatError("lsb value out of range: " + k);
    ms[static_cast<std::uint16_t>(value)] = v.get<std::uint32_t>();
  }
  return ms;
}

SynopsisNode node_from_json(const nlohmann::json& j) {
  SynopsisNode node;
  node.mn = j.at("mn").get<std::uint64_t>();
  node.mx = j.at("mx").get<std::uint64_t>();
  node.num = j.at("num").get<std::uint64_t>();
  if (j.contains("children")) {
    for (const auto& c : j.at("children")) node.children.push_back(node_from_json(c));
    if (node.children.empty()) throw FormatError("bucket without children");
    return node;
  }
  for (const auto& [k, v] : j.at("subj").items()) node.subj[std::stoull(k)] = ms_from_json(v);
  for (const auto& [k, v] : j.at("obj").items()) node.obj[parse_object_key(k)] = ms_from_json(v);
  return node;
}

}  // namespace

std::vector<std::string> audit(const SynopsisTree& tree) {
  std::vector<std::string> out;
  for (const auto& [prefix, root] : tree.prefixes) audit_node(root, "<" + prefix + ">", out);
  return out;
}

nlohmann::json to_json(const SynopsisTree& tree) {
  nlohmann::json prefixes = nlohmann::json::object();
  for (const auto& [p, node] : tree.prefixes) prefixes[p] = node_to_json(node);
  return {{"dataset_id", tree.dataset_id},
          {"hash_fn_id", tree.hash_fn_id},
          {"leaf_capacity", tree.leaf_capacity},
          {"prefixes", std::move(prefixes)}};
}

SynopsisTree synopsis_from_json(const nlohmann::json& j) {
  try {
    SynopsisTree tree;
    tree.dataset_id = j.at("dataset_id").get<std::string>();
    tree.hash_fn_id = j.at("hash_fn_id").get<std::string>();
    tree.leaf_capacity = j.at("leaf_capacity").get<std::size_t>();
    for (const auto& [p, node] : j.at("prefixes").items()) tree.prefixes.emplace(p, node_from_json(node));
    return tree;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed synopsis document: ") + e.what());
  }
}

}  // namespace odyssey
