#include "odyssey/fed_linker.hpp"

#include <algorithm>
#include <future>
#include <set>
#include <stdexcept>
#include <tuple>

#include "odyssey/errors.hpp"

namespace odyssey {

std::optional<std::size_t> FederationStatistics::index_of(const std::string& dataset_id) const {
  for (std::size_t i = 0; i < datasets.size(); ++i)
    if (datasets[i].dataset_id == dataset_id) return i;
  return std::nullopt;
}

namespace {

using FcpKey = std::tuple<std::size_t, std::size_t, std::string>;

std::vector<FcpStatistics> collect(const std::map<FcpKey, std::uint64_t>& counts, const std::string& src,
                                   const std::string& dst, bool exact) {
  std::vector<FcpStatistics> out;
  out.reserve(counts.size());
  for (const auto& [key, n] : counts)
    out.push_back({src, dst, std::get<0>(key), std::get<1>(key), std::get<2>(key), n, exact});
  return out;
}

}  // namespace

std::vector<FcpStatistics> compute_fcps_exact(const EntityDescriptions& d1, const EntityDescriptions& d2) {
  std::map<FcpKey, std::uint64_t> counts;
  for (const auto& [key, objects] : d1.local_objects) {
    for (const auto& [target_cs, subjects] : d2.local_subjects) {
      // Fresh intersection per target CS; each shared IRI adds its link triples.
      std::uint64_t common = 0;
      auto a = objects.begin();
      auto b = subjects.begin();
      while (a != objects.end() && b != subjects.end()) {
        if (a->first < *b) ++a;
        else if (*b < a->first) ++b;
        else { common += a->second; ++a; ++b; }
      }
      if (common > 0) counts[{key.cs, target_cs, key.predicate}] += common;
    }
  }
  return collect(counts, d1.dataset_id, d2.dataset_id, true);
}

namespace {

void link_leaves(const SynopsisNode& obj_leaf, const SynopsisNode& subj_leaf, std::map<FcpKey, std::uint64_t>& counts) {
  for (const auto& [key, objs] : obj_leaf.obj) {
    for (const auto& [target_cs, subjs] : subj_leaf.subj) {
      std::uint64_t shared = 0;
      auto a = objs.begin();
      auto b = subjs.begin();
      while (a != objs.end() && b != subjs.end()) {
        if (a->first < b->first) ++a;
        else if (b->first < a->first) ++b;
        else { shared += std::min(a->second, b->second); ++a; ++b; }
      }
      if (shared > 0) counts[{key.cs, target_cs, key.predicate}] += shared;
    }
  }
}

void link_nodes(const SynopsisNode& n1, const SynopsisNode& n2, std::map<FcpKey, std::uint64_t>& counts) {
  if (!n1.overlaps(n2)) return;
  if (n1.is_leaf() && n2.is_leaf()) {
    link_leaves(n1, n2, counts);
    return;
  }
  // Descend the side that is still a bucket (the wider one when both are).
  bool descend_first = !n1.is_leaf() && (n2.is_leaf() || n1.mx - n1.mn >= n2.mx - n2.mn);
  if (descend_first) {
    for (const auto& c : n1.children) link_nodes(c, n2, counts);
  } else {
    for (const auto& c : n2.children) link_nodes(n1, c, counts);
  }
}

}  // namespace

std::vector<FcpStatistics> compute_fcps_synopsis(const SynopsisTree& t1, const SynopsisTree& t2) {
  if (t1.hash_fn_id != t2.hash_fn_id)
    throw HashMismatch("synopses use different hash functions: " + t1.hash_fn_id + " vs " + t2.hash_fn_id);
  std::map<FcpKey, std::uint64_t> counts;
  auto a = t1.prefixes.begin();
  auto b = t2.prefixes.begin();
  while (a != t1.prefixes.end() && b != t2.prefixes.end()) {
    if (a->first < b->first) ++a;
    else if (b->first < a->first) ++b;
    else { link_nodes(a->second, b->second, counts); ++a; ++b; }
  }
  return collect(counts, t1.dataset_id, t2.dataset_id, false);
}

FederationStatistics link_federation(std::vector<LinkInput> inputs) {
  if (inputs.empty()) throw std::invalid_argument("federation needs at least one dataset");
  std::set<std::string> ids;
  for (const auto& in : inputs)
    if (!ids.insert(in.stats.dataset_id).second) throw std::invalid_argument("duplicate dataset id " + in.stats.dataset_id);

  std::vector<std::future<std::vector<FcpStatistics>>> jobs;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::size_t j = 0; j < inputs.size(); ++j) {
      if (i == j) continue;
      const auto& src = inputs[i];
      const auto& dst = inputs[j];
      if (src.descriptions && dst.descriptions) {
        jobs.push_back(std::async(std::launch::deferred,
                                  [&src, &dst] { return compute_fcps_exact(*src.descriptions, *dst.descriptions); }));
      } else if (src.synopsis && dst.synopsis) {
        // Hash compatibility is checked eagerly so the error surfaces here.
        if (src.synopsis->hash_fn_id != dst.synopsis->hash_fn_id)
          throw HashMismatch("synopses of " + src.stats.dataset_id + " and " + dst.stats.dataset_id +
                             " use different hash functions");
        jobs.push_back(std::async(std::launch::async,
                                  [&src, &dst] { return compute_fcps_synopsis(*src.synopsis, *dst.synopsis); }));
      } else {
        throw std::invalid_argument("dataset " + src.stats.dataset_id + " or " + dst.stats.dataset_id +
                                    " has neither descriptions nor a synopsis");
      }
    }
  }

  FederationStatistics fed;
  for (auto& job : jobs) {
    auto part = job.get();
    fed.fcps.insert(fed.fcps.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  for (auto& in : inputs) {
    fed.endpoints[in.stats.dataset_id] = in.endpoint;
    fed.datasets.push_back(std::move(in.stats));
  }
  return fed;
}

nlohmann::json to_json(const FcpStatistics& f) {
  return {{"src_ds", f.source_dataset}, {"dst_ds", f.target_dataset}, {"src_cs", f.source_cs},
          {"dst_cs", f.target_cs},      {"pred", f.predicate},         {"count", f.count},
          {"exact", f.exact}};
}

FcpStatistics fcp_from_json(const nlohmann::json& j) {
  try {
    return {j.at("src_ds").get<std::string>(), j.at("dst_ds").get<std::string>(), j.at("src_cs").get<std::size_t>(),
            j.at("dst_cs").get<std::size_t>(), j.at("pred").get<std::string>(),   j.at("count").get<std::uint64_t>(),
            j.at("exact").get<bool>()};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed FCP entry: ") + e.what());
  }
}

}  // namespace odyssey
