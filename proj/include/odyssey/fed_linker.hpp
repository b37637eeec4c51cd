#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "odyssey/cs_builder.hpp"
#include "odyssey/synopsis.hpp"

namespace odyssey {

// Cross-dataset link statistic: entities of source_cs in source_dataset link
// via `predicate` to subjects of target_cs in target_dataset.
struct FcpStatistics {
  std::string source_dataset;
  std::string target_dataset;
  std::size_t source_cs = 0;
  std::size_t target_cs = 0;
  std::string predicate;
  std::uint64_t count = 0;
  bool exact = false;

  friend bool operator==(const FcpStatistics&, const FcpStatistics&) = default;
};

struct EndpointDescriptor {
  std::string data_path;
  std::string stats_path;
  std::string synopsis_path;
  double latency_ms = 0;
  double cost_weight = 1;
};

struct FederationStatistics {
  std::vector<DatasetStatistics> datasets;
  std::vector<FcpStatistics> fcps;
  std::map<std::string, EndpointDescriptor> endpoints;

  std::optional<std::size_t> index_of(const std::string& dataset_id) const;
};

// Intersect local_objects of d1 with local_subjects of d2.
// Output is sorted by (source_cs, target_cs, predicate).
std::vector<FcpStatistics> compute_fcps_exact(const EntityDescriptions& d1, const EntityDescriptions& d2);

// Same pairing over synopsis trees, visiting only leaf pairs with a common
// prefix and overlapping ranges. A superset of the exact FCPs; counts may
// be inflated by lsb collisions. Throws HashMismatch.
std::vector<FcpStatistics> compute_fcps_synopsis(const SynopsisTree& t1, const SynopsisTree& t2);

struct LinkInput {
  DatasetStatistics stats;
  std::optional<SynopsisTree> synopsis;
  std::optional<EntityDescriptions> descriptions;
  EndpointDescriptor endpoint;
};

// FCPs for every ordered pair of distinct datasets: exact when both sides
// carry descriptions, otherwise from the synopses.
FederationStatistics link_federation(std::vector<LinkInput> inputs);

nlohmann::json to_json(const FcpStatistics& f);
FcpStatistics fcp_from_json(const nlohmann::json& j);

}  // namespace odyssey
