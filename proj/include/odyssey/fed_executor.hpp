#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "odyssey/decomposer.hpp"
#include "odyssey/query_model.hpp"
#include "odyssey/rdf_model.hpp"

namespace odyssey {

// In-process stand-in for a SPARQL endpoint.
struct Endpoint {
  std::string dataset_id;
  std::shared_ptr<const Dataset> dataset;
  std::chrono::milliseconds latency{0};

  std::vector<Binding> answer(const RemoteSubquery& q) const;
};

class EndpointRegistry {
 public:
  void add(Endpoint e);
  const Endpoint& at(const std::string& id) const;  // throws UnknownEndpoint
  bool contains(const std::string& id) const { return endpoints_.count(id) != 0; }
  const std::map<std::string, Endpoint>& all() const { return endpoints_; }

 private:
  std::map<std::string, Endpoint> endpoints_;
};

struct ResultSet {
  std::vector<std::string> variables;
  std::vector<std::vector<Term>> rows;  // bag, or set under DISTINCT

  // Header of ?vars, then one tab-separated N-Triples row per solution,
  // rows sorted bytewise.
  std::string to_tsv() const;
  std::vector<std::string> sorted_lines() const;
};

struct ExecutionMetrics {
  std::uint64_t ntt = 0;
  std::size_t nsq = 0;
  std::size_t nss = 0;
  std::chrono::milliseconds elapsed{0};
  std::size_t result_count = 0;
  bool timed_out = false;
};

nlohmann::json to_json(const ExecutionMetrics& m);

struct ExecutionResult {
  ResultSet results;
  ExecutionMetrics metrics;
};

// Remote nodes run concurrently; joins and unions happen locally. A timeout
// of zero or less expires immediately; nullopt means no limit. On timeout
// the results are discarded and metrics.timed_out is set.
ExecutionResult execute(const ExecutablePlan& plan, const EndpointRegistry& endpoints,
                        std::optional<std::chrono::milliseconds> timeout = std::nullopt);

// Reference answer: every pattern is matched against every endpoint, the
// matches are bag-unioned, and the patterns are joined by nested loops.
ResultSet federated_oracle(const Query& q, const EndpointRegistry& endpoints);

// Projects bindings onto `vars`, removing duplicates when `distinct`.
ResultSet project(const std::vector<Binding>& rows, const std::vector<std::string>& vars, bool distinct);

}  // namespace odyssey
