#pragma once

#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "odyssey/optimizer.hpp"
#include "odyssey/query_model.hpp"

namespace odyssey {

struct RemoteSubquery {
  std::string endpoint;
  std::vector<TriplePattern> patterns;  // evaluation order
  bool distinct = false;

  std::vector<std::string> variables() const;  // first-appearance order
  std::string sparql() const;                  // SERVICE-style rendering
};

struct ExecNode {
  enum class Kind { Remote, HashJoin, Union };
  Kind kind = Kind::Remote;
  RemoteSubquery remote;                          // Remote
  std::vector<std::shared_ptr<const ExecNode>> children;  // HashJoin: exactly 2
  std::vector<std::string> join_vars;             // HashJoin
  Rational est_card = 0;
};

using ExecPtr = std::shared_ptr<const ExecNode>;

struct ExecutablePlan {
  ExecPtr root;  // null when the query is provably empty
  bool empty_result = false;
  bool distinct = false;
  std::vector<std::string> projection;  // resolved variable list
  std::size_t nss = 0;
  std::size_t nsq = 0;
};

struct DecomposeOptions {
  // Collapse connected single-endpoint subtrees into one remote subquery.
  bool merge = true;
};

ExecutablePlan decompose(const Plan& plan, const Query& query, const StarGraph& sg, const SourceSelection& sel,
                         const DecomposeOptions& options = {});

std::size_t count_remotes(const ExecNode& node);

nlohmann::json to_json(const ExecutablePlan& plan);
ExecutablePlan executable_plan_from_json(const nlohmann::json& j);

}  // namespace odyssey
