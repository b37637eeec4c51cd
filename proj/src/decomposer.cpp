#include "odyssey/decomposer.hpp"

#include <set>

#include "odyssey/errors.hpp"

namespace odyssey {

std::vector<std::string> RemoteSubquery::variables() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& tp : patterns)
    for (const auto& v : tp.variables())
      if (seen.insert(v).second) out.push_back(v);
  return out;
}

std::string RemoteSubquery::sparql() const {
  return "SERVICE <" + endpoint + "> { " + render_select(patterns, variables(), distinct) + " }";
}

namespace {

class Decomposer {
 public:
  Decomposer(const SourceSelection& sel, bool merge, bool distinct) : sel_(sel), merge_(merge), distinct_(distinct) {}

  ExecPtr build(const PlanNode& n) {
    if (n.kind == PlanNode::Kind::Leaf) return leaf(n);
    if (merge_ && n.endpoint) return remote(*n.endpoint, collect(n), n.est_card);
    auto j = std::make_shared<ExecNode>();
    j->kind = ExecNode::Kind::HashJoin;
    j->children = {build(*n.left), build(*n.right)};
    j->join_vars = n.join_vars;
    j->est_card = n.est_card;
    return j;
  }

 private:
  std::vector<TriplePattern> collect(const PlanNode& n) {
    if (n.kind == PlanNode::Kind::Leaf) return n.patterns;
    auto out = collect(*n.left);
    auto r = collect(*n.right);
    out.insert(out.end(), r.begin(), r.end());
    return out;
  }

  ExecPtr remote(const std::string& endpoint, std::vector<TriplePattern> patterns, const Rational& card) {
    auto r = std::make_shared<ExecNode>();
    r->kind = ExecNode::Kind::Remote;
    r->remote = RemoteSubquery{endpoint, std::move(patterns), distinct_};
    r->est_card = card;
    return r;
  }

  ExecPtr leaf(const PlanNode& n) {
    const auto& sources = sel_.stars[n.star].datasets;
    if (sources.size() == 1) return remote(sources.front(), n.patterns, n.est_card);
    auto u = std::make_shared<ExecNode>();
    u->kind = ExecNode::Kind::Union;
    u->est_card = n.est_card;
    for (const auto& [d, c] : n.source_cards) u->children.push_back(remote(d, n.patterns, c));
    return u;
  }

  const SourceSelection& sel_;
  bool merge_;
  bool distinct_;
};

}  // namespace

std::size_t count_remotes(const ExecNode& node) {
  if (node.kind == ExecNode::Kind::Remote) return 1;
  std::size_t n = 0;
  for (const auto& c : node.children) n += count_remotes(*c);
  return n;
}

ExecutablePlan decompose(const Plan& plan, const Query& query, const StarGraph& sg, const SourceSelection& sel,
                         const DecomposeOptions& options) {
  ExecutablePlan out;
  out.distinct = query.distinct;
  out.projection = query.projected_variables();
  out.nss = sel.nss(sg);
  out.empty_result = plan.empty_result;
  if (plan.empty_result || !plan.root) return out;
  out.root = Decomposer(sel, options.merge, query.distinct).build(*plan.root);
  out.nsq = count_remotes(*out.root);
  return out;
}

namespace {

nlohmann::json pattern_json(const TriplePattern& tp) {
  return {{"tp", tp.label}, {"s", to_string(tp.subject)}, {"p", to_string(tp.predicate)}, {"o", to_string(tp.object)}};
}

TriplePattern pattern_from_json(const nlohmann::json& j) {
  return TriplePattern{parse_pattern_term(j.at("s").get<std::string>()),
                       parse_pattern_term(j.at("p").get<std::string>()),
                       parse_pattern_term(j.at("o").get<std::string>()), j.at("tp").get<int>()};
}

nlohmann::json node_json(const ExecNode& n) {
  nlohmann::json j;
  j["est_card"] = to_display(n.est_card);
  j["est_card_exact"] = to_exact_string(n.est_card);
  switch (n.kind) {
    case ExecNode::Kind::Remote: {
      j["type"] = "remote";
      j["endpoint"] = n.remote.endpoint;
      j["distinct"] = n.remote.distinct;
      auto& tps = j["patterns"] = nlohmann::json::array();
      for (const auto& tp : n.remote.patterns) tps.push_back(pattern_json(tp));
      j["sparql"] = n.remote.sparql();
      break;
    }
    case ExecNode::Kind::HashJoin:
      j["type"] = "hash_join";
      j["vars"] = n.join_vars;
      break;
    case ExecNode::Kind::Union:
      j["type"] = "union";
      break;
  }
  if (n.kind != ExecNode::Kind::Remote) {
    auto& ch = j["children"] = nlohmann::json::array();
    for (const auto& c : n.children) ch.push_back(node_json(*c));
  }
  return j;
}

ExecPtr node_from_json(const nlohmann::json& j) {
  auto n = std::make_shared<ExecNode>();
  n->est_card = rational_from_string(j.at("est_card_exact").get<std::string>());
  auto type = j.at("type").get<std::string>();
  if (type == "remote") {
    n->kind = ExecNode::Kind::Remote;
    n->remote.endpoint = j.at("endpoint").get<std::string>();
    n->remote.distinct = j.at("distinct").get<bool>();
    for (const auto& tp : j.at("patterns")) n->remote.patterns.push_back(pattern_from_json(tp));
    return n;
  }
  if (type == "hash_join") {
    n->kind = ExecNode::Kind::HashJoin;
    n->join_vars = j.at("vars").get<std::vector<std::string>>();
  } else if (type == "union") {
    n->kind = ExecNode::Kind::Union;
  } else {
    throw FormatError("unknown plan node type '" + type + "'");
  }
  for (const auto& c : j.at("children")) n->children.push_back(node_from_json(c));
  if (n->kind == ExecNode::Kind::HashJoin && n->children.size() != 2)
    throw FormatError("hash_join needs exactly two children");
  return n;
}

}  // namespace

nlohmann::json to_json(const ExecutablePlan& plan) {
  return {{"empty_result", plan.empty_result},
          {"distinct", plan.distinct},
          {"projection", plan.projection},
          {"nss", plan.nss},
          {"nsq", plan.nsq},
          {"root", plan.root ? node_json(*plan.root) : nlohmann::json(nullptr)}};
}

ExecutablePlan executable_plan_from_json(const nlohmann::json& j) {
  try {
    ExecutablePlan p;
    p.empty_result = j.at("empty_result").get<bool>();
    p.distinct = j.at("distinct").get<bool>();
    p.projection = j.at("projection").get<std::vector<std::string>>();
    p.nss = j.at("nss").get<std::size_t>();
    p.nsq = j.at("nsq").get<std::size_t>();
    if (!j.at("root").is_null()) p.root = node_from_json(j.at("root"));
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed plan: ") + e.what());
  } catch (const SyntaxError& e) {
    throw FormatError(std::string("malformed pattern in plan: ") + e.what());
  }
}

}  // namespace odyssey
