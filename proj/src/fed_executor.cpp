#include "odyssey/fed_executor.hpp"

#include <algorithm>
#include <future>
#include <sstream>
#include <thread>

#include "odyssey/errors.hpp"

namespace odyssey {

std::vector<Binding> Endpoint::answer(const RemoteSubquery& q) const {
  if (latency.count() > 0) std::this_thread::sleep_for(latency);
  return evaluate_bgp(*dataset, q.patterns, q.distinct);
}

void EndpointRegistry::add(Endpoint e) {
  auto id = e.dataset_id;
  if (!endpoints_.emplace(id, std::move(e)).second) throw std::invalid_argument("duplicate endpoint " + id);
}

const Endpoint& EndpointRegistry::at(const std::string& id) const {
  auto it = endpoints_.find(id);
  if (it == endpoints_.end()) throw UnknownEndpoint("endpoint '" + id + "' is not registered");
  return it->second;
}

std::vector<std::string> ResultSet::sorted_lines() const {
  std::vector<std::string> lines;
  lines.reserve(rows.size());
  for (const auto& row : rows) {
    std::string line;
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) line += '\t';
      line += row[i].str();
    }
    lines.push_back(std::move(line));
  }
  std::sort(lines.begin(), lines.end());
  return lines;
}

std::string ResultSet::to_tsv() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < variables.size(); ++i) os << (i ? "\t?" : "?") << variables[i];
  os << '\n';
  for (const auto& line : sorted_lines()) os << line << '\n';
  return os.str();
}

nlohmann::json to_json(const ExecutionMetrics& m) {
  return {{"ntt", m.ntt},
          {"nsq", m.nsq},
          {"nss", m.nss},
          {"elapsed_ms", m.elapsed.count()},
          {"result_count", m.result_count},
          {"timed_out", m.timed_out}};
}

ResultSet project(const std::vector<Binding>& rows, const std::vector<std::string>& vars, bool distinct) {
  ResultSet rs;
  rs.variables = vars;
  rs.rows.reserve(rows.size());
  for (const auto& b : rows) {
    std::vector<Term> row;
    row.reserve(vars.size());
    for (const auto& v : vars) {
      auto it = b.find(v);
      row.push_back(it == b.end() ? Term() : it->second);
    }
    rs.rows.push_back(std::move(row));
  }
  if (distinct) {
    std::sort(rs.rows.begin(), rs.rows.end());
    rs.rows.erase(std::unique(rs.rows.begin(), rs.rows.end()), rs.rows.end());
  }
  return rs;
}

namespace {

struct TimedOut {};

using Clock = std::chrono::steady_clock;

bool compatible(const Binding& a, const Binding& b) {
  for (const auto& [k, v] : a) {
    auto it = b.find(k);
    if (it != b.end() && !(it->second == v)) return false;
  }
  return true;
}

Binding merged(Binding a, const Binding& b) {
  for (const auto& [k, v] : b) a.emplace(k, v);
  return a;
}

class Runner {
 public:
  Runner(const EndpointRegistry& endpoints, std::optional<Clock::time_point> deadline)
      : endpoints_(endpoints), deadline_(deadline) {}

  void launch(const ExecNode& n) {
    if (n.kind == ExecNode::Kind::Remote) {
      const Endpoint& ep = endpoints_.at(n.remote.endpoint);
      futures_.emplace(&n, std::async(std::launch::async, [&ep, &n] { return ep.answer(n.remote); }));
      return;
    }
    for (const auto& c : n.children) launch(*c);
  }

  std::vector<Binding> eval(const ExecNode& n) {
    check();
    switch (n.kind) {
      case ExecNode::Kind::Remote: {
        auto& f = futures_.at(&n);
        if (deadline_ && f.wait_until(*deadline_) != std::future_status::ready) throw TimedOut{};
        auto rows = f.get();
        ntt_ += rows.size();
        return rows;
      }
      case ExecNode::Kind::Union: {
        std::vector<Binding> out;
        for (const auto& c : n.children) {
          auto part = eval(*c);
          out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
        }
        return out;
      }
      case ExecNode::Kind::HashJoin:
        return hash_join(n);
    }
    return {};
  }

  std::uint64_t ntt() const { return ntt_; }

  // Remaining remote requests must finish before the futures are destroyed.
  void drain() {
    for (auto& [node, f] : futures_)
      if (f.valid()) f.wait();
  }

 private:
  void check() const {
    if (deadline_ && Clock::now() >= *deadline_) throw TimedOut{};
  }

  std::vector<Binding> hash_join(const ExecNode& n) {
    auto lhs = eval(*n.children[0]);
    auto rhs = eval(*n.children[1]);
    // Build on the side with the smaller estimate.
    bool build_left = n.children[0]->est_card <= n.children[1]->est_card;
    auto& build = build_left ? lhs : rhs;
    auto& probe = build_left ? rhs : lhs;

    auto key_of = [&](const Binding& b) {
      std::vector<Term> key;
      key.reserve(n.join_vars.size());
      for (const auto& v : n.join_vars) {
        auto it = b.find(v);
        key.push_back(it == b.end() ? Term() : it->second);
      }
      return key;
    };
    std::map<std::vector<Term>, std::vector<std::size_t>> table;
    for (std::size_t i = 0; i < build.size(); ++i) table[key_of(build[i])].push_back(i);

    std::vector<Binding> out;
    std::size_t steps = 0;
    for (const auto& p : probe) {
      auto it = table.find(key_of(p));
      if (it == table.end()) continue;
      for (auto i : it->second) {
        if (++steps % 4096 == 0) check();
        // Preserve left-then-right variable precedence regardless of build side.
        const Binding& l = build_left ? build[i] : p;
        const Binding& r = build_left ? p : build[i];
        if (compatible(l, r)) out.push_back(merged(l, r));
      }
    }
    return out;
  }

  const EndpointRegistry& endpoints_;
  std::optional<Clock::time_point> deadline_;
  std::map<const ExecNode*, std::future<std::vector<Binding>>> futures_;
  std::uint64_t ntt_ = 0;
};

void validate(const ExecNode& n, const EndpointRegistry& endpoints) {
  if (n.kind == ExecNode::Kind::Remote) endpoints.at(n.remote.endpoint);
  for (const auto& c : n.children) validate(*c, endpoints);
}

}  // namespace

ExecutionResult execute(const ExecutablePlan& plan, const EndpointRegistry& endpoints,
                        std::optional<std::chrono::milliseconds> timeout) {
  auto start = Clock::now();
  ExecutionResult out;
  out.results.variables = plan.projection;
  out.metrics.nsq = plan.nsq;
  out.metrics.nss = plan.nss;
  if (plan.root) validate(*plan.root, endpoints);

  std::optional<Clock::time_point> deadline;
  if (timeout) deadline = start + *timeout;
  if (timeout && timeout->count() <= 0) {
    out.metrics.timed_out = true;
    return out;
  }
  if (!plan.root || plan.empty_result) return out;

  Runner runner(endpoints, deadline);
  try {
    runner.launch(*plan.root);
    auto rows = runner.eval(*plan.root);
    out.results = project(rows, plan.projection, plan.distinct);
  } catch (const TimedOut&) {
    out.metrics.timed_out = true;
    out.results.rows.clear();
  } catch (...) {
    runner.drain();
    throw;
  }
  runner.drain();
  out.metrics.ntt = runner.ntt();
  out.metrics.result_count = out.results.rows.size();
  out.metrics.elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start);
  return out;
}

ResultSet federated_oracle(const Query& q, const EndpointRegistry& endpoints) {
  std::vector<Binding> current{Binding{}};
  for (const auto& tp : q.patterns) {
    std::vector<Binding> matches;
    for (const auto& [id, ep] : endpoints.all()) {
      auto part = evaluate_bgp(*ep.dataset, std::span<const TriplePattern>(&tp, 1), false);
      matches.insert(matches.end(), part.begin(), part.end());
    }
    std::vector<Binding> next;
    for (const auto& a : current)
      for (const auto& b : matches)
        if (compatible(a, b)) next.push_back(merged(a, b));
    current = std::move(next);
  }
  return project(current, q.projected_variables(), q.distinct);
}

}  // namespace odyssey
