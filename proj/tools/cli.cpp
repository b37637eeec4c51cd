#include "cli.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <functional>
#include <set>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "odyssey/cs_builder.hpp"
#include "odyssey/decomposer.hpp"
#include "odyssey/errors.hpp"
#include "odyssey/estimator.hpp"
#include "odyssey/fed_executor.hpp"
#include "odyssey/fed_linker.hpp"
#include "odyssey/optimizer.hpp"
#include "odyssey/query_model.hpp"
#include "odyssey/synopsis.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace odyssey::cli {

namespace {

constexpr std::size_t kDefaultMaxCs = 10000;
constexpr double kDefaultTimeoutSeconds = 1800;

class IoError : public Error {
 public:
  using Error::Error;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& content) {
  if (p.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
  }
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + p.string());
  out << content;
  if (!out) throw IoError("write failed for " + p.string());
}

json read_json(const fs::path& p) {
  try {
    return json::parse(read_file(p));
  } catch (const json::parse_error& e) {
    throw FormatError(p.string() + ": " + e.what());
  }
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::string dataset_id_for(const fs::path& input, const std::string& given) {
  return given.empty() ? input.stem().string() : given;
}

Dataset load_dataset(const fs::path& p, const std::string& id) {
  if (!fs::exists(p)) throw IoError("input file not found: " + p.string());
  ParseOptions opts;
  opts.dataset_id = id;
  return parse_ntriples_file(p.string(), opts).dataset;
}

// Path stored relative to `base` so generated files do not embed the
// working directory.
std::string relative_to(const fs::path& target, const fs::path& base) {
  auto t = fs::absolute(target).lexically_normal();
  auto b = fs::absolute(base).lexically_normal();
  auto rel = t.lexically_relative(b);
  return rel.empty() ? t.generic_string() : rel.generic_string();
}

fs::path resolve(const fs::path& base_dir, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base_dir / path;
}

struct ConfigEntry {
  std::string dataset_id;
  fs::path data_path, stats_path, synopsis_path;
  double latency_ms = 0;
  double cost_weight = 1;
};

std::string trim(std::string s) {
  auto ws = [](unsigned char c) { return std::isspace(c); };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), ws));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), ws).base(), s.end());
  return s;
}

// Key/value form: one `[dataset_id]` header per dataset followed by
// `key = value` lines; `#` starts a comment.
json parse_key_value_config(const std::string& text) {
  json datasets = json::array();
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      datasets.push_back({{"dataset_id", trim(line.substr(1, line.size() - 2))}});
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos || datasets.empty())
      throw FormatError("config line " + std::to_string(lineno) + ": expected [dataset] or key = value");
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    if (key == "latency_ms" || key == "cost_weight") datasets.back()[key] = std::stod(value);
    else datasets.back()[key] = value;
  }
  return {{"datasets", datasets}};
}

std::vector<ConfigEntry> load_config(const fs::path& path) {
  std::string text = read_file(path);
  auto first = text.find_first_not_of(" \t\r\n");
  json j;
  if (first != std::string::npos && text[first] == '{') {
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw FormatError(path.string() + ": " + e.what());
    }
  } else {
    j = parse_key_value_config(text);
  }
  fs::path dir = path.parent_path();
  std::vector<ConfigEntry> out;
  std::set<std::string> ids;
  try {
    for (const auto& d : j.at("datasets")) {
      ConfigEntry e;
      e.dataset_id = d.at("dataset_id").get<std::string>();
      if (!ids.insert(e.dataset_id).second) throw FormatError("duplicate dataset_id " + e.dataset_id);
      auto optional_path = [&](const char* key) {
        auto v = d.value(key, std::string());
        return v.empty() ? fs::path() : resolve(dir, v);
      };
      e.data_path = optional_path("data_path");
      e.stats_path = resolve(dir, d.at("stats_path").get<std::string>());
      e.synopsis_path = optional_path("synopsis_path");
      e.latency_ms = d.value("latency_ms", 0.0);
      e.cost_weight = d.value("cost_weight", 1.0);
      out.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return out;
}

struct LoadedFederation {
  FederationStatistics stats;
  fs::path dir;
};

LoadedFederation load_federation(const fs::path& path) {
  json j = read_json(path);
  LoadedFederation fed;
  fed.dir = path.parent_path();
  try {
    for (const auto& d : j.at("datasets")) {
      EndpointDescriptor ep;
      auto id = d.at("dataset_id").get<std::string>();
      ep.data_path = resolve(fed.dir, d.at("data_path").get<std::string>()).string();
      ep.stats_path = resolve(fed.dir, d.at("stats_path").get<std::string>()).string();
      ep.synopsis_path = d.at("synopsis_path").get<std::string>();
      if (!ep.synopsis_path.empty()) ep.synopsis_path = resolve(fed.dir, ep.synopsis_path).string();
      ep.latency_ms = d.at("latency_ms").get<double>();
      ep.cost_weight = d.at("cost_weight").get<double>();
      auto stats = statistics_from_json(read_json(ep.stats_path));
      if (stats.dataset_id != id)
        throw FormatError("statistics file " + ep.stats_path + " belongs to dataset " + stats.dataset_id);
      fed.stats.datasets.push_back(std::move(stats));
      fed.stats.endpoints[id] = ep;
    }
    for (const auto& f : j.at("fcps")) fed.stats.fcps.push_back(fcp_from_json(f));
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return fed;
}

EndpointRegistry load_endpoints(const FederationStatistics& fed) {
  EndpointRegistry reg;
  for (const auto& [id, ep] : fed.endpoints) {
    auto data = std::make_shared<Dataset>(load_dataset(ep.data_path, id));
    reg.add(Endpoint{id, std::move(data), std::chrono::milliseconds(static_cast<long long>(ep.latency_ms))});
  }
  return reg;
}

PredicateSet split_predicates(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.size() >= 2 && item.front() == '<' && item.back() == '>') item = item.substr(1, item.size() - 2);
    if (!item.empty()) out.push_back(item);
  }
  return make_predicate_set(std::move(out));
}

std::shared_ptr<spdlog::logger> make_logger(std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  auto logger = std::make_shared<spdlog::logger>("odyssey", sink);
  logger->set_pattern("[%l] %v");
  auto level = spdlog::level::warn;
  if (const char* env = std::getenv("ODYSSEY_LOG")) level = spdlog::level::from_str(env);
  logger->set_level(level);
  return logger;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  auto log = make_logger(err);

  CLI::App app{"Federated SPARQL planning over characteristic-set statistics", "odyssey"};
  app.require_subcommand(1);

  std::string input, output, dataset_id, stats_in;
  std::size_t max_cs = kDefaultMaxCs;
  auto* stats_cmd = app.add_subcommand("stats", "Build characteristic-set statistics from N-Triples");
  stats_cmd->add_option("input", input, "N-Triples file")->required();
  stats_cmd->add_option("output", output, "Statistics JSON")->required();
  stats_cmd->add_option("--max-cs", max_cs, "CS budget")->check(CLI::PositiveNumber);
  stats_cmd->add_option("--dataset-id", dataset_id, "Dataset id (default: file stem)");

  std::size_t leaf_capacity = kDefaultLeafCapacity;
  auto* syn_cmd = app.add_subcommand("synopsis", "Build the entity synopsis of a dataset");
  syn_cmd->add_option("input", input, "N-Triples file")->required();
  syn_cmd->add_option("output", output, "Synopsis JSON")->required();
  syn_cmd->add_option("--leaf-capacity", leaf_capacity, "Entities per leaf")->check(CLI::PositiveNumber);
  syn_cmd->add_option("--stats", stats_in, "Statistics the CS ids refer to (default: rebuilt with --max-cs)");
  syn_cmd->add_option("--max-cs", max_cs, "CS budget when rebuilding statistics")->check(CLI::PositiveNumber);
  syn_cmd->add_option("--dataset-id", dataset_id, "Dataset id (default: file stem)");

  std::string config;
  bool exact = false;
  auto* link_cmd = app.add_subcommand("link", "Compute federated characteristic pairs");
  link_cmd->add_option("config", config, "Federation config (JSON or key/value)")->required();
  link_cmd->add_option("output", output, "Federation statistics JSON")->required();
  link_cmd->add_flag("--exact", exact, "Link from entity descriptions built from the data files");

  std::string query_path, federation, plan_out;
  bool explain = false, no_merge = false;
  auto* opt_cmd = app.add_subcommand("optimize", "Plan a query over a linked federation");
  opt_cmd->add_option("query", query_path, "SPARQL query file")->required();
  opt_cmd->add_option("federation", federation, "Federation statistics JSON")->required();
  opt_cmd->add_option("--out", plan_out, "Plan JSON (default: stdout)");
  opt_cmd->add_flag("--explain", explain, "Print the DP table");
  opt_cmd->add_flag("--no-merge", no_merge, "Keep one remote subquery per star");

  std::string plan_path, metrics_out, results_out;
  double timeout_s = kDefaultTimeoutSeconds;
  auto* exec_cmd = app.add_subcommand("execute", "Execute a plan against the simulated endpoints");
  exec_cmd->add_option("plan", plan_path, "Plan JSON")->required();
  exec_cmd->add_option("federation", federation, "Federation statistics JSON")->required();
  exec_cmd->add_option("--timeout", timeout_s, "Seconds");
  exec_cmd->add_option("--metrics", metrics_out, "Metrics JSON");
  exec_cmd->add_option("--out", results_out, "Results TSV (default: stdout)");

  std::string preds, link_pred, to_dataset, to_preds;
  bool bag = false;
  auto* est_cmd = app.add_subcommand("estimate", "Estimate a star or star-link cardinality");
  est_cmd->add_option("federation", federation, "Federation statistics JSON")->required();
  est_cmd->add_option("--dataset", dataset_id, "Dataset of the (source) star")->required();
  est_cmd->add_option("--predicates", preds, "Comma-separated predicate IRIs")->required();
  est_cmd->add_flag("--bag", bag, "Duplicate-aware estimate instead of distinct");
  est_cmd->add_option("--link", link_pred, "Link predicate to a second star");
  est_cmd->add_option("--to-dataset", to_dataset, "Dataset of the target star");
  est_cmd->add_option("--to-predicates", to_preds, "Predicates of the target star");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*stats_cmd) {
      auto id = dataset_id_for(input, dataset_id);
      auto d = load_dataset(input, id);
      auto stats = build_statistics(d, max_cs);
      log->info("{}: {} triples, {} CSs, {} CPs", id, d.size(), stats.cs_stats.size(), stats.cp_stats.size());
      write_file(output, dump(to_json(stats)));
    } else if (*syn_cmd) {
      auto id = dataset_id_for(input, dataset_id);
      auto d = load_dataset(input, id);
      auto stats = stats_in.empty() ? build_statistics(d, max_cs) : statistics_from_json(read_json(stats_in));
      auto tree = build_tree(build_descriptions(d, stats), leaf_capacity);
      log->info("{}: {} prefixes", id, tree.prefixes.size());
      write_file(output, dump(to_json(tree)));
    } else if (*link_cmd) {
      auto entries = load_config(config);
      std::vector<LinkInput> inputs;
      for (const auto& e : entries) {
        LinkInput in;
        in.stats = statistics_from_json(read_json(e.stats_path));
        if (in.stats.dataset_id != e.dataset_id)
          throw FormatError("statistics file " + e.stats_path.string() + " belongs to dataset " + in.stats.dataset_id);
        if (exact) {
          in.descriptions = build_descriptions(load_dataset(e.data_path, e.dataset_id), in.stats);
        } else {
          if (e.synopsis_path.empty())
            throw IoError("dataset " + e.dataset_id + " has no synopsis_path");
          in.synopsis = synopsis_from_json(read_json(e.synopsis_path));
        }
        inputs.push_back(std::move(in));
      }
      auto fed = link_federation(std::move(inputs));
      fs::path out_dir = fs::path(output).parent_path();
      if (out_dir.empty()) out_dir = ".";
      json datasets = json::array();
      for (const auto& e : entries) {
        datasets.push_back({{"dataset_id", e.dataset_id},
                            {"data_path", e.data_path.empty() ? "" : relative_to(e.data_path, out_dir)},
                            {"stats_path", relative_to(e.stats_path, out_dir)},
                            {"synopsis_path", e.synopsis_path.empty() ? "" : relative_to(e.synopsis_path, out_dir)},
                            {"latency_ms", e.latency_ms},
                            {"cost_weight", e.cost_weight}});
      }
      json fcps = json::array();
      for (const auto& f : fed.fcps) fcps.push_back(to_json(f));
      log->info("{} FCPs", fed.fcps.size());
      write_file(output, dump({{"datasets", datasets}, {"fcps", fcps}, {"exact", exact}}));
    } else if (*opt_cmd) {
      auto fed = load_federation(federation);
      auto query = parse_query(read_file(query_path));
      StarGraph sg;
      try {
        sg = decompose_stars(query);
      } catch (const FallbackRequired& e) {
        err << "fallback required: " << e.what() << "\n";
        return kUnsupported;
      }
      auto sel = select_sources(sg, fed.stats);
      auto plan = plan_joins(sg, sel, fed.stats, query.distinct);
      auto exec = decompose(plan, query, sg, sel, DecomposeOptions{!no_merge});
      json stars = json::array();
      for (std::size_t k = 0; k < sg.stars.size(); ++k) {
        json tps = json::array();
        for (const auto& tp : sg.stars[k].patterns) tps.push_back("tp" + std::to_string(tp.label));
        stars.push_back({{"center", to_string(sg.stars[k].center)}, {"tps", tps}, {"sources", sel.stars[k].datasets}});
      }
      json doc = {{"stars", stars},
                  {"plan", to_json(*plan.root)},
                  {"executable", to_json(exec)},
                  {"empty_result", plan.empty_result}};
      if (explain) out << dump(explain_json(plan));
      if (plan_out.empty()) out << dump(doc);
      else write_file(plan_out, dump(doc));
      if (plan.empty_result) log->info("query is provably empty");
    } else if (*exec_cmd) {
      auto fed = load_federation(federation);
      auto doc = read_json(plan_path);
      auto plan = executable_plan_from_json(doc.contains("executable") ? doc.at("executable") : doc);
      if (plan.root) {
        std::function<void(const ExecNode&)> check = [&](const ExecNode& n) {
          if (n.kind == ExecNode::Kind::Remote && !fed.stats.endpoints.count(n.remote.endpoint))
            throw UnknownEndpoint("endpoint '" + n.remote.endpoint + "' is not in the federation");
          for (const auto& c : n.children) check(*c);
        };
        check(*plan.root);
      }
      auto registry = load_endpoints(fed.stats);
      auto timeout = std::chrono::milliseconds(static_cast<long long>(timeout_s * 1000));
      auto result = execute(plan, registry, timeout);
      if (results_out.empty()) out << result.results.to_tsv();
      else write_file(results_out, result.results.to_tsv());
      if (!metrics_out.empty()) write_file(metrics_out, dump(to_json(result.metrics)));
      if (result.metrics.timed_out) log->warn("execution timed out");
    } else if (*est_cmd) {
      auto fed = load_federation(federation);
      auto idx = fed.stats.index_of(dataset_id);
      if (!idx) throw IoError("unknown dataset " + dataset_id);
      const auto& src = fed.stats.datasets[*idx];
      auto P = split_predicates(preds);
      CardinalityEstimate est;
      if (link_pred.empty()) {
        est = bag ? star_cardinality_bag(P, src) : star_cardinality_distinct(P, src);
      } else {
        auto to = to_dataset.empty() ? dataset_id : to_dataset;
        auto tidx = fed.stats.index_of(to);
        if (!tidx) throw IoError("unknown dataset " + to);
        const auto& dst = fed.stats.datasets[*tidx];
        auto Pl = split_predicates(to_preds);
        if (to == dataset_id) {
          std::span<const CpStatistics> cps(src.cp_stats);
          est = bag ? link_cardinality_bag(P, Pl, link_pred, cps, src, dst)
                    : link_cardinality_distinct(P, Pl, link_pred, cps, src, dst);
        } else {
          std::vector<FcpStatistics> fcps;
          for (const auto& f : fed.stats.fcps)
            if (f.source_dataset == dataset_id && f.target_dataset == to) fcps.push_back(f);
          std::span<const FcpStatistics> view(fcps);
          est = bag ? link_cardinality_bag(P, Pl, link_pred, view, src, dst, Basis::Fcp)
                    : link_cardinality_distinct(P, Pl, link_pred, view, src, dst, Basis::Fcp);
        }
      }
      out << dump({{"value", to_display(est.value)},
                   {"value_exact", to_exact_string(est.value)},
                   {"exact", est.exact},
                   {"basis", to_string(est.basis)},
                   {"contributing", est.contributing}});
    }
  } catch (const HashMismatch& e) {
    err << "error: HashMismatch: " << e.what() << "\n";
    return kIncompatible;
  } catch (const UnsupportedFeature& e) {
    err << "error: " << e.what() << "\n";
    return kUnsupported;
  } catch (const FallbackRequired& e) {
    err << "fallback required: " << e.what() << "\n";
    return kUnsupported;
  } catch (const UnknownEndpoint& e) {
    err << "error: " << e.what() << "\n";
    return kExecution;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return *exec_cmd ? kExecution : kUsage;
  }
  return kOk;
}

}  // namespace odyssey::cli
