#include "odyssey/optimizer.hpp"

#include <algorithm>
#include <bit>
#include <numeric>

#include "odyssey/errors.hpp"

namespace odyssey {

namespace {

constexpr std::size_t kMaxStars = 20;

const DatasetStatistics& stats_of(const FederationStatistics& fed, const std::string& id) {
  auto idx = fed.index_of(id);
  if (!idx) throw UnknownEndpoint("no statistics for dataset " + id);
  return fed.datasets[*idx];
}

double weight_of(const FederationStatistics& fed, const std::string& id) {
  auto it = fed.endpoints.find(id);
  return it == fed.endpoints.end() ? 1.0 : it->second.cost_weight;
}

// Exact rational from a config weight; weights are short decimals.
Rational weight_rational(double w) {
  if (w == 1.0) return 1;
  return Rational(static_cast<long long>(w * 1000000 + (w >= 0 ? 0.5 : -0.5)), 1000000);
}

std::vector<LinkEntry> link_entries(const StarGraph& sg, const StarLink& link, const FederationStatistics& fed,
                                    const std::string& dk, const std::string& dl) {
  const auto& Pk = sg.stars[link.from].P;
  const auto& Pl = sg.stars[link.to].P;
  const auto& src = stats_of(fed, dk);
  const auto& dst = stats_of(fed, dl);
  std::vector<LinkEntry> out;
  if (dk == dl) {
    for (std::size_t i = 0; i < src.cp_stats.size(); ++i) {
      const auto& cp = src.cp_stats[i];
      if (cp.predicate == link.predicate && src.cs_stats[cp.source_cs].cs.contains_all(Pk) &&
          src.cs_stats[cp.target_cs].cs.contains_all(Pl))
        out.push_back({LinkEntry::Kind::Cp, dk, i});
    }
  } else {
    for (std::size_t i = 0; i < fed.fcps.size(); ++i) {
      const auto& f = fed.fcps[i];
      if (f.source_dataset == dk && f.target_dataset == dl && f.predicate == link.predicate &&
          f.source_cs < src.cs_stats.size() && f.target_cs < dst.cs_stats.size() &&
          src.cs_stats[f.source_cs].cs.contains_all(Pk) && dst.cs_stats[f.target_cs].cs.contains_all(Pl))
        out.push_back({LinkEntry::Kind::Fcp, {}, i});
    }
  }
  return out;
}

}  // namespace

std::size_t SourceSelection::nss(const StarGraph& sg) const {
  std::size_t n = 0;
  for (std::size_t k = 0; k < stars.size(); ++k) n += stars[k].datasets.size() * sg.stars[k].patterns.size();
  return n;
}

SourceSelection select_sources(const StarGraph& sg, const FederationStatistics& fed) {
  SourceSelection sel;
  sel.stars.resize(sg.stars.size());
  for (std::size_t k = 0; k < sg.stars.size(); ++k) {
    for (const auto& ds : fed.datasets) {
      std::vector<std::size_t> ids;
      for (std::size_t i = 0; i < ds.cs_stats.size(); ++i)
        if (ds.cs_stats[i].cs.contains_all(sg.stars[k].P)) ids.push_back(i);
      if (ids.empty()) continue;
      sel.stars[k].datasets.push_back(ds.dataset_id);
      sel.stars[k].relevant_cs[ds.dataset_id] = std::move(ids);
    }
  }

  sel.links.resize(sg.links.size());
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < sg.links.size(); ++i) {
      const auto& link = sg.links[i];
      LinkSupport support;
      for (const auto& dk : sel.stars[link.from].datasets) {
        for (const auto& dl : sel.stars[link.to].datasets) {
          auto entries = link_entries(sg, link, fed, dk, dl);
          if (entries.empty()) continue;
          support.pairs.emplace(dk, dl);
          support.entries.insert(support.entries.end(), entries.begin(), entries.end());
        }
      }
      sel.links[i] = std::move(support);
    }
    // Drop datasets with no supported pair on some incident link.
    for (std::size_t i = 0; i < sg.links.size(); ++i) {
      const auto& link = sg.links[i];
      const auto& pairs = sel.links[i].pairs;
      auto prune = [&](std::size_t star, bool source_side) {
        auto& ds = sel.stars[star].datasets;
        auto keep = [&](const std::string& d) {
          return std::any_of(pairs.begin(), pairs.end(),
                             [&](const auto& pr) { return (source_side ? pr.first : pr.second) == d; });
        };
        auto it = std::stable_partition(ds.begin(), ds.end(), keep);
        if (it == ds.end()) return;
        for (auto j = it; j != ds.end(); ++j) sel.stars[star].relevant_cs.erase(*j);
        ds.erase(it, ds.end());
        changed = true;
      };
      prune(link.from, true);
      prune(link.to, false);
    }
  }
  sel.empty_result = std::any_of(sel.stars.begin(), sel.stars.end(), [](const auto& s) { return s.datasets.empty(); });
  return sel;
}

std::vector<TriplePattern> order_star(const StarSubquery& star, const FederationStatistics& fed,
                                      const std::vector<std::string>& datasets) {
  auto card = [&](const std::vector<TriplePattern>& tps) {
    std::vector<std::string> preds;
    for (const auto& tp : tps) preds.push_back(std::get<Term>(tp.predicate).value());
    auto P = make_predicate_set(std::move(preds));
    Rational total = 0;
    for (const auto& d : datasets) total += star_cardinality_distinct(P, stats_of(fed, d)).value;
    return total;
  };

  std::vector<TriplePattern> current = star.patterns;
  std::sort(current.begin(), current.end(), [](const auto& a, const auto& b) { return a.label < b.label; });
  std::vector<TriplePattern> tail;
  while (current.size() > 1) {
    std::size_t best = 0;
    Rational best_card;
    for (std::size_t i = 0; i < current.size(); ++i) {
      auto rest = current;
      rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(i));
      Rational c = card(rest);
      // Strict comparison keeps the smallest excluded label on ties.
      if (i == 0 || c < best_card) {
        best = i;
        best_card = c;
      }
    }
    tail.push_back(current[best]);
    current.erase(current.begin() + static_cast<std::ptrdiff_t>(best));
  }
  std::vector<TriplePattern> out = current;
  out.insert(out.end(), tail.rbegin(), tail.rend());
  return out;
}

std::vector<std::size_t> PlanNode::star_sequence() const {
  if (kind == Kind::Leaf) return {star};
  auto out = left->star_sequence();
  auto r = right->star_sequence();
  out.insert(out.end(), r.begin(), r.end());
  return out;
}

Rational plan_cost(const PlanNode& node) {
  if (node.kind == PlanNode::Kind::Join && node.endpoint) return node.est_card * weight_rational(node.endpoint_weight);
  if (node.kind == PlanNode::Kind::Leaf) {
    if (node.source_cards.empty()) return node.est_card;
    Rational total = 0;
    for (const auto& [d, c] : node.source_cards) {
      auto it = node.source_weights.find(d);
      total += c * weight_rational(it == node.source_weights.end() ? 1.0 : it->second);
    }
    return total;
  }
  return node.est_card + plan_cost(*node.left) + plan_cost(*node.right);
}

CardinalityModel::CardinalityModel(const StarGraph& sg, const SourceSelection& sel, const FederationStatistics& fed,
                                   bool distinct)
    : sg_(sg) {
  star_card_.resize(sg.stars.size());
  source_cards_.resize(sg.stars.size());
  for (std::size_t k = 0; k < sg.stars.size(); ++k) {
    for (const auto& d : sel.stars[k].datasets) {
      const auto& st = stats_of(fed, d);
      Rational c = distinct ? star_cardinality_distinct(sg.stars[k].P, st).value
                            : star_cardinality_bag(sg.stars[k].P, st).value;
      source_cards_[k].emplace_back(d, c);
      star_card_[k] += c;
    }
  }
  link_card_.resize(sg.links.size());
  for (std::size_t i = 0; i < sg.links.size(); ++i) {
    const auto& link = sg.links[i];
    const auto& Pk = sg.stars[link.from].P;
    const auto& Pl = sg.stars[link.to].P;
    for (const auto& [dk, dl] : sel.links[i].pairs) {
      const auto& src = stats_of(fed, dk);
      const auto& dst = stats_of(fed, dl);
      if (dk == dl) {
        std::vector<CpStatistics> cps;
        for (const auto& e : sel.links[i].entries)
          if (e.kind == LinkEntry::Kind::Cp && e.dataset == dk) cps.push_back(src.cp_stats[e.index]);
        std::span<const CpStatistics> view(cps);
        link_card_[i] += distinct ? link_cardinality_distinct(Pk, Pl, link.predicate, view, src, dst).value
                                  : link_cardinality_bag(Pk, Pl, link.predicate, view, src, dst).value;
      } else {
        std::vector<FcpStatistics> fcps;
        for (const auto& e : sel.links[i].entries)
          if (e.kind == LinkEntry::Kind::Fcp && fed.fcps[e.index].source_dataset == dk &&
              fed.fcps[e.index].target_dataset == dl)
            fcps.push_back(fed.fcps[e.index]);
        std::span<const FcpStatistics> view(fcps);
        link_card_[i] += distinct
                             ? link_cardinality_distinct(Pk, Pl, link.predicate, view, src, dst, Basis::Fcp).value
                             : link_cardinality_bag(Pk, Pl, link.predicate, view, src, dst, Basis::Fcp).value;
      }
    }
  }
}

Rational CardinalityModel::subset_card(std::uint64_t subset) const {
  std::vector<std::size_t> members;
  for (std::size_t k = 0; k < sg_.stars.size(); ++k)
    if (subset >> k & 1) members.push_back(k);
  Rational card = 1;
  for (auto k : members) {
    if (star_card_[k] == 0) return 0;
    card *= star_card_[k];
  }
  for (std::size_t x = 0; x < members.size(); ++x) {
    for (std::size_t y = x + 1; y < members.size(); ++y) {
      std::size_t a = members[x], b = members[y];
      bool linked = false;
      for (std::size_t i = 0; i < sg_.links.size(); ++i) {
        const auto& l = sg_.links[i];
        if (!((l.from == a && l.to == b) || (l.from == b && l.to == a))) continue;
        linked = true;
        card *= link_card_[i] / (star_card_[a] * star_card_[b]);
      }
      if (!linked && !sg_.shared_variables(a, b).empty())
        card /= std::max(star_card_[a], star_card_[b]);
    }
  }
  return card;
}

namespace {

std::set<std::string> vars_of(const StarGraph& sg, std::uint64_t subset) {
  std::set<std::string> out;
  for (std::size_t k = 0; k < sg.stars.size(); ++k)
    if (subset >> k & 1) {
      auto v = sg.stars[k].variables();
      out.insert(v.begin(), v.end());
    }
  return out;
}

bool better(const PlanNode& a, const PlanNode& b) {
  if (a.cost != b.cost) return a.cost < b.cost;
  if (a.remote_requests != b.remote_requests) return a.remote_requests < b.remote_requests;
  return a.star_sequence() < b.star_sequence();
}

class Planner {
 public:
  Planner(const StarGraph& sg, const SourceSelection& sel, const FederationStatistics& fed, bool distinct)
      : sg_(sg), sel_(sel), fed_(fed), model_(sg, sel, fed, distinct), n_(sg.stars.size()) {
    adj_.assign(n_, 0);
    for (std::size_t a = 0; a < n_; ++a)
      for (std::size_t b = 0; b < n_; ++b)
        if (a != b && sg.adjacent(a, b)) adj_[a] |= std::uint64_t{1} << b;
  }

  Plan run() {
    Plan plan;
    plan.empty_result = sel_.empty_result;
    best_.assign(std::size_t{1} << n_, nullptr);
    for (std::size_t k = 0; k < n_; ++k) best_[std::size_t{1} << k] = make_leaf(k);

    std::vector<std::uint64_t> components;
    std::uint64_t seen = 0;
    for (std::size_t k = 0; k < n_; ++k) {
      if (seen >> k & 1) continue;
      std::uint64_t comp = reach(std::uint64_t{1} << k, full());
      components.push_back(comp);
      seen |= comp;
    }

    // Subsets in increasing size so both halves are ready.
    std::vector<std::uint64_t> order;
    for (auto comp : components)
      for (std::uint64_t s = comp; s; s = (s - 1) & comp)
        if (std::popcount(s) > 1 && connected(s)) order.push_back(s);
    std::sort(order.begin(), order.end(), [](auto a, auto b) {
      int pa = std::popcount(a), pb = std::popcount(b);
      return pa != pb ? pa < pb : a < b;
    });
    for (auto s : order) solve(s);

    for (std::uint64_t s = 1; s < best_.size(); ++s) {
      if (!best_[s]) continue;
      DpEntry e;
      e.subset = s;
      e.stars = best_[s]->star_sequence();
      std::sort(e.stars.begin(), e.stars.end());
      e.est_card = best_[s]->est_card;
      e.cost = best_[s]->cost;
      e.remote_requests = best_[s]->remote_requests;
      plan.table.push_back(std::move(e));
    }

    std::vector<PlanPtr> parts;
    for (auto comp : components) parts.push_back(best_[comp]);
    std::stable_sort(parts.begin(), parts.end(), [](const PlanPtr& a, const PlanPtr& b) {
      if (a->est_card != b->est_card) return a->est_card < b->est_card;
      return a->star_sequence() < b->star_sequence();
    });
    PlanPtr acc = parts.front();
    for (std::size_t i = 1; i < parts.size(); ++i) {
      auto j = std::make_shared<PlanNode>();
      j->kind = PlanNode::Kind::Join;
      j->left = acc;
      j->right = parts[i];
      j->cartesian = true;
      j->est_card = acc->est_card * parts[i]->est_card;
      j->remote_requests = acc->remote_requests + parts[i]->remote_requests;
      j->cost = plan_cost(*j);
      acc = j;
    }
    plan.root = acc;
    return plan;
  }

 private:
  std::uint64_t full() const { return n_ == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << n_) - 1; }

  std::uint64_t reach(std::uint64_t start, std::uint64_t within) const {
    std::uint64_t seen = start, frontier = start;
    while (frontier) {
      std::uint64_t next = 0;
      for (std::size_t k = 0; k < n_; ++k)
        if (frontier >> k & 1) next |= adj_[k];
      next &= within & ~seen;
      seen |= next;
      frontier = next;
    }
    return seen;
  }

  bool connected(std::uint64_t s) const { return reach(s & -s, s) == s; }

  PlanPtr make_leaf(std::size_t k) {
    auto leaf = std::make_shared<PlanNode>();
    leaf->kind = PlanNode::Kind::Leaf;
    leaf->star = k;
    const auto& datasets = sel_.stars[k].datasets;
    leaf->patterns = order_star(sg_.stars[k], fed_, datasets);
    leaf->source_cards = model_.star_source_cards(k);
    for (const auto& d : datasets) leaf->source_weights[d] = weight_of(fed_, d);
    leaf->est_card = model_.star_card(k);
    if (datasets.size() == 1) {
      leaf->endpoint = datasets.front();
      leaf->endpoint_weight = weight_of(fed_, datasets.front());
    }
    leaf->remote_requests = datasets.size();
    leaf->cost = plan_cost(*leaf);
    return leaf;
  }

  void solve(std::uint64_t s) {
    Rational card = model_.subset_card(s);
    PlanPtr winner;
    for (std::uint64_t l = (s - 1) & s; l; l = (l - 1) & s) {
      std::uint64_t r = s & ~l;
      if (!best_[l] || !best_[r]) continue;
      const auto& L = best_[l];
      const auto& R = best_[r];
      auto j = std::make_shared<PlanNode>();
      j->kind = PlanNode::Kind::Join;
      j->left = L;
      j->right = R;
      auto lv = vars_of(sg_, l), rv = vars_of(sg_, r);
      std::set_intersection(lv.begin(), lv.end(), rv.begin(), rv.end(), std::back_inserter(j->join_vars));
      j->est_card = card;
      if (L->endpoint && R->endpoint && *L->endpoint == *R->endpoint) {
        j->endpoint = L->endpoint;
        j->endpoint_weight = L->endpoint_weight;
        j->remote_requests = 1;
      } else {
        j->remote_requests = L->remote_requests + R->remote_requests;
      }
      j->cost = plan_cost(*j);
      if (!winner || better(*j, *winner)) winner = j;
    }
    best_[s] = winner;
  }

  const StarGraph& sg_;
  const SourceSelection& sel_;
  const FederationStatistics& fed_;
  CardinalityModel model_;
  std::size_t n_;
  std::vector<std::uint64_t> adj_;
  std::vector<PlanPtr> best_;
};

nlohmann::json rational_json(const Rational& r) { return to_display(r); }

}  // namespace

Plan plan_joins(const StarGraph& sg, const SourceSelection& sel, const FederationStatistics& fed, bool distinct) {
  if (sg.stars.empty()) throw std::invalid_argument("query has no stars");
  if (sg.stars.size() > kMaxStars)
    throw UnsupportedFeature("more than " + std::to_string(kMaxStars) + " star-shaped subqueries");
  return Planner(sg, sel, fed, distinct).run();
}

nlohmann::json to_json(const PlanNode& node) {
  nlohmann::json j;
  if (node.kind == PlanNode::Kind::Leaf) {
    j["type"] = "leaf";
    j["star"] = node.star;
    auto& tps = j["tps"] = nlohmann::json::array();
    for (const auto& tp : node.patterns) tps.push_back("tp" + std::to_string(tp.label));
    auto& src = j["sources"] = nlohmann::json::array();
    for (const auto& [d, c] : node.source_cards) src.push_back({{"dataset", d}, {"est_card", rational_json(c)}});
  } else {
    j["type"] = "join";
    j["vars"] = node.join_vars;
    j["cartesian"] = node.cartesian;
    j["left"] = to_json(*node.left);
    j["right"] = to_json(*node.right);
  }
  j["est_card"] = rational_json(node.est_card);
  j["est_card_exact"] = to_exact_string(node.est_card);
  j["cost"] = rational_json(node.cost);
  j["cost_exact"] = to_exact_string(node.cost);
  j["endpoint"] = node.endpoint ? nlohmann::json(*node.endpoint) : nlohmann::json(nullptr);
  j["remote_requests"] = node.remote_requests;
  return j;
}

nlohmann::json explain_json(const Plan& plan) {
  auto rows = nlohmann::json::array();
  for (const auto& e : plan.table) {
    rows.push_back({{"stars", e.stars},
                    {"est_card", to_display(e.est_card)},
                    {"cost", to_display(e.cost)},
                    {"cost_exact", to_exact_string(e.cost)},
                    {"remote_requests", e.remote_requests}});
  }
  return rows;
}

}  // namespace odyssey
