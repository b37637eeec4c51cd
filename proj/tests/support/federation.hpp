#pragma once

// Glue for tests that need the whole stack: statistics, links, endpoints and
// a planned query.

#include <memory>

#include "odyssey/cs_builder.hpp"
#include "odyssey/decomposer.hpp"
#include "odyssey/fed_executor.hpp"
#include "odyssey/fed_linker.hpp"
#include "odyssey/optimizer.hpp"
#include "odyssey/query_model.hpp"
#include "odyssey/synopsis.hpp"
#include "support/generators.hpp"

namespace odyssey::testkit {

struct TestFederation {
  FederationStatistics stats;
  EndpointRegistry registry;
};

// exact = link from entity descriptions, otherwise from synopses.
inline TestFederation make_federation(const std::vector<Dataset>& datasets, bool exact = true, std::size_t budget = 0) {
  TestFederation tf;
  std::vector<LinkInput> inputs;
  for (const auto& d : datasets) {
    LinkInput in;
    in.stats = build_statistics(d, budget);
    auto desc = build_descriptions(d, in.stats);
    if (exact) in.descriptions = desc;
    else in.synopsis = build_tree(desc, 4);
    inputs.push_back(std::move(in));
    tf.registry.add({d.id(), std::make_shared<const Dataset>(d), {}});
  }
  tf.stats = link_federation(std::move(inputs));
  return tf;
}

inline TestFederation make_federation(const Federation& fed, bool exact = true, std::size_t budget = 0) {
  return make_federation(fed.datasets, exact, budget);
}

struct Planned {
  StarGraph sg;
  SourceSelection sel;
  Plan plan;
  ExecutablePlan exec;
};

inline Planned plan_query(const Query& q, const TestFederation& tf, bool merge = true) {
  Planned p;
  p.sg = decompose_stars(q);
  p.sel = select_sources(p.sg, tf.stats);
  p.plan = plan_joins(p.sg, p.sel, tf.stats, q.distinct);
  p.exec = decompose(p.plan, q, p.sg, p.sel, {.merge = merge});
  return p;
}

}  // namespace odyssey::testkit
