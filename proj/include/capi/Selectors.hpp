// Copyright (c) 2026 The capi authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CAPI_SELECTORS_HPP
#define CAPI_SELECTORS_HPP

#include <string>
#include <vector>

#include "capi/CallGraph.hpp"
#include "capi/SpecLang.hpp"

namespace capi {

/// Result of evaluating a selector instance against a call graph.
struct SelectionSet {
    NameSet functions;
    std::string sourceInstance; // producing instance, for diagnostics
};

/// Evaluates the pipeline's entry instance against the graph, memoizing
/// sub-results. Pure function of (pipeline, graph).
SelectionSet evaluate(const SelectorPipeline& pipeline, const CallGraph& graph);

/// Prunes sole-caller chain links from `selected`. The graph is traversed
/// breadth-first from its entry points; a callee whose only caller (self
/// edges aside) is the node under visit is dropped unless `critical` retains
/// it. Never adds functions; unreachable nodes are never visited and thus
/// never dropped.
SelectionSet coarsen(const CallGraph& graph, const SelectionSet& selected,
                     const SelectionSet& critical);

/// Per-instance cardinality table, in pipeline order.
struct InstanceStats {
    size_t index;
    std::string displayName;
    std::string kind;
    bool imported;
    size_t selected;
};

std::vector<InstanceStats> instancesReport(const SelectorPipeline& pipeline,
                                           const CallGraph& graph);

/// Aligned text rendering of an instances report.
std::string formatInstancesReport(const std::vector<InstanceStats>& rows);

} // namespace capi

#endif // CAPI_SELECTORS_HPP
