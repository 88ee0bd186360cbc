// Copyright (c) 2026 The capi authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CAPI_CALLGRAPH_HPP
#define CAPI_CALLGRAPH_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace capi {

using NameSet = std::set<std::string>;

/// One function in a whole-program call graph, together with the static
/// metadata the selectors consume.
struct FunctionNode {
    std::string name;
    std::string demangledName; // empty when unknown
    uint64_t numStatements = 0;
    uint64_t flops = 0;
    uint32_t maxLoopDepth = 0;
    bool isInlineMarked = false;
    bool inSystemHeader = false;
    bool isVirtual = false;
    NameSet callees;
    NameSet callers; // derived on seal()

    bool operator==(const FunctionNode&) const = default;
};

/// Whole-program call graph. Cycles are permitted. After seal() the graph
/// is immutable by convention and safe to share across threads.
class CallGraph {
public:
    /// Adds a node. Throws ParseError if a node with the same name exists.
    void addNode(FunctionNode node);

    /// Records a caller -> callee edge. The nodes need not exist yet;
    /// unresolved names are rejected by seal().
    void addCall(const std::string& caller, const std::string& callee);

    /// Derives caller sets from callee sets, verifies that every referenced
    /// callee resolves to a node, and computes the entry points (zero-caller
    /// nodes, always including "main" when present).
    /// Throws ParseError listing dangling callee names.
    void seal();

    bool sealed() const { return sealed_; }

    const std::map<std::string, FunctionNode>& nodes() const { return nodes_; }
    const NameSet& entryPoints() const { return entryPoints_; }

    bool contains(const std::string& name) const { return nodes_.count(name) != 0; }
    const FunctionNode* find(const std::string& name) const;
    const FunctionNode& at(const std::string& name) const;

    size_t nodeCount() const { return nodes_.size(); }
    size_t edgeCount() const;

    /// All node names, sorted.
    NameSet names() const;

    bool operator==(const CallGraph&) const = default;

private:
    std::map<std::string, FunctionNode> nodes_;
    NameSet entryPoints_;
    bool sealed_ = false;
};

/// Loads a call-graph JSON document. Unknown keys are reported through
/// `warnings` (when given) and otherwise ignored.
CallGraph loadCallGraph(const std::filesystem::path& path,
                        std::vector<std::string>* warnings = nullptr);

/// Same as loadCallGraph but from in-memory text.
CallGraph parseCallGraph(const std::string& text, const std::string& sourceName = "<memory>",
                         std::vector<std::string>* warnings = nullptr);

/// Union of two graphs. Nodes with equal names are unified: callee sets are
/// merged, numeric metadata takes the element-wise maximum, boolean flags are
/// OR-combined. Total, never fails.
CallGraph mergeGraphs(const CallGraph& a, const CallGraph& b);

/// Forward closure over callee edges, roots included. Terminates on cycles.
/// Throws Error if a root is not a node of the graph.
NameSet reachableFrom(const CallGraph& graph, const NameSet& roots);

/// Backward closure over caller edges, targets included.
NameSet reachesInto(const CallGraph& graph, const NameSet& targets);

} // namespace capi

#endif // CAPI_CALLGRAPH_HPP
