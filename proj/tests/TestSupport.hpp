// Copyright (c) 2026 The capi authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CAPI_TESTS_TESTSUPPORT_HPP
#define CAPI_TESTS_TESTSUPPORT_HPP

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "capi/CallGraph.hpp"
#include "capi/Replay.hpp"

namespace capi::test {

inline std::filesystem::path fixturePath(const std::string& name) {
    return std::filesystem::path(CAPI_FIXTURE_DIR) / name;
}

inline std::string readFile(const std::filesystem::path& path) {
    std::ifstream in(path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

/// Graph from an adjacency list; all metadata defaulted.
inline CallGraph makeGraph(const std::vector<std::pair<std::string, std::vector<std::string>>>& adj) {
    CallGraph graph;
    for (const auto& [name, callees] : adj) {
        FunctionNode node;
        node.name = name;
        node.callees.insert(callees.begin(), callees.end());
        graph.addNode(std::move(node));
    }
    graph.seal();
    return graph;
}

/// Random graph with up to maxNodes nodes and randomized metadata.
inline CallGraph randomGraph(std::mt19937& rng, size_t maxNodes, bool includeMain = true) {
    std::uniform_int_distribution<size_t> nodeCount(1, maxNodes);
    const size_t n = nodeCount(rng);
    std::vector<std::string> names;
    names.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        names.push_back("f" + std::to_string(i));
    }
    if (includeMain && !names.empty()) {
        names[0] = "main";
    }
    CallGraph graph;
    std::uniform_int_distribution<uint64_t> stmts(0, 40);
    std::uniform_int_distribution<uint64_t> flops(0, 30);
    std::uniform_int_distribution<uint32_t> depth(0, 3);
    std::bernoulli_distribution flag(0.2);
    std::bernoulli_distribution edge(std::min(0.25, 3.0 / static_cast<double>(n)));
    for (size_t i = 0; i < n; ++i) {
        FunctionNode node;
        node.name = names[i];
        node.numStatements = stmts(rng);
        node.flops = flops(rng);
        node.maxLoopDepth = depth(rng);
        node.isInlineMarked = flag(rng);
        node.inSystemHeader = flag(rng);
        node.isVirtual = flag(rng);
        for (size_t j = 0; j < n; ++j) {
            if (edge(rng)) {
                node.callees.insert(names[j]);
            }
        }
        graph.addNode(std::move(node));
    }
    graph.seal();
    return graph;
}

/// Random subset of the graph's functions.
inline NameSet randomSubset(std::mt19937& rng, const NameSet& names, double p = 0.5) {
    std::bernoulli_distribution pick(p);
    NameSet subset;
    for (const auto& name : names) {
        if (pick(rng)) {
            subset.insert(name);
        }
    }
    return subset;
}

/// Well-nested per-thread trace over the given function names with strictly
/// advancing timestamps.
inline std::vector<TraceEvent> randomNestedTrace(std::mt19937& rng,
                                                 const std::vector<std::string>& functions,
                                                 uint32_t threads, size_t maxCalls = 12) {
    std::vector<TraceEvent> events;
    std::uniform_int_distribution<size_t> fnIndex(0, functions.size() - 1);
    std::uniform_int_distribution<int64_t> gap(1, 50);
    for (uint32_t tid = 0; tid < threads; ++tid) {
        int64_t clock = 0;
        std::uniform_int_distribution<size_t> calls(1, maxCalls);
        size_t remaining = calls(rng);
        std::uniform_int_distribution<int> childCount(0, 2);
        // Recursive generator: each call emits enter, children, exit.
        std::function<void(size_t)> emit = [&](size_t depth) {
            if (remaining == 0) {
                return;
            }
            --remaining;
            const std::string& fn = functions[fnIndex(rng)];
            clock += gap(rng);
            events.push_back(TraceEvent{tid, SledKind::Entry, fn, clock});
            if (depth < 5) {
                const int children = childCount(rng);
                for (int i = 0; i < children; ++i) {
                    emit(depth + 1);
                }
            }
            clock += gap(rng);
            events.push_back(TraceEvent{tid, SledKind::Exit, fn, clock});
        };
        while (remaining > 0) {
            emit(0);
        }
    }
    return events;
}

} // namespace capi::test

#endif // CAPI_TESTS_TESTSUPPORT_HPP
