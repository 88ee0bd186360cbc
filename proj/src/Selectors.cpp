// Copyright (c) 2026 The capi authors
// SPDX-License-Identifier: Apache-2.0

#include "capi/Selectors.hpp"

#include <algorithm>
#include <deque>
#include <optional>
#include <regex>
#include <sstream>

#include "capi/Errors.hpp"

namespace capi {

namespace {

bool compareValue(uint64_t lhs, const std::string& op, int64_t rhs) {
    const auto threshold = static_cast<uint64_t>(rhs);
    if (op == ">=") return lhs >= threshold;
    if (op == "<=") return lhs <= threshold;
    if (op == ">") return lhs > threshold;
    if (op == "<") return lhs < threshold;
    if (op == "==") return lhs == threshold;
    throw Error("malformed comparison operator \"" + op + "\"");
}

class Evaluator {
public:
    Evaluator(const SelectorPipeline& pipeline, const CallGraph& graph)
        : pipeline_(pipeline), graph_(graph), memo_(pipeline.instances.size()) {
        universe_ = graph.names();
    }

    const NameSet& eval(size_t index) {
        if (memo_[index]) {
            return *memo_[index];
        }
        memo_[index] = compute(index);
        return *memo_[index];
    }

private:
    const NameSet& argSet(const Argument& arg) {
        if (arg.type == Argument::Type::UniverseRef) {
            return universe_;
        }
        return eval(arg.instance);
    }

    NameSet filter(const NameSet& input, const std::function<bool(const FunctionNode&)>& pred) {
        NameSet out;
        for (const auto& name : input) {
            if (pred(graph_.at(name))) {
                out.insert(name);
            }
        }
        return out;
    }

    NameSet compute(size_t index) {
        const SelectorInstance& instance = pipeline_.instances[index];
        const auto& args = instance.args;
        switch (instance.kind) {
        case SelectorKind::Universe:
            return universe_;
        case SelectorKind::Alias:
            return argSet(args[0]);
        case SelectorKind::Join: {
            NameSet out;
            for (const auto& arg : args) {
                const NameSet& part = argSet(arg);
                out.insert(part.begin(), part.end());
            }
            return out;
        }
        case SelectorKind::Subtract: {
            const NameSet& keep = argSet(args[0]);
            const NameSet& drop = argSet(args[1]);
            NameSet out;
            std::set_difference(keep.begin(), keep.end(), drop.begin(), drop.end(),
                                std::inserter(out, out.end()));
            return out;
        }
        case SelectorKind::InSystemHeader:
            return filter(argSet(args[0]), [](const FunctionNode& f) { return f.inSystemHeader; });
        case SelectorKind::InlineSpecified:
            return filter(argSet(args[0]), [](const FunctionNode& f) { return f.isInlineMarked; });
        case SelectorKind::Flops:
            return filter(argSet(args[2]), [&](const FunctionNode& f) {
                return compareValue(f.flops, args[0].text, args[1].number);
            });
        case SelectorKind::LoopDepth:
            return filter(argSet(args[2]), [&](const FunctionNode& f) {
                return compareValue(f.maxLoopDepth, args[0].text, args[1].number);
            });
        case SelectorKind::ByName: {
            const std::regex pattern(args[0].text);
            return filter(argSet(args[1]), [&](const FunctionNode& f) {
                return std::regex_match(f.name, pattern) ||
                       (!f.demangledName.empty() && std::regex_match(f.demangledName, pattern));
            });
        }
        case SelectorKind::OnCallPathTo: {
            const NameSet& targets = argSet(args[0]);
            const NameSet& domain = argSet(args[1]);
            // On a call path from an entry point into the targets: forward
            // reachability meets backward reachability. Walk semantics, so
            // cycles need no special treatment.
            const NameSet forward = reachableFrom(graph_, graph_.entryPoints());
            const NameSet backward = reachesInto(graph_, targets);
            NameSet out;
            for (const auto& name : domain) {
                if (forward.count(name) != 0 && backward.count(name) != 0) {
                    out.insert(name);
                }
            }
            return out;
        }
        case SelectorKind::Coarse: {
            SelectionSet selected{argSet(args[0]), pipeline_.displayName(index)};
            SelectionSet critical;
            if (args.size() > 1) {
                critical.functions = argSet(args[1]);
            }
            return coarsen(graph_, selected, critical).functions;
        }
        }
        throw Error("unhandled selector kind");
    }

    const SelectorPipeline& pipeline_;
    const CallGraph& graph_;
    std::vector<std::optional<NameSet>> memo_;
    NameSet universe_;
};

} // namespace

SelectionSet evaluate(const SelectorPipeline& pipeline, const CallGraph& graph) {
    const size_t entry = pipeline.entryIndex();
    Evaluator evaluator(pipeline, graph);
    return SelectionSet{evaluator.eval(entry), pipeline.displayName(entry)};
}

SelectionSet coarsen(const CallGraph& graph, const SelectionSet& selected,
                     const SelectionSet& critical) {
    NameSet removed;
    NameSet visited;
    std::deque<std::string> queue(graph.entryPoints().begin(), graph.entryPoints().end());
    while (!queue.empty()) {
        const std::string current = std::move(queue.front());
        queue.pop_front();
        if (!visited.insert(current).second) {
            continue;
        }
        for (const auto& callee : graph.at(current).callees) {
            if (callee != current && critical.functions.count(callee) == 0) {
                // Drop the callee when the visited node is its only caller.
                // Self edges do not count as callers here.
                const NameSet& callers = graph.at(callee).callers;
                size_t others = 0;
                bool currentCalls = false;
                for (const auto& caller : callers) {
                    if (caller == callee) {
                        continue;
                    }
                    ++others;
                    if (caller == current) {
                        currentCalls = true;
                    }
                }
                if (others == 1 && currentCalls) {
                    removed.insert(callee);
                }
            }
            if (visited.count(callee) == 0) {
                queue.push_back(callee);
            }
        }
    }
    SelectionSet result;
    result.sourceInstance = "coarse";
    std::set_difference(selected.functions.begin(), selected.functions.end(), removed.begin(),
                        removed.end(), std::inserter(result.functions, result.functions.end()));
    return result;
}

std::vector<InstanceStats> instancesReport(const SelectorPipeline& pipeline,
                                           const CallGraph& graph) {
    Evaluator evaluator(pipeline, graph);
    std::vector<InstanceStats> rows;
    rows.reserve(pipeline.instances.size());
    for (size_t i = 0; i < pipeline.instances.size(); ++i) {
        rows.push_back(InstanceStats{i, pipeline.displayName(i),
                                     std::string(selectorKindName(pipeline.instances[i].kind)),
                                     pipeline.instances[i].importedFrom.has_value(),
                                     evaluator.eval(i).size()});
    }
    return rows;
}

std::string formatInstancesReport(const std::vector<InstanceStats>& rows) {
    size_t nameWidth = 8;
    size_t kindWidth = 4;
    for (const auto& row : rows) {
        nameWidth = std::max(nameWidth, row.displayName.size());
        kindWidth = std::max(kindWidth, row.kind.size());
    }
    std::ostringstream out;
    out << "idx  " << std::left;
    out.width(static_cast<std::streamsize>(nameWidth + 2));
    out << "instance";
    out.width(static_cast<std::streamsize>(kindWidth + 2));
    out << "kind";
    out << "selected\n";
    for (const auto& row : rows) {
        std::ostringstream line;
        line << std::right;
        line.width(3);
        line << row.index;
        line << "  " << std::left;
        line.width(static_cast<std::streamsize>(nameWidth + 2));
        line << row.displayName;
        line.width(static_cast<std::streamsize>(kindWidth + 2));
        line << row.kind;
        line << row.selected;
        if (row.imported) {
            line << "  [imported]";
        }
        out << line.str() << "\n";
    }
    return out.str();
}

} // namespace capi
