// Copyright (c) 2026 The capi authors
// SPDX-License-Identifier: Apache-2.0

#include "capi/Postprocess.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "capi/Errors.hpp"

namespace capi {

std::optional<uint32_t> SymbolTable::objectIndex(const std::string& objectName) const {
    for (size_t i = 0; i < objects.size(); ++i) {
        if (objects[i] == objectName) {
            return static_cast<uint32_t>(i);
        }
    }
    return std::nullopt;
}

void SymbolTable::validate() const {
    if (objects.size() > 256) {
        throw ParseError("symbol table lists " + std::to_string(objects.size()) +
                         " objects; at most 256 (main + 255 DSOs) are supported");
    }
    std::map<std::string, std::set<uint64_t>> seen;
    for (const auto& [name, info] : symbols) {
        if (!objectIndex(info.objectName)) {
            throw ParseError("symbol \"" + name + "\" references unknown object \"" +
                             info.objectName + "\"");
        }
        if (!seen[info.objectName].insert(info.localAddress).second) {
            throw ParseError("duplicate local address " + std::to_string(info.localAddress) +
                             " in object \"" + info.objectName + "\"");
        }
    }
}

SymbolTable parseSymbolTable(const std::string& text, const std::string& sourceName) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(sourceName + ": " + e.what());
    }
    if (!doc.is_object() || !doc.contains("objects") || !doc.contains("symbols")) {
        throw ParseError(sourceName + ": expected top-level \"objects\" and \"symbols\"");
    }
    SymbolTable table;
    for (const auto& object : doc["objects"]) {
        if (!object.is_string()) {
            throw ParseError(sourceName + ": \"objects\" must hold strings");
        }
        table.objects.push_back(object.get<std::string>());
    }
    for (const auto& [name, entry] : doc["symbols"].items()) {
        if (!entry.is_object() || !entry.contains("object") || !entry.contains("addr")) {
            throw ParseError(sourceName + ": symbol \"" + name +
                             "\" needs \"object\" and \"addr\"");
        }
        SymbolInfo info;
        info.objectName = entry["object"].get<std::string>();
        if (!entry["addr"].is_number_integer() && !entry["addr"].is_number_unsigned()) {
            throw ParseError(sourceName + ": symbol \"" + name + "\": addr must be an integer");
        }
        if (entry["addr"].is_number_integer() && entry["addr"].get<int64_t>() < 0) {
            throw ParseError(sourceName + ": symbol \"" + name + "\": addr must be non-negative");
        }
        info.localAddress = entry["addr"].get<uint64_t>();
        info.hidden = entry.value("hidden", false);
        table.symbols.emplace(name, info);
    }
    table.validate();
    return table;
}

SymbolTable loadSymbolTable(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open symbol table: " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parseSymbolTable(buffer.str(), path.string());
}

NameSet inferInlined(const CallGraph& graph, const SymbolTable& symbols) {
    NameSet inlined;
    for (const auto& [name, node] : graph.nodes()) {
        if (!symbols.hasSymbol(name)) {
            inlined.insert(name);
        }
    }
    return inlined;
}

CompensationResult compensateInlining(const CallGraph& graph, const SelectionSet& selection,
                                      const NameSet& inlined) {
    CompensationResult result;
    result.selection.sourceInstance = selection.sourceInstance;
    result.selection.functions = selection.functions;

    NameSet addedTargets;
    for (const auto& function : selection.functions) {
        if (inlined.count(function) == 0) {
            continue;
        }
        result.selection.functions.erase(function);
        // First non-inlined caller on every caller chain, cycle-safe.
        NameSet targets;
        NameSet visited{function};
        std::deque<std::string> queue(graph.at(function).callers.begin(),
                                      graph.at(function).callers.end());
        while (!queue.empty()) {
            const std::string caller = std::move(queue.front());
            queue.pop_front();
            if (!visited.insert(caller).second) {
                continue;
            }
            if (inlined.count(caller) == 0) {
                targets.insert(caller);
                continue;
            }
            for (const auto& next : graph.at(caller).callers) {
                if (visited.count(next) == 0) {
                    queue.push_back(next);
                }
            }
        }
        if (targets.empty()) {
            result.dropped.insert(function);
        } else {
            addedTargets.insert(targets.begin(), targets.end());
        }
    }
    result.selection.functions.insert(addedTargets.begin(), addedTargets.end());
    // Only genuinely new members count as added.
    std::set_difference(addedTargets.begin(), addedTargets.end(), selection.functions.begin(),
                        selection.functions.end(), std::inserter(result.added, result.added.end()));
    return result;
}

SelectionReport buildReport(const SelectionSet& pre, const SelectionSet& post,
                            const NameSet& added, std::chrono::duration<double> elapsed,
                            std::optional<size_t> graphSize) {
    SelectionReport report;
    report.selectedPre = pre.functions.size();
    report.selected = post.functions.size();
    report.added = added.size();
    report.elapsed = elapsed;
    report.graphSize = graphSize;
    return report;
}

namespace {

std::string withPercent(size_t value, const std::optional<size_t>& total) {
    std::ostringstream out;
    out << value;
    if (total && *total > 0) {
        out << " (" << std::fixed << std::setprecision(1)
            << (100.0 * static_cast<double>(value) / static_cast<double>(*total)) << "%)";
    }
    return out.str();
}

} // namespace

std::string SelectionReport::toText() const {
    std::ostringstream out;
    const std::string pre = withPercent(selectedPre, graphSize);
    const std::string sel = withPercent(selected, graphSize);
    std::ostringstream time;
    time << std::fixed << std::setprecision(3) << elapsed.count() << "s";

    auto width = [](const std::string& s, size_t min) { return std::max(s.size(), min) + 2; };
    out << std::left;
    out.width(static_cast<std::streamsize>(width(time.str(), 4)));
    out << "time";
    out.width(static_cast<std::streamsize>(width(pre, 13)));
    out << "#selected_pre";
    out.width(static_cast<std::streamsize>(width(sel, 9)));
    out << "#selected";
    out << "#added\n";
    out.width(static_cast<std::streamsize>(width(time.str(), 4)));
    out << time.str();
    out.width(static_cast<std::streamsize>(width(pre, 13)));
    out << pre;
    out.width(static_cast<std::streamsize>(width(sel, 9)));
    out << sel;
    out << added << "\n";
    return out.str();
}

std::string SelectionReport::toJson() const {
    nlohmann::ordered_json doc;
    doc["time_s"] = elapsed.count();
    doc["selected_pre"] = selectedPre;
    doc["selected"] = selected;
    doc["added"] = added;
    if (graphSize) {
        doc["graph_size"] = *graphSize;
    }
    return doc.dump(2) + "\n";
}

} // namespace capi
