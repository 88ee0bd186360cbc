// Copyright (c) 2026 The capi authors
// SPDX-License-Identifier: Apache-2.0

#include "capi/CallGraph.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "capi/Errors.hpp"

namespace capi {

namespace {

using nlohmann::json;

/// SAX walker that rejects duplicate keys anywhere in the document. The
/// default DOM parser would silently keep one of the two entries, which
/// would turn a duplicate function definition into data loss.
class DuplicateKeyCheck : public nlohmann::json_sax<json> {
public:
    explicit DuplicateKeyCheck(const std::string& source) : source_(source) {}

    bool null() override { return true; }
    bool boolean(bool) override { return true; }
    bool number_integer(number_integer_t) override { return true; }
    bool number_unsigned(number_unsigned_t) override { return true; }
    bool number_float(number_float_t, const string_t&) override { return true; }
    bool string(string_t&) override { return true; }
    bool binary(binary_t&) override { return true; }
    bool start_array(std::size_t) override { return true; }
    bool end_array() override { return true; }

    bool start_object(std::size_t) override {
        scopes_.emplace_back();
        return true;
    }
    bool key(string_t& value) override {
        if (!scopes_.back().insert(value).second) {
            throw ParseError(source_ + ": duplicate key \"" + value + "\"");
        }
        return true;
    }
    bool end_object() override {
        scopes_.pop_back();
        return true;
    }
    bool parse_error(std::size_t, const std::string&, const nlohmann::detail::exception& ex) override {
        throw ParseError(source_ + ": " + ex.what());
    }

private:
    std::string source_;
    std::vector<std::set<std::string>> scopes_;
};

json parseJsonStrict(const std::string& text, const std::string& source) {
    DuplicateKeyCheck check(source);
    json::sax_parse(text, &check);
    return json::parse(text);
}

uint64_t getUnsigned(const json& object, const char* key, const std::string& context,
                     const std::string& source) {
    const auto it = object.find(key);
    if (it == object.end()) {
        return 0;
    }
    if (!it->is_number_integer() && !it->is_number_unsigned()) {
        throw ParseError(source + ": " + context + "." + key + " must be an integer");
    }
    if (it->is_number_integer() && it->get<int64_t>() < 0) {
        throw ParseError(source + ": " + context + "." + key + " must be non-negative");
    }
    return it->get<uint64_t>();
}

bool getBool(const json& object, const char* key, const std::string& context,
             const std::string& source) {
    const auto it = object.find(key);
    if (it == object.end()) {
        return false;
    }
    if (!it->is_boolean()) {
        throw ParseError(source + ": " + context + "." + key + " must be a boolean");
    }
    return it->get<bool>();
}

const std::set<std::string> kKnownFunctionKeys = {
    "demangled", "numStatements", "flops", "loopDepth",
    "isInline",  "systemHeader",  "isVirtual", "callees",
};

} // namespace

void CallGraph::addNode(FunctionNode node) {
    auto [it, inserted] = nodes_.emplace(node.name, std::move(node));
    if (!inserted) {
        throw ParseError("duplicate function node \"" + it->first + "\"");
    }
    sealed_ = false;
}

void CallGraph::addCall(const std::string& caller, const std::string& callee) {
    auto it = nodes_.find(caller);
    if (it == nodes_.end()) {
        throw Error("addCall: unknown caller \"" + caller + "\"");
    }
    it->second.callees.insert(callee);
    sealed_ = false;
}

void CallGraph::seal() {
    for (auto& [name, node] : nodes_) {
        node.callers.clear();
    }
    NameSet dangling;
    for (const auto& [name, node] : nodes_) {
        for (const auto& callee : node.callees) {
            auto it = nodes_.find(callee);
            if (it == nodes_.end()) {
                dangling.insert(callee);
            } else {
                it->second.callers.insert(name);
            }
        }
    }
    if (!dangling.empty()) {
        std::string names;
        for (const auto& n : dangling) {
            names += (names.empty() ? "" : ", ") + n;
        }
        throw ParseError("dangling callee name(s): " + names);
    }
    entryPoints_.clear();
    for (const auto& [name, node] : nodes_) {
        if (node.callers.empty()) {
            entryPoints_.insert(name);
        }
    }
    if (nodes_.count("main") != 0) {
        entryPoints_.insert("main");
    }
    sealed_ = true;
}

const FunctionNode* CallGraph::find(const std::string& name) const {
    auto it = nodes_.find(name);
    return it == nodes_.end() ? nullptr : &it->second;
}

const FunctionNode& CallGraph::at(const std::string& name) const {
    const FunctionNode* node = find(name);
    if (node == nullptr) {
        throw Error("unknown function \"" + name + "\"");
    }
    return *node;
}

size_t CallGraph::edgeCount() const {
    size_t count = 0;
    for (const auto& [name, node] : nodes_) {
        count += node.callees.size();
    }
    return count;
}

NameSet CallGraph::names() const {
    NameSet result;
    for (const auto& [name, node] : nodes_) {
        result.insert(name);
    }
    return result;
}

CallGraph parseCallGraph(const std::string& text, const std::string& sourceName,
                         std::vector<std::string>* warnings) {
    const json doc = parseJsonStrict(text, sourceName);
    if (!doc.is_object()) {
        throw ParseError(sourceName + ": top level must be an object");
    }
    const auto meta = doc.find("_meta");
    if (meta == doc.end() || !meta->is_object() || !meta->contains("version")) {
        throw ParseError(sourceName + ": missing _meta.version");
    }
    if ((*meta)["version"] != 1) {
        throw ParseError(sourceName + ": unsupported call-graph version " + (*meta)["version"].dump());
    }
    const auto functions = doc.find("functions");
    if (functions == doc.end() || !functions->is_object()) {
        throw ParseError(sourceName + ": missing \"functions\" object");
    }

    auto warn = [&](const std::string& message) {
        if (warnings != nullptr) {
            warnings->push_back(sourceName + ": " + message);
        }
    };
    for (const auto& [key, value] : doc.items()) {
        if (key != "_meta" && key != "functions") {
            warn("ignoring unknown top-level key \"" + key + "\"");
        }
    }

    CallGraph graph;
    for (const auto& [name, entry] : functions->items()) {
        if (!entry.is_object()) {
            throw ParseError(sourceName + ": function \"" + name + "\" must be an object");
        }
        for (const auto& [key, value] : entry.items()) {
            if (kKnownFunctionKeys.count(key) == 0) {
                warn("ignoring unknown key \"" + key + "\" in function \"" + name + "\"");
            }
        }
        FunctionNode node;
        node.name = name;
        if (entry.contains("demangled")) {
            if (!entry["demangled"].is_string()) {
                throw ParseError(sourceName + ": " + name + ".demangled must be a string");
            }
            node.demangledName = entry["demangled"].get<std::string>();
        }
        node.numStatements = getUnsigned(entry, "numStatements", name, sourceName);
        node.flops = getUnsigned(entry, "flops", name, sourceName);
        node.maxLoopDepth = static_cast<uint32_t>(getUnsigned(entry, "loopDepth", name, sourceName));
        node.isInlineMarked = getBool(entry, "isInline", name, sourceName);
        node.inSystemHeader = getBool(entry, "systemHeader", name, sourceName);
        node.isVirtual = getBool(entry, "isVirtual", name, sourceName);
        if (entry.contains("callees")) {
            if (!entry["callees"].is_array()) {
                throw ParseError(sourceName + ": " + name + ".callees must be an array");
            }
            for (const auto& callee : entry["callees"]) {
                if (!callee.is_string()) {
                    throw ParseError(sourceName + ": " + name + ".callees must hold strings");
                }
                node.callees.insert(callee.get<std::string>());
            }
        }
        graph.addNode(std::move(node));
    }
    graph.seal();
    return graph;
}

CallGraph loadCallGraph(const std::filesystem::path& path, std::vector<std::string>* warnings) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open call-graph file: " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parseCallGraph(buffer.str(), path.string(), warnings);
}

CallGraph mergeGraphs(const CallGraph& a, const CallGraph& b) {
    std::map<std::string, FunctionNode> combined;
    auto absorb = [&](const CallGraph& g) {
        for (const auto& [name, node] : g.nodes()) {
            auto it = combined.find(name);
            if (it == combined.end()) {
                FunctionNode copy = node;
                copy.callers.clear();
                combined.emplace(name, std::move(copy));
                continue;
            }
            // Unify: callee union, numeric max, boolean OR. For the display
            // name, keep the smaller non-empty variant so the merge stays
            // commutative.
            FunctionNode& unified = it->second;
            unified.callees.insert(node.callees.begin(), node.callees.end());
            unified.numStatements = std::max(unified.numStatements, node.numStatements);
            unified.flops = std::max(unified.flops, node.flops);
            unified.maxLoopDepth = std::max(unified.maxLoopDepth, node.maxLoopDepth);
            unified.isInlineMarked = unified.isInlineMarked || node.isInlineMarked;
            unified.inSystemHeader = unified.inSystemHeader || node.inSystemHeader;
            unified.isVirtual = unified.isVirtual || node.isVirtual;
            if (unified.demangledName.empty()) {
                unified.demangledName = node.demangledName;
            } else if (!node.demangledName.empty()) {
                unified.demangledName = std::min(unified.demangledName, node.demangledName);
            }
        }
    };
    absorb(a);
    absorb(b);
    CallGraph result;
    for (auto& [name, node] : combined) {
        result.addNode(std::move(node));
    }
    result.seal();
    return result;
}

NameSet reachableFrom(const CallGraph& graph, const NameSet& roots) {
    for (const auto& root : roots) {
        if (!graph.contains(root)) {
            throw Error("reachableFrom: unknown root \"" + root + "\"");
        }
    }
    NameSet visited;
    std::deque<std::string> queue(roots.begin(), roots.end());
    while (!queue.empty()) {
        const std::string current = std::move(queue.front());
        queue.pop_front();
        if (!visited.insert(current).second) {
            continue;
        }
        for (const auto& callee : graph.at(current).callees) {
            if (visited.count(callee) == 0) {
                queue.push_back(callee);
            }
        }
    }
    return visited;
}

NameSet reachesInto(const CallGraph& graph, const NameSet& targets) {
    NameSet visited;
    std::deque<std::string> queue;
    for (const auto& target : targets) {
        if (graph.contains(target)) {
            queue.push_back(target);
        }
    }
    while (!queue.empty()) {
        const std::string current = std::move(queue.front());
        queue.pop_front();
        if (!visited.insert(current).second) {
            continue;
        }
        for (const auto& caller : graph.at(current).callers) {
            if (visited.count(caller) == 0) {
                queue.push_back(caller);
            }
        }
    }
    return visited;
}

} // namespace capi
