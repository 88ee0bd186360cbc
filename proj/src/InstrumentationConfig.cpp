// Copyright (c) 2026 The capi authors
// SPDX-License-Identifier: Apache-2.0

#include "capi/InstrumentationConfig.hpp"

#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "capi/Errors.hpp"

namespace capi {

namespace {

constexpr const char* kBegin = "SCOREP_REGION_NAMES_BEGIN";
constexpr const char* kEnd = "SCOREP_REGION_NAMES_END";

std::string escapeName(const std::string& name) {
    std::string out;
    for (char c : name) {
        if (c == '*' || c == '?' || c == '\\') {
            out.push_back('\\');
        }
        out.push_back(c);
    }
    return out;
}

/// Unescapes a filter name. A bare wildcard character makes the pattern
/// unsupported rather than silently matching nothing.
std::string unescapeName(const std::string& text, const std::string& where) {
    std::string out;
    for (size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (c == '\\') {
            if (i + 1 >= text.size()) {
                throw ParseError(where + ": trailing escape character");
            }
            out.push_back(text[++i]);
            continue;
        }
        if (c == '*' || c == '?') {
            throw ParseError(where + ": unsupported wildcard pattern \"" + text + "\"");
        }
        out.push_back(c);
    }
    return out;
}

std::string trim(const std::string& line) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
        return {};
    }
    const auto last = line.find_last_not_of(" \t\r");
    return line.substr(first, last - first + 1);
}

} // namespace

void InstrumentationConfig::validate() const {
    std::set<std::string> seen;
    for (const auto& name : include) {
        if (!seen.insert(name).second) {
            throw Error("instrumentation config lists \"" + name + "\" twice");
        }
    }
    for (const auto& [name, tag] : origin) {
        (void)tag;
        if (seen.count(name) == 0) {
            throw Error("origin entry for \"" + name + "\" has no include entry");
        }
    }
    for (const auto& [name, id] : idHints) {
        (void)id;
        if (seen.count(name) == 0) {
            throw Error("id hint for \"" + name + "\" has no include entry");
        }
    }
}

std::string emitScorepFilter(const InstrumentationConfig& config,
                             const std::map<std::string, std::string>& demangled) {
    config.validate();
    std::string out;
    out += kBegin;
    out += "\n  EXCLUDE *\n";
    for (const auto& name : config.include) {
        out += "  INCLUDE " + escapeName(name);
        auto it = demangled.find(name);
        if (it != demangled.end() && !it->second.empty()) {
            out += " # " + it->second;
        }
        out += "\n";
    }
    out += kEnd;
    out += "\n";
    return out;
}

InstrumentationConfig parseScorepFilter(const std::string& text, const std::string& sourceName) {
    InstrumentationConfig config;
    std::istringstream in(text);
    std::string raw;
    int lineNo = 0;
    bool begun = false;
    bool excluded = false;
    bool ended = false;
    while (std::getline(in, raw)) {
        ++lineNo;
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#') {
            continue;
        }
        const std::string where = sourceName + ":" + std::to_string(lineNo);
        if (ended) {
            throw ParseError(where + ": content after " + std::string(kEnd));
        }
        if (!begun) {
            if (line != kBegin) {
                throw ParseError(where + ": expected " + std::string(kBegin));
            }
            begun = true;
            continue;
        }
        if (line == kEnd) {
            ended = true;
            continue;
        }
        if (!excluded) {
            if (line != "EXCLUDE *") {
                throw ParseError(where + ": expected \"EXCLUDE *\" before include entries");
            }
            excluded = true;
            continue;
        }
        std::istringstream fields(line);
        std::string keyword, name;
        fields >> keyword >> name;
        if (keyword != "INCLUDE" || name.empty()) {
            throw ParseError(where + ": expected \"INCLUDE <name>\"");
        }
        std::string rest;
        std::getline(fields, rest);
        rest = trim(rest);
        if (!rest.empty() && rest[0] != '#') {
            throw ParseError(where + ": unexpected trailing content \"" + rest + "\"");
        }
        config.include.push_back(unescapeName(name, where));
        config.origin[config.include.back()] = Provenance::Pipeline;
    }
    if (!begun) {
        throw ParseError(sourceName + ": missing " + std::string(kBegin));
    }
    if (!ended) {
        throw ParseError(sourceName + ": missing " + std::string(kEnd));
    }
    config.validate();
    return config;
}

std::string emitNativeConfig(const InstrumentationConfig& config) {
    config.validate();
    nlohmann::ordered_json doc;
    doc["version"] = 1;
    doc["include"] = config.include;
    if (!config.origin.empty()) {
        nlohmann::ordered_json origin;
        for (const auto& name : config.include) {
            auto it = config.origin.find(name);
            if (it != config.origin.end()) {
                origin[name] = it->second == Provenance::Pipeline ? "pipeline" : "compensation";
            }
        }
        doc["origin"] = origin;
    }
    if (!config.idHints.empty()) {
        nlohmann::ordered_json hints;
        for (const auto& name : config.include) {
            auto it = config.idHints.find(name);
            if (it != config.idHints.end()) {
                hints[name] = it->second;
            }
        }
        doc["idHints"] = hints;
    }
    return doc.dump();
}

InstrumentationConfig parseNativeConfig(const std::string& text, const std::string& sourceName) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(sourceName + ": " + e.what());
    }
    if (!doc.is_object()) {
        throw ParseError(sourceName + ": expected a JSON object");
    }
    if (!doc.contains("version") || !doc["version"].is_number_integer()) {
        throw ParseError(sourceName + ": missing integer \"version\"");
    }
    if (doc["version"] != 1) {
        throw ParseError(sourceName + ": unsupported config version " + doc["version"].dump());
    }
    if (!doc.contains("include") || !doc["include"].is_array()) {
        throw ParseError(sourceName + ": missing \"include\" array");
    }
    InstrumentationConfig config;
    for (const auto& name : doc["include"]) {
        if (!name.is_string()) {
            throw ParseError(sourceName + ": \"include\" must hold strings");
        }
        config.include.push_back(name.get<std::string>());
    }
    if (doc.contains("origin")) {
        for (const auto& [name, tag] : doc["origin"].items()) {
            if (tag == "pipeline") {
                config.origin[name] = Provenance::Pipeline;
            } else if (tag == "compensation") {
                config.origin[name] = Provenance::Compensation;
            } else {
                throw ParseError(sourceName + ": unknown origin tag " + tag.dump());
            }
        }
    }
    if (doc.contains("idHints")) {
        for (const auto& [name, id] : doc["idHints"].items()) {
            if (!id.is_number_unsigned() && !id.is_number_integer()) {
                throw ParseError(sourceName + ": id hint for \"" + name + "\" must be an integer");
            }
            const int64_t value = id.get<int64_t>();
            if (value < 0 || value > static_cast<int64_t>(UINT32_MAX)) {
                throw ParseError(sourceName + ": id hint for \"" + name + "\" out of range");
            }
            config.idHints[name] = static_cast<uint32_t>(value);
        }
    }
    try {
        config.validate();
    } catch (const Error& e) {
        throw ParseError(sourceName + ": " + e.what());
    }
    return config;
}

ConfigFormat sniffConfigFormat(const std::string& text) {
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            continue;
        }
        return c == '{' ? ConfigFormat::Native : ConfigFormat::ScorepFilter;
    }
    return ConfigFormat::ScorepFilter;
}

InstrumentationConfig loadConfigFile(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open instrumentation config: " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();
    return sniffConfigFormat(text) == ConfigFormat::Native
               ? parseNativeConfig(text, path.string())
               : parseScorepFilter(text, path.string());
}

} // namespace capi
