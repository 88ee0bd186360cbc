// Copyright (c) 2026 The capi authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CAPI_POSTPROCESS_HPP
#define CAPI_POSTPROCESS_HPP

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "capi/CallGraph.hpp"
#include "capi/Selectors.hpp"

namespace capi {

/// Where a linker symbol lives: owning object, address local to that
/// object, and whether the symbol is hidden from resolution.
struct SymbolInfo {
    std::string objectName;
    uint64_t localAddress = 0;
    bool hidden = false;

    bool operator==(const SymbolInfo&) const = default;
};

/// nm-style view of the program: the main executable plus its shared
/// objects, and the symbols they expose.
struct SymbolTable {
    std::vector<std::string> objects; // index 0 = main executable
    std::map<std::string, SymbolInfo> symbols;

    bool hasSymbol(const std::string& name) const { return symbols.count(name) != 0; }

    /// Index of an object name, if known.
    std::optional<uint32_t> objectIndex(const std::string& objectName) const;

    /// Checks object count (<= 256), object references, and local address
    /// uniqueness per object. Throws ParseError on violation.
    void validate() const;
};

SymbolTable loadSymbolTable(const std::filesystem::path& path);
SymbolTable parseSymbolTable(const std::string& text, const std::string& sourceName = "<memory>");

/// Functions of the graph with no symbol in the table; the usual reading is
/// that the compiler inlined them at every call site.
NameSet inferInlined(const CallGraph& graph, const SymbolTable& symbols);

struct CompensationResult {
    SelectionSet selection;
    NameSet added;   // first non-inlined callers pulled in, minus prior members
    NameSet dropped; // inlined selections with no non-inlined caller at all
};

/// Removes selected-but-inlined functions, pulling in the first non-inlined
/// caller on every caller chain (cycle-safe). Idempotent.
CompensationResult compensateInlining(const CallGraph& graph, const SelectionSet& selection,
                                      const NameSet& inlined);

/// Selection statistics: counts before/after post-processing plus the
/// wall-clock time the selection took.
struct SelectionReport {
    size_t selectedPre = 0;
    size_t selected = 0;
    size_t added = 0;
    std::chrono::duration<double> elapsed{0};
    std::optional<size_t> graphSize; // enables percentage columns

    std::string toText() const;
    std::string toJson() const;
};

SelectionReport buildReport(const SelectionSet& pre, const SelectionSet& post,
                            const NameSet& added, std::chrono::duration<double> elapsed,
                            std::optional<size_t> graphSize = std::nullopt);

} // namespace capi

#endif // CAPI_POSTPROCESS_HPP
