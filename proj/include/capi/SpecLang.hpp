// Copyright (c) 2026 The capi authors
// SPDX-License-Identifier: Apache-2.0
//
// The selection specification language. A spec is a sequence of selector
// instances, named or anonymous:
//
//     !import("mpi.capi")
//     excluded = join(inSystemHeader(%%), inlineSpecified(%%))
//     kernels  = flops(">=", 10, loopDepth(">=", 1, %%))
//     join(subtract(%kernels, %excluded), %mpi_comm)
//
// '%name' references an earlier instance, '%%' is the set of all functions,
// and the last instance is the entry point of the pipeline. Nested calls are
// parsed into anonymous instances of their own; the argument keeps a
// reference so the structure round-trips through formatSpec().

#ifndef CAPI_SPECLANG_HPP
#define CAPI_SPECLANG_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace capi {

enum class SelectorKind {
    Universe,       // %%
    Alias,          // bare reference to another instance
    Join,           // union of inputs
    Subtract,       // set difference
    InSystemHeader, // filter: declared in a system header
    InlineSpecified,// filter: carries the inline keyword
    Flops,          // filter: flop count compared against a threshold
    LoopDepth,      // filter: loop depth compared against a threshold
    ByName,         // filter: name or demangled name matches a regex
    OnCallPathTo,   // on some call path from an entry point into the targets
    Coarse,         // prune sole-caller chain links
};

std::string_view selectorKindName(SelectorKind kind);

/// One argument of a selector instance.
struct Argument {
    enum class Type { String, Int, Compare, InstanceRef, UniverseRef };

    Type type;
    std::string text;     // String literal or Compare operator
    int64_t number = 0;   // Int
    size_t instance = 0;  // InstanceRef: index into the pipeline

    static Argument string(std::string s) { return {Type::String, std::move(s), 0, 0}; }
    static Argument integer(int64_t n) { return {Type::Int, {}, n, 0}; }
    static Argument compare(std::string op) { return {Type::Compare, std::move(op), 0, 0}; }
    static Argument ref(size_t index) { return {Type::InstanceRef, {}, 0, index}; }
    static Argument universe() { return {Type::UniverseRef, {}, 0, 0}; }

    bool operator==(const Argument&) const = default;
};

struct SelectorInstance {
    std::optional<std::string> name; // absent for anonymous instances
    SelectorKind kind;
    std::vector<Argument> args;

    /// Index of the instance this one was written inline inside of, when it
    /// originated from a nested expression.
    std::optional<size_t> hoistParent;

    /// Module name for instances spliced in by an !import directive.
    std::optional<std::string> importedFrom;
};

class SelectorPipeline {
public:
    std::vector<SelectorInstance> instances;

    bool empty() const { return instances.empty(); }

    /// The entry point: the last instance. Throws Error when empty.
    size_t entryIndex() const;
    const SelectorInstance& entry() const;

    /// An instance is top-level when no named instance occurs on its chain of
    /// enclosing expressions; statement-level instances qualify trivially.
    bool isTopLevel(size_t index) const;

    /// Display label: the name, or "<kind@index>" for anonymous instances.
    std::string displayName(size_t index) const;

    /// Structural comparison: names, kinds, and arguments (import origins are
    /// not part of the structure).
    bool structurallyEqual(const SelectorPipeline& other) const;
};

struct ImportedModule;
using ImportResolver = std::function<std::optional<ImportedModule>(const std::string& name)>;

/// Resolved import: `key` identifies the module (canonical path for file
/// resolvers) so that repeated and diamond imports are spliced only once.
/// `subResolver`, when set, resolves the module's own imports (file
/// resolvers use the module's directory).
struct ImportedModule {
    std::string key;
    std::string text;
    ImportResolver subResolver;
};

/// Parses a specification. Import directives are expanded in place via
/// `resolver`; without one, any !import fails. Reports lexical and semantic
/// errors as ParseError with line/column.
SelectorPipeline parseSpec(std::string_view source, const ImportResolver& resolver = {},
                           const std::string& sourceName = "<spec>");

/// Parses a .capi file, resolving imports against the file's directory and
/// then the colon-separated CAPI_SPEC_PATH search path.
SelectorPipeline parseSpecFile(const std::filesystem::path& path);

/// Import resolver over the filesystem: `baseDir` first, then CAPI_SPEC_PATH.
ImportResolver makeFileImportResolver(std::filesystem::path baseDir);

/// Canonical text form. parseSpec(formatSpec(p)) is structurally equal to p.
std::string formatSpec(const SelectorPipeline& pipeline);

} // namespace capi

#endif // CAPI_SPECLANG_HPP
