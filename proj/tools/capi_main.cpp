// Copyright (c) 2026 The capi authors
// SPDX-License-Identifier: Apache-2.0
//
// capi: plan which functions to instrument, emit the config, and run a
// simulated patch-and-measure cycle against recorded traces.
//
//   capi select --cg app.cg.json --spec kernels.capi --symtab app.symtab.json --stats
//   capi replay --objects app.objects.json --trace run.trace --backend profile --ic app.filt
//   capi bench  --objects app.objects.json --trace run.trace --repeat 1000

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "capi/CallGraph.hpp"
#include "capi/Errors.hpp"
#include "capi/InstrumentationConfig.hpp"
#include "capi/Postprocess.hpp"
#include "capi/Replay.hpp"
#include "capi/Selectors.hpp"
#include "capi/SpecLang.hpp"

namespace {

struct SelectArgs {
    std::string cgPath;
    std::string specPath;
    std::string symtabPath;
    std::string outPath;
    std::string format = "scorep";
    bool stats = false;
    bool json = false;
    bool demangledComments = false;
    bool idHints = false;
    bool instances = false;
};

struct ReplayArgs {
    std::string objectsPath;
    std::string tracePath;
    std::string backend = "generic";
    std::string icPath;
    std::string initMode = "immediate";
    std::string initFunction = "MPI_Init";
    bool parallel = false;
    bool json = false;
    uint64_t xrayThreshold = 1;
};

struct BenchArgs {
    std::string objectsPath;
    std::string tracePath;
    uint64_t repeat = 100;
    uint64_t xrayThreshold = 1;
};

int runSelect(const SelectArgs& args) {
    const auto start = std::chrono::steady_clock::now();

    std::vector<std::string> warnings;
    const capi::CallGraph graph = capi::loadCallGraph(args.cgPath, &warnings);
    for (const auto& warning : warnings) {
        std::cerr << "warning: " << warning << "\n";
    }
    const capi::SelectorPipeline pipeline = capi::parseSpecFile(args.specPath);
    const capi::SelectionSet pre = capi::evaluate(pipeline, graph);

    capi::SelectionSet post = pre;
    capi::NameSet added;
    capi::NameSet dropped;
    std::optional<capi::SymbolTable> symtab;
    if (!args.symtabPath.empty()) {
        symtab = capi::loadSymbolTable(args.symtabPath);
        const capi::NameSet inlined = capi::inferInlined(graph, *symtab);
        capi::CompensationResult compensated = capi::compensateInlining(graph, pre, inlined);
        post = std::move(compensated.selection);
        added = std::move(compensated.added);
        dropped = std::move(compensated.dropped);
        for (const auto& name : dropped) {
            std::cerr << "warning: \"" << name
                      << "\" is inlined with no non-inlined caller; removed from the selection\n";
        }
    }
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;

    capi::InstrumentationConfig config;
    for (const auto& name : post.functions) {
        config.include.push_back(name);
        config.origin[name] =
            added.count(name) != 0 ? capi::Provenance::Compensation : capi::Provenance::Pipeline;
    }
    if (args.idHints) {
        if (!symtab) {
            throw capi::Error("--id-hints requires --symtab");
        }
        for (const auto& name : config.include) {
            auto it = symtab->symbols.find(name);
            if (it == symtab->symbols.end()) {
                continue;
            }
            const auto objectId = symtab->objectIndex(it->second.objectName);
            if (!objectId || it->second.localAddress % 16 != 0) {
                continue;
            }
            const uint64_t functionId = it->second.localAddress / 16;
            if (functionId > capi::kMaxFunctionId) {
                continue;
            }
            config.idHints[name] = capi::packId(*objectId, static_cast<uint32_t>(functionId));
        }
    }

    std::string emitted;
    if (args.format == "native") {
        emitted = capi::emitNativeConfig(config) + "\n";
    } else {
        std::map<std::string, std::string> demangled;
        if (args.demangledComments) {
            for (const auto& name : config.include) {
                if (const capi::FunctionNode* node = graph.find(name)) {
                    if (!node->demangledName.empty()) {
                        demangled[name] = node->demangledName;
                    }
                }
            }
        }
        emitted = capi::emitScorepFilter(config, demangled);
    }

    if (args.outPath.empty()) {
        std::cout << emitted;
    } else {
        std::ofstream out(args.outPath);
        if (!out) {
            throw capi::Error("cannot write config to " + args.outPath);
        }
        out << emitted;
    }

    if (args.instances) {
        std::cout << capi::formatInstancesReport(capi::instancesReport(pipeline, graph));
    }
    if (args.stats) {
        const capi::SelectionReport report =
            capi::buildReport(pre, post, added, elapsed, graph.nodeCount());
        std::cout << (args.json ? report.toJson() : report.toText());
    }
    return dropped.empty() ? 0 : 1;
}

int runReplay(const ReplayArgs& args) {
    const auto objects = capi::loadObjectLayouts(args.objectsPath);
    const auto trace = capi::loadTrace(args.tracePath);

    capi::ReplayOptions options;
    if (args.backend == "generic") {
        options.backend = capi::BackendKind::Generic;
    } else if (args.backend == "profile") {
        options.backend = capi::BackendKind::Profile;
    } else {
        options.backend = capi::BackendKind::Regions;
    }
    if (!args.icPath.empty()) {
        options.configPath = args.icPath;
    }
    options.parallel = args.parallel;
    options.initMode = args.initMode == "on-exit" ? capi::InitMode::OnFunctionExit
                                                  : capi::InitMode::Immediate;
    options.initFunction = args.initFunction;
    options.format = args.json ? capi::ReportFormat::Json : capi::ReportFormat::Text;
    options.sledThreshold = args.xrayThreshold;

    const capi::ReplayResult result = capi::replay(objects, trace, options);
    for (const auto& warning : result.warnings) {
        std::cerr << "warning: " << warning << "\n";
    }
    std::cout << result.patch.toText();
    std::cout << result.report;
    if (result.invalidEvents > 0) {
        std::cerr << "warning: " << result.invalidEvents << " event(s) had invalid ids\n";
    }
    return result.exitCode();
}

int runBench(const BenchArgs& args) {
    const auto objects = capi::loadObjectLayouts(args.objectsPath);
    const auto trace = capi::loadTrace(args.tracePath);
    capi::BenchOptions options;
    options.repeat = args.repeat;
    options.sledThreshold = args.xrayThreshold;
    const capi::BenchResult result = capi::bench(objects, trace, options);
    std::cout << result.toText();
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"capi: selective instrumentation planning and simulated patch runtime"};
    app.require_subcommand(1);

    SelectArgs selectArgs;
    CLI::App* select = app.add_subcommand(
        "select", "evaluate a selection spec against a call graph and emit a config");
    select->add_option("--cg", selectArgs.cgPath, "call-graph JSON file")->required();
    select->add_option("--spec", selectArgs.specPath, "selection spec (.capi)")->required();
    select->add_option("--symtab", selectArgs.symtabPath,
                       "symbol table JSON; enables inlining compensation");
    select->add_option("--out", selectArgs.outPath, "write the config here instead of stdout");
    select->add_option("--format", selectArgs.format, "output format")
        ->check(CLI::IsMember({"scorep", "native"}))
        ->capture_default_str();
    select->add_flag("--stats", selectArgs.stats, "print selection statistics");
    select->add_flag("--json", selectArgs.json, "machine-readable statistics");
    select->add_flag("--demangled", selectArgs.demangledComments,
                     "add demangled names as comments (scorep format)");
    select->add_flag("--id-hints", selectArgs.idHints,
                     "derive packed function ids from the symbol table (native format)");
    select->add_flag("--instances", selectArgs.instances, "print the per-instance cardinality table");

    ReplayArgs replayArgs;
    CLI::App* replay = app.add_subcommand(
        "replay", "register objects, patch per config, stream a trace through a backend");
    replay->add_option("--objects", replayArgs.objectsPath, "object layout fixture JSON")->required();
    replay->add_option("--trace", replayArgs.tracePath, "event trace file")->required();
    replay->add_option("--backend", replayArgs.backend, "measurement backend")
        ->check(CLI::IsMember({"generic", "profile", "regions"}))
        ->capture_default_str();
    replay->add_option("--ic", replayArgs.icPath,
                       "instrumentation config (default: $CAPI_FILTERING_FILE, else none)");
    replay->add_flag("--parallel", replayArgs.parallel, "dispatch each trace thread concurrently");
    replay->add_option("--init-mode", replayArgs.initMode, "backend init point")
        ->check(CLI::IsMember({"immediate", "on-exit"}))
        ->capture_default_str();
    replay->add_option("--init-function", replayArgs.initFunction,
                       "function whose exit triggers init (with --init-mode on-exit)")
        ->capture_default_str();
    replay->add_flag("--json", replayArgs.json, "machine-readable report");
    replay->add_option("--xray-threshold", replayArgs.xrayThreshold,
                       "withhold sleds for functions with fewer statements")
        ->capture_default_str();

    BenchArgs benchArgs;
    CLI::App* benchCmd = app.add_subcommand(
        "bench", "measure dispatch throughput unpatched vs fully patched");
    benchCmd->add_option("--objects", benchArgs.objectsPath, "object layout fixture JSON")->required();
    benchCmd->add_option("--trace", benchArgs.tracePath, "event trace file")->required();
    benchCmd->add_option("--repeat", benchArgs.repeat, "times to stream the trace per phase")
        ->capture_default_str();
    benchCmd->add_option("--xray-threshold", benchArgs.xrayThreshold,
                         "withhold sleds for functions with fewer statements")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (select->parsed()) {
            return runSelect(selectArgs);
        }
        if (replay->parsed()) {
            return runReplay(replayArgs);
        }
        return runBench(benchArgs);
    } catch (const capi::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
}
