// Copyright (c) 2026 The capi authors
// SPDX-License-Identifier: Apache-2.0

#include "capi/Replay.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <sstream>
#include <thread>

#include "capi/Errors.hpp"

namespace capi {

namespace {

struct ResolvedEvent {
    PackedId packedId;
    SledKind kind;
    uint32_t threadId;
    int64_t timestampNs;
    std::string function; // trace-side name, kept for init triggers
};

/// Maps trace function names onto packed ids. Functions a fixture defines
/// but the ingestion filtered out (sled threshold) are dropped silently:
/// the program ran them, no sled fired. Unknown names are input errors.
std::vector<ResolvedEvent> resolveTrace(const std::vector<ObjectLayout>& objects,
                                        const std::vector<TraceEvent>& trace,
                                        const FixtureIndex& fixture) {
    NameSet known;
    for (const auto& layout : objects) {
        for (const auto& function : layout.functions) {
            known.insert(function.name);
        }
    }
    std::vector<ResolvedEvent> resolved;
    resolved.reserve(trace.size());
    for (const auto& event : trace) {
        auto it = fixture.packedByName.find(event.function);
        if (it == fixture.packedByName.end()) {
            if (known.count(event.function) != 0) {
                continue; // no sled was emitted for it
            }
            throw ParseError("trace references unknown function \"" + event.function + "\"");
        }
        resolved.push_back(
            ResolvedEvent{it->second, event.kind, event.threadId, event.timestampNs, event.function});
    }
    return resolved;
}

IdentityResolver makeResolver(const RuntimeRegistry& registry,
                              std::map<std::string, std::string> demangled) {
    return [&registry, demangled = std::move(demangled)](PackedId packedId) {
        const ResolvedFunction raw = registry.resolve(packedId);
        FunctionIdentity identity;
        identity.address = raw.address;
        identity.name = raw.name;
        if (raw.name) {
            auto it = demangled.find(*raw.name);
            if (it != demangled.end()) {
                identity.demangled = it->second;
            }
        }
        return identity;
    };
}

std::unique_ptr<Backend> makeBackend(BackendKind kind, IdentityResolver resolver) {
    switch (kind) {
    case BackendKind::Generic:
        return std::make_unique<GenericLogHandler>(std::move(resolver));
    case BackendKind::Profile:
        return std::make_unique<CallTreeProfiler>(std::move(resolver));
    case BackendKind::Regions:
        return std::make_unique<RegionMonitor>(std::move(resolver));
    }
    throw Error("unknown backend kind");
}

} // namespace

std::vector<TraceEvent> parseTrace(const std::string& text, const std::string& sourceName) {
    std::vector<TraceEvent> events;
    std::map<uint32_t, int64_t> lastTimestamp;
    std::istringstream in(text);
    std::string line;
    int lineNo = 0;
    while (std::getline(in, line)) {
        ++lineNo;
        const auto where = sourceName + ":" + std::to_string(lineNo);
        const auto firstChar = line.find_first_not_of(" \t\r");
        if (firstChar == std::string::npos || line[firstChar] == '#') {
            continue;
        }
        std::istringstream fields(line);
        std::string threadTok, kindTok, name, timeTok, extra;
        fields >> threadTok >> kindTok >> name >> timeTok;
        if (timeTok.empty()) {
            throw ParseError(where + ": expected \"T<thread> <enter|exit> <function> <timestamp-ns>\"");
        }
        if (fields >> extra) {
            throw ParseError(where + ": unexpected trailing token \"" + extra + "\"");
        }
        if (threadTok.size() < 2 || threadTok[0] != 'T' ||
            threadTok.find_first_not_of("0123456789", 1) != std::string::npos) {
            throw ParseError(where + ": malformed thread id \"" + threadTok + "\"");
        }
        TraceEvent event;
        event.threadId = static_cast<uint32_t>(std::stoul(threadTok.substr(1)));
        if (kindTok == "enter") {
            event.kind = SledKind::Entry;
        } else if (kindTok == "exit") {
            event.kind = SledKind::Exit;
        } else {
            throw ParseError(where + ": expected \"enter\" or \"exit\", got \"" + kindTok + "\"");
        }
        event.function = name;
        try {
            event.timestampNs = std::stoll(timeTok);
        } catch (const std::exception&) {
            throw ParseError(where + ": malformed timestamp \"" + timeTok + "\"");
        }
        auto [it, inserted] = lastTimestamp.emplace(event.threadId, event.timestampNs);
        if (!inserted) {
            if (event.timestampNs < it->second) {
                throw ParseError(where + ": timestamps go backwards within thread " +
                                 std::to_string(event.threadId));
            }
            it->second = event.timestampNs;
        }
        events.push_back(std::move(event));
    }
    return events;
}

std::vector<TraceEvent> loadTrace(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open trace file: " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parseTrace(buffer.str(), path.string());
}

int ReplayResult::exitCode() const {
    const bool diagnosticsPresent = !patch.notFound.empty() ||
                                    diagnostics.failedRegistrations > 0 ||
                                    diagnostics.droppedEvents > 0 || invalidEvents > 0;
    return diagnosticsPresent ? 1 : 0;
}

ReplayResult replay(const std::vector<ObjectLayout>& objects,
                    const std::vector<TraceEvent>& trace, const ReplayOptions& options) {
    if (options.parallel && options.initMode != InitMode::Immediate) {
        throw Error("parallel replay requires immediate backend init");
    }

    RuntimeRegistry registry;
    const FixtureIndex fixture = registerObjectLayouts(registry, objects, options.sledThreshold);

    InstrumentationConfig config;
    if (options.configPath) {
        config = loadConfigFile(*options.configPath);
    } else if (const char* env = std::getenv("CAPI_FILTERING_FILE")) {
        config = loadConfigFile(env);
    }

    ReplayResult result;
    result.patch = registry.applyConfig(config);

    std::unique_ptr<Backend> backend =
        makeBackend(options.backend, makeResolver(registry, fixture.demangledByName));
    registry.setHandler(backend.get());
    if (options.initMode == InitMode::Immediate) {
        backend->initialize();
    }

    const std::vector<ResolvedEvent> events = resolveTrace(objects, trace, fixture);

    if (options.parallel) {
        std::map<uint32_t, std::vector<const ResolvedEvent*>> perThread;
        for (const auto& event : events) {
            perThread[event.threadId].push_back(&event);
        }
        std::vector<std::thread> workers;
        std::mutex errorMutex;
        std::exception_ptr firstError;
        for (auto& [threadId, threadEvents] : perThread) {
            workers.emplace_back([&registry, &errorMutex, &firstError,
                                  threadEvents = std::move(threadEvents)] {
                try {
                    for (const ResolvedEvent* event : threadEvents) {
                        registry.dispatch(event->packedId, event->kind, event->threadId,
                                          event->timestampNs);
                    }
                } catch (...) {
                    std::lock_guard<std::mutex> lock(errorMutex);
                    if (!firstError) {
                        firstError = std::current_exception();
                    }
                }
            });
        }
        for (auto& worker : workers) {
            worker.join();
        }
        if (firstError) {
            std::rethrow_exception(firstError);
        }
    } else {
        for (const auto& event : events) {
            registry.dispatch(event.packedId, event.kind, event.threadId, event.timestampNs);
            if (options.initMode == InitMode::OnFunctionExit && !backend->initialized() &&
                event.kind == SledKind::Exit && event.function == options.initFunction) {
                backend->initialize();
            }
        }
    }

    result.report = backend->finish(options.format);
    result.diagnostics = backend->diagnostics();
    result.invalidEvents = registry.invalidEvents();
    result.unresolvedSymbols = registry.unresolvedSymbols();
    result.warnings = registry.warnings();
    return result;
}

double BenchResult::nopCostRatio() const {
    if (patchedPerEventNs <= 0.0) {
        return 0.0;
    }
    return nopPerEventNs / patchedPerEventNs;
}

std::string BenchResult::toText() const {
    std::ostringstream out;
    out << std::fixed;
    out << "events per phase:      " << eventsPerPhase << "\n";
    out << "all-NOP dispatch:      " << std::setprecision(0) << nopEventsPerSec << " events/s ("
        << std::setprecision(2) << nopPerEventNs << " ns/event, total " << std::setprecision(6)
        << nopElapsed.count() << "s)\n";
    out << "all-PATCHED dispatch:  " << std::setprecision(0) << patchedEventsPerSec
        << " events/s (" << std::setprecision(2) << patchedPerEventNs << " ns/event, total "
        << std::setprecision(6) << patchedElapsed.count() << "s)\n";
    out << "nop/patched cost:      " << std::setprecision(4) << nopCostRatio() << "\n";
    out << "apply config:          " << patchedFunctions << " function(s) in "
        << std::setprecision(6) << applyElapsed.count() << "s\n";
    out << "handler invocations:   " << handlerInvocations << "\n";
    return out.str();
}

BenchResult bench(const std::vector<ObjectLayout>& objects, const std::vector<TraceEvent>& trace,
                  const BenchOptions& options) {
    using Clock = std::chrono::steady_clock;

    RuntimeRegistry registry;
    const FixtureIndex fixture = registerObjectLayouts(registry, objects, options.sledThreshold);
    const std::vector<ResolvedEvent> resolved = resolveTrace(objects, trace, fixture);

    // Compact copy for the measurement loops.
    struct BenchEvent {
        PackedId packedId;
        SledKind kind;
        uint32_t threadId;
        int64_t timestampNs;
    };
    std::vector<BenchEvent> events;
    events.reserve(resolved.size());
    for (const auto& event : resolved) {
        events.push_back(BenchEvent{event.packedId, event.kind, event.threadId, event.timestampNs});
    }

    uint32_t slots = 0;
    for (const auto& layout : objects) {
        slots = std::max(slots, static_cast<uint32_t>(layout.functions.size()));
    }
    CountingHandler counter(slots);
    registry.setHandler(&counter);

    BenchResult result;
    result.eventsPerPhase = events.size() * options.repeat;

    // Each phase streams the trace `repeat` times, split into chunks; the
    // fastest chunk gives the per-event cost, which shrugs off scheduler
    // noise on shared machines.
    const uint64_t chunks = std::max<uint64_t>(1, std::min(options.chunks, options.repeat));
    auto runPhase = [&](double& perEventNs, std::chrono::duration<double>& total) {
        const uint64_t perChunk = options.repeat / chunks;
        const uint64_t remainder = options.repeat % chunks;
        double bestSeconds = 0.0;
        uint64_t bestEvents = 0;
        std::chrono::duration<double> sum{0};
        for (uint64_t c = 0; c < chunks; ++c) {
            const uint64_t iterations = perChunk + (c < remainder ? 1 : 0);
            if (iterations == 0) {
                continue;
            }
            const auto start = Clock::now();
            for (uint64_t i = 0; i < iterations; ++i) {
                for (const auto& event : events) {
                    registry.dispatch(event.packedId, event.kind, event.threadId,
                                      event.timestampNs);
                }
            }
            const std::chrono::duration<double> elapsed = Clock::now() - start;
            sum += elapsed;
            const uint64_t chunkEvents = iterations * events.size();
            if (bestEvents == 0 || elapsed.count() * bestEvents < bestSeconds * chunkEvents) {
                bestSeconds = elapsed.count();
                bestEvents = chunkEvents;
            }
        }
        total = sum;
        perEventNs = bestEvents > 0 ? bestSeconds / static_cast<double>(bestEvents) * 1e9 : 0.0;
    };

    runPhase(result.nopPerEventNs, result.nopElapsed);

    // Patch everything that resolved, timed: the startup cost of applying
    // a config of that size.
    InstrumentationConfig config;
    for (const auto& [name, packed] : fixture.packedByName) {
        if (registry.lookup(name)) {
            config.include.push_back(name);
        }
    }
    const auto applyStart = Clock::now();
    const PatchReport patch = registry.applyConfig(config);
    result.applyElapsed = Clock::now() - applyStart;
    result.patchedFunctions = patch.patched;

    runPhase(result.patchedPerEventNs, result.patchedElapsed);

    result.handlerInvocations = counter.total();
    result.nopEventsPerSec = result.nopPerEventNs > 0.0 ? 1e9 / result.nopPerEventNs : 0.0;
    result.patchedEventsPerSec =
        result.patchedPerEventNs > 0.0 ? 1e9 / result.patchedPerEventNs : 0.0;
    return result;
}

} // namespace capi
