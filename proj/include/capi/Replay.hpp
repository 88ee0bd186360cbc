// Copyright (c) 2026 The capi authors
// SPDX-License-Identifier: Apache-2.0
//
// Library side of the replay and bench workflows: everything the CLI does
// is reachable through these calls.

#ifndef CAPI_REPLAY_HPP
#define CAPI_REPLAY_HPP

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "capi/Backends.hpp"
#include "capi/PatchRuntime.hpp"

namespace capi {

/// One line of a trace file: `T<threadId> <enter|exit> <function> <ns>`.
struct TraceEvent {
    uint32_t threadId;
    SledKind kind;
    std::string function;
    int64_t timestampNs;
};

/// Parses a trace. Reports malformed lines with their line number and
/// rejects timestamps that go backwards within a thread.
std::vector<TraceEvent> parseTrace(const std::string& text,
                                   const std::string& sourceName = "<trace>");
std::vector<TraceEvent> loadTrace(const std::filesystem::path& path);

enum class BackendKind { Generic, Profile, Regions };

/// When the backend's init event fires during replay: right away, or on the
/// exit of a named function (the measurement library coming up inside an
/// init call).
enum class InitMode { Immediate, OnFunctionExit };

struct ReplayOptions {
    BackendKind backend = BackendKind::Generic;
    std::optional<std::filesystem::path> configPath; // else CAPI_FILTERING_FILE, else empty
    bool parallel = false;                           // one dispatch thread per trace thread
    InitMode initMode = InitMode::Immediate;
    std::string initFunction = "MPI_Init";
    ReportFormat format = ReportFormat::Text;
    uint64_t sledThreshold = 1;
};

struct ReplayResult {
    PatchReport patch;
    std::string report;
    BackendDiagnostics diagnostics;
    uint64_t invalidEvents = 0;
    uint64_t unresolvedSymbols = 0;
    std::vector<std::string> warnings; // registration-time diagnostics

    /// 0 clean, 1 when runtime diagnostics are present.
    int exitCode() const;
};

ReplayResult replay(const std::vector<ObjectLayout>& objects,
                    const std::vector<TraceEvent>& trace, const ReplayOptions& options);

struct BenchOptions {
    uint64_t repeat = 100; // trace is streamed this many times per phase
    uint64_t chunks = 5;   // phase is split into chunks; the best one counts
    uint64_t sledThreshold = 1;
};

struct BenchResult {
    uint64_t eventsPerPhase = 0;
    double nopEventsPerSec = 0.0;     // peak throughput over the chunks
    double patchedEventsPerSec = 0.0;
    double nopPerEventNs = 0.0;       // best-chunk per-event cost
    double patchedPerEventNs = 0.0;
    std::chrono::duration<double> nopElapsed{0};     // whole-phase totals
    std::chrono::duration<double> patchedElapsed{0};
    std::chrono::duration<double> applyElapsed{0};   // patching at startup
    uint64_t patchedFunctions = 0;
    uint64_t handlerInvocations = 0;

    /// Per-event cost of the NOP path relative to the patched path.
    double nopCostRatio() const;
    std::string toText() const;
};

/// Measures dispatch throughput with all sleds NOP, then patches every
/// resolvable function (timed) and measures again with a counting handler.
BenchResult bench(const std::vector<ObjectLayout>& objects,
                  const std::vector<TraceEvent>& trace, const BenchOptions& options);

} // namespace capi

#endif // CAPI_REPLAY_HPP
