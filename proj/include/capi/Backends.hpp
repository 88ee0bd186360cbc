// Copyright (c) 2026 The capi authors
// SPDX-License-Identifier: Apache-2.0
//
// Measurement backends fed by the patch runtime: a generic enter/exit log,
// a call-tree profiler, and a region monitor aggregating start/stop
// intervals per named region.

#ifndef CAPI_BACKENDS_HPP
#define CAPI_BACKENDS_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "capi/PatchRuntime.hpp"

namespace capi {

/// Maps a packed id to an address plus display names. Backends never talk
/// to the registry directly; replay wires this up.
struct FunctionIdentity {
    uint64_t address = 0;
    std::optional<std::string> name;
    std::optional<std::string> demangled;
};

using IdentityResolver = std::function<FunctionIdentity(PackedId)>;

/// Demangled name when available, else the symbol name, else unknown@addr.
std::string displayName(const FunctionIdentity& identity);

struct BackendDiagnostics {
    uint64_t failedRegistrations = 0;
    std::vector<std::string> failedRegistrationNames; // sorted, unique
    uint64_t droppedEvents = 0;
};

enum class ReportFormat { Text, Json };

/// Common backend shape: an event handler with an explicit lifecycle.
/// initialize() twice or finish() twice is an error; finish() renders the
/// report exactly once.
class Backend : public EventHandler {
public:
    virtual void initialize();
    virtual std::string finish(ReportFormat format = ReportFormat::Text) = 0;
    virtual BackendDiagnostics diagnostics() const = 0;
    bool initialized() const { return initialized_; }

protected:
    void requireNotFinished();
    bool initialized_ = false;
    bool finished_ = false;
};

// ---------------------------------------------------------------------------
// Generic handler: an append-only event log keyed by resolved address, in
// the spirit of the __cyg_profile_func_enter/exit interface.

class GenericLogHandler : public Backend {
public:
    explicit GenericLogHandler(IdentityResolver resolver);

    void onEvent(const Event& event) override;
    std::string finish(ReportFormat format = ReportFormat::Text) override;
    BackendDiagnostics diagnostics() const override;

    struct Entry {
        uint32_t threadId;
        SledKind kind;
        uint64_t address;
        std::string display;
        int64_t timestampNs;
    };
    const std::vector<Entry>& log() const { return log_; }

private:
    IdentityResolver resolver_;
    std::vector<Entry> log_;
    uint64_t unresolved_ = 0;
    mutable std::mutex mutex_;
};

// ---------------------------------------------------------------------------
// Call-tree profiler: per (thread, call path) call counts plus inclusive
// and exclusive times. Requires well-nested enter/exit events per thread.

struct ProfileRecord {
    uint64_t callCount = 0;
    int64_t inclusiveNs = 0;
    int64_t exclusiveNs = 0;

    bool operator==(const ProfileRecord&) const = default;
};

struct ProfileReport {
    // path components joined with '/'
    std::map<uint32_t, std::map<std::string, ProfileRecord>> perThread;
    std::map<std::string, ProfileRecord> merged;

    std::string toText() const;
    std::string toJson() const;

    /// Function names occurring anywhere in the recorded paths.
    NameSet functions() const;
};

class CallTreeProfiler : public Backend {
public:
    explicit CallTreeProfiler(IdentityResolver resolver);

    /// Throws TraceError naming the offending function on unbalanced input.
    void onEvent(const Event& event) override;
    std::string finish(ReportFormat format = ReportFormat::Text) override;
    ProfileReport report(); // same finish-once semantics, structured form
    BackendDiagnostics diagnostics() const override;

private:
    struct PathNode {
        std::map<std::string, PathNode> children;
        uint64_t callCount = 0;
        int64_t inclusiveNs = 0;
    };
    struct OpenFrame {
        PathNode* node;
        std::string function;
        int64_t enteredAt;
    };
    struct ThreadState {
        PathNode root;
        std::vector<OpenFrame> stack;
    };

    ProfileReport buildReport();

    IdentityResolver resolver_;
    std::map<uint32_t, ThreadState> threads_;
    std::optional<ProfileReport> finishedReport_;
    mutable std::mutex mutex_;
};

// ---------------------------------------------------------------------------
// Region monitor: named start/stop regions, nesting and overlap permitted.
// Region registration requires the backend to be initialized; earlier
// starts are counted as failed registrations, never a crash.

struct RegionHandle {
    size_t index = SIZE_MAX;
    bool valid() const { return index != SIZE_MAX; }
};

struct RegionReport {
    struct Row {
        std::string name;
        uint64_t entries = 0;
        int64_t elapsedNs = 0;
        double meanNs = 0.0;
        uint64_t openAtFinish = 0;
    };
    std::vector<Row> rows; // sorted by name
    BackendDiagnostics diag;
    uint64_t openRegionsAtFinish = 0;

    std::string toText() const;
    std::string toJson() const;

    NameSet regionNames() const;
};

class RegionMonitor : public Backend {
public:
    explicit RegionMonitor(IdentityResolver resolver);

    /// Handle API, mirroring an explicit region-monitoring interface.
    /// Pre-init registration fails (invalid handle, diagnostic counted).
    RegionHandle registerRegion(const std::string& name);
    void start(RegionHandle handle, uint32_t threadId, int64_t timestampNs);
    void stop(RegionHandle handle, uint32_t threadId, int64_t timestampNs);

    /// Event adapter: entry auto-registers and starts, exit stops.
    void onEvent(const Event& event) override;

    std::string finish(ReportFormat format = ReportFormat::Text) override;
    RegionReport report();
    BackendDiagnostics diagnostics() const override;

private:
    struct PerThread {
        int nesting = 0;
        int64_t openedAt = 0;
        uint64_t entries = 0;
        int64_t elapsedNs = 0;
    };
    struct Region {
        std::string name;
        std::map<uint32_t, PerThread> threads;
    };

    RegionHandle registerLocked(const std::string& name);
    void startLocked(size_t index, uint32_t threadId, int64_t timestampNs);
    void stopByNameLocked(const std::string& name, uint32_t threadId, int64_t timestampNs);
    RegionReport buildReport();

    IdentityResolver resolver_;
    std::vector<Region> regions_;
    std::map<std::string, size_t> regionIndex_;
    std::set<std::string> failedRegistrations_;
    uint64_t unmatchedStops_ = 0;
    std::optional<RegionReport> finishedReport_;
    mutable std::mutex mutex_;
};

// ---------------------------------------------------------------------------
// Counting handler for throughput measurements. Keeps what a minimal
// counting backend keeps: per-function entry/exit counts with the last-seen
// timestamp, and per-thread event totals (sharded so threads do not fight
// over one counter).

class CountingHandler : public EventHandler {
public:
    explicit CountingHandler(size_t functionSlots);

    void onEvent(const Event& event) override;

    uint64_t total() const;
    uint64_t countFor(uint32_t functionId) const; // entries + exits
    uint64_t threadTotal(uint32_t threadId) const;
    int64_t lastTimestamp(uint32_t functionId) const;

private:
    static constexpr size_t kThreadShards = 64;

    struct Slot {
        std::atomic<uint64_t> entries{0};
        std::atomic<uint64_t> exits{0};
        std::atomic<int64_t> lastTimestampNs{0};
    };

    std::vector<Slot> slots_;
    std::array<std::atomic<uint64_t>, kThreadShards> threadTotals_{};
    std::atomic<uint64_t> overflow_{0}; // ids beyond the slot table
};

} // namespace capi

#endif // CAPI_BACKENDS_HPP
