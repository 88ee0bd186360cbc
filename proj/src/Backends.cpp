// Copyright (c) 2026 The capi authors
// SPDX-License-Identifier: Apache-2.0

#include "capi/Backends.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "capi/Errors.hpp"

namespace capi {

namespace {

std::string hexAddress(uint64_t address) {
    std::ostringstream out;
    out << "0x" << std::hex << address;
    return out.str();
}

nlohmann::ordered_json diagnosticsJson(const BackendDiagnostics& diag) {
    nlohmann::ordered_json doc;
    doc["failed_registrations"] = diag.failedRegistrations;
    doc["failed_registration_names"] = diag.failedRegistrationNames;
    doc["dropped_events"] = diag.droppedEvents;
    return doc;
}

std::string diagnosticsText(const BackendDiagnostics& diag) {
    std::ostringstream out;
    out << "diagnostics: failed_registrations=" << diag.failedRegistrations;
    if (!diag.failedRegistrationNames.empty()) {
        out << " (";
        for (size_t i = 0; i < diag.failedRegistrationNames.size(); ++i) {
            out << (i == 0 ? "" : ", ") << diag.failedRegistrationNames[i];
        }
        out << ")";
    }
    out << ", dropped_events=" << diag.droppedEvents << "\n";
    return out.str();
}

} // namespace

std::string displayName(const FunctionIdentity& identity) {
    if (identity.demangled && !identity.demangled->empty()) {
        return *identity.demangled;
    }
    if (identity.name && !identity.name->empty()) {
        return *identity.name;
    }
    return "unknown@" + hexAddress(identity.address);
}

void Backend::initialize() {
    if (initialized_) {
        throw Error("backend initialized twice");
    }
    initialized_ = true;
}

void Backend::requireNotFinished() {
    if (finished_) {
        throw Error("backend finish called twice");
    }
    finished_ = true;
}

// ---------------------------------------------------------------------------
// GenericLogHandler

GenericLogHandler::GenericLogHandler(IdentityResolver resolver) : resolver_(std::move(resolver)) {}

void GenericLogHandler::onEvent(const Event& event) {
    FunctionIdentity identity = resolver_(event.packedId);
    std::lock_guard<std::mutex> lock(mutex_);
    if (!identity.name && !identity.demangled) {
        ++unresolved_;
    }
    log_.push_back(Entry{event.threadId, event.kind, identity.address, displayName(identity),
                         event.timestampNs});
}

std::string GenericLogHandler::finish(ReportFormat format) {
    std::lock_guard<std::mutex> lock(mutex_);
    requireNotFinished();
    if (format == ReportFormat::Json) {
        nlohmann::ordered_json events = nlohmann::ordered_json::array();
        for (const auto& entry : log_) {
            nlohmann::ordered_json e;
            e["thread"] = entry.threadId;
            e["kind"] = entry.kind == SledKind::Entry ? "enter" : "exit";
            e["address"] = entry.address;
            e["function"] = entry.display;
            e["timestamp_ns"] = entry.timestampNs;
            events.push_back(std::move(e));
        }
        nlohmann::ordered_json doc;
        doc["events"] = std::move(events);
        doc["unresolved"] = unresolved_;
        return doc.dump(2) + "\n";
    }
    std::ostringstream out;
    for (const auto& entry : log_) {
        out << "T" << entry.threadId << " " << (entry.kind == SledKind::Entry ? "enter" : "exit")
            << " " << entry.display << " " << hexAddress(entry.address) << " " << entry.timestampNs
            << "\n";
    }
    if (unresolved_ > 0) {
        out << "# " << unresolved_ << " event(s) had no resolvable name\n";
    }
    return out.str();
}

BackendDiagnostics GenericLogHandler::diagnostics() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return BackendDiagnostics{};
}

// ---------------------------------------------------------------------------
// CallTreeProfiler

CallTreeProfiler::CallTreeProfiler(IdentityResolver resolver) : resolver_(std::move(resolver)) {}

void CallTreeProfiler::onEvent(const Event& event) {
    const std::string function = displayName(resolver_(event.packedId));
    std::lock_guard<std::mutex> lock(mutex_);
    ThreadState& thread = threads_[event.threadId];
    if (event.kind == SledKind::Entry) {
        PathNode* parent = thread.stack.empty() ? &thread.root : thread.stack.back().node;
        PathNode* node = &parent->children[function];
        thread.stack.push_back(OpenFrame{node, function, event.timestampNs});
        return;
    }
    if (thread.stack.empty()) {
        throw TraceError("exit without matching enter: " + function + " (thread " +
                         std::to_string(event.threadId) + ")");
    }
    OpenFrame frame = thread.stack.back();
    if (frame.function != function) {
        throw TraceError("unbalanced exit: expected " + frame.function + ", got " + function +
                         " (thread " + std::to_string(event.threadId) + ")");
    }
    thread.stack.pop_back();
    frame.node->callCount += 1;
    frame.node->inclusiveNs += event.timestampNs - frame.enteredAt;
}

ProfileReport CallTreeProfiler::buildReport() {
    for (const auto& [threadId, thread] : threads_) {
        if (!thread.stack.empty()) {
            throw TraceError("unclosed function at finish: " + thread.stack.back().function +
                             " (thread " + std::to_string(threadId) + ")");
        }
    }
    ProfileReport report;
    for (const auto& [threadId, thread] : threads_) {
        auto& rows = report.perThread[threadId];
        // Exclusive time falls out of the tree: inclusive minus the children.
        std::function<void(const PathNode&, const std::string&)> walk =
            [&](const PathNode& node, const std::string& prefix) {
                for (const auto& [function, child] : node.children) {
                    const std::string path = prefix.empty() ? function : prefix + "/" + function;
                    int64_t childrenInclusive = 0;
                    for (const auto& [grandName, grand] : child.children) {
                        childrenInclusive += grand.inclusiveNs;
                    }
                    rows[path] = ProfileRecord{child.callCount, child.inclusiveNs,
                                               child.inclusiveNs - childrenInclusive};
                    walk(child, path);
                }
            };
        walk(thread.root, "");
    }
    for (const auto& [threadId, rows] : report.perThread) {
        for (const auto& [path, record] : rows) {
            ProfileRecord& merged = report.merged[path];
            merged.callCount += record.callCount;
            merged.inclusiveNs += record.inclusiveNs;
            merged.exclusiveNs += record.exclusiveNs;
        }
    }
    return report;
}

ProfileReport CallTreeProfiler::report() {
    std::lock_guard<std::mutex> lock(mutex_);
    if (!finishedReport_) {
        finishedReport_ = buildReport();
    }
    return *finishedReport_;
}

std::string CallTreeProfiler::finish(ReportFormat format) {
    ProfileReport result = report();
    std::lock_guard<std::mutex> lock(mutex_);
    requireNotFinished();
    return format == ReportFormat::Json ? result.toJson() : result.toText();
}

BackendDiagnostics CallTreeProfiler::diagnostics() const { return BackendDiagnostics{}; }

NameSet ProfileReport::functions() const {
    NameSet names;
    for (const auto& [path, record] : merged) {
        size_t start = 0;
        while (start <= path.size()) {
            size_t end = path.find('/', start);
            if (end == std::string::npos) {
                end = path.size();
            }
            if (end > start) {
                names.insert(path.substr(start, end - start));
            }
            start = end + 1;
        }
    }
    return names;
}

std::string ProfileReport::toText() const {
    std::ostringstream out;
    auto table = [&](const std::map<std::string, ProfileRecord>& rows, const std::string& title) {
        out << "== " << title << " ==\n";
        size_t pathWidth = 4;
        for (const auto& [path, record] : rows) {
            pathWidth = std::max(pathWidth, path.size());
        }
        out << std::left << std::setw(static_cast<int>(pathWidth + 2)) << "path"
            << std::right << std::setw(8) << "calls" << std::setw(14) << "inclusive_ns"
            << std::setw(14) << "exclusive_ns" << "\n";
        for (const auto& [path, record] : rows) {
            out << std::left << std::setw(static_cast<int>(pathWidth + 2)) << path << std::right
                << std::setw(8) << record.callCount << std::setw(14) << record.inclusiveNs
                << std::setw(14) << record.exclusiveNs << "\n";
        }
    };
    table(merged, "profile (merged)");
    for (const auto& [threadId, rows] : perThread) {
        table(rows, "thread " + std::to_string(threadId));
    }
    return out.str();
}

std::string ProfileReport::toJson() const {
    nlohmann::ordered_json doc;
    auto rowsJson = [](const std::map<std::string, ProfileRecord>& rows) {
        nlohmann::ordered_json out;
        for (const auto& [path, record] : rows) {
            out[path] = {{"calls", record.callCount},
                         {"inclusive_ns", record.inclusiveNs},
                         {"exclusive_ns", record.exclusiveNs}};
        }
        return out;
    };
    doc["merged"] = rowsJson(merged);
    nlohmann::ordered_json threads;
    for (const auto& [threadId, rows] : perThread) {
        threads[std::to_string(threadId)] = rowsJson(rows);
    }
    doc["threads"] = std::move(threads);
    return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// RegionMonitor

RegionMonitor::RegionMonitor(IdentityResolver resolver) : resolver_(std::move(resolver)) {}

RegionHandle RegionMonitor::registerLocked(const std::string& name) {
    auto it = regionIndex_.find(name);
    if (it != regionIndex_.end()) {
        return RegionHandle{it->second};
    }
    regions_.push_back(Region{name, {}});
    regionIndex_.emplace(name, regions_.size() - 1);
    return RegionHandle{regions_.size() - 1};
}

RegionHandle RegionMonitor::registerRegion(const std::string& name) {
    std::lock_guard<std::mutex> lock(mutex_);
    if (!initialized_) {
        failedRegistrations_.insert(name);
        return RegionHandle{};
    }
    return registerLocked(name);
}

void RegionMonitor::startLocked(size_t index, uint32_t threadId, int64_t timestampNs) {
    PerThread& state = regions_[index].threads[threadId];
    if (++state.nesting == 1) {
        state.openedAt = timestampNs;
    }
}

void RegionMonitor::start(RegionHandle handle, uint32_t threadId, int64_t timestampNs) {
    std::lock_guard<std::mutex> lock(mutex_);
    if (!handle.valid() || handle.index >= regions_.size()) {
        ++unmatchedStops_; // counted with the other dropped operations
        return;
    }
    startLocked(handle.index, threadId, timestampNs);
}

void RegionMonitor::stopByNameLocked(const std::string& name, uint32_t threadId,
                                     int64_t timestampNs) {
    auto it = regionIndex_.find(name);
    if (it == regionIndex_.end()) {
        ++unmatchedStops_;
        return;
    }
    PerThread& state = regions_[it->second].threads[threadId];
    if (state.nesting == 0) {
        ++unmatchedStops_;
        return;
    }
    if (--state.nesting == 0) {
        state.elapsedNs += timestampNs - state.openedAt;
        state.entries += 1;
    }
}

void RegionMonitor::stop(RegionHandle handle, uint32_t threadId, int64_t timestampNs) {
    std::lock_guard<std::mutex> lock(mutex_);
    if (!handle.valid() || handle.index >= regions_.size()) {
        ++unmatchedStops_;
        return;
    }
    stopByNameLocked(regions_[handle.index].name, threadId, timestampNs);
}

void RegionMonitor::onEvent(const Event& event) {
    const std::string name = displayName(resolver_(event.packedId));
    std::lock_guard<std::mutex> lock(mutex_);
    if (event.kind == SledKind::Entry) {
        if (!initialized_) {
            // The measurement library is not up yet; the region cannot be
            // registered and the interval is lost, but this is not an error.
            failedRegistrations_.insert(name);
            return;
        }
        RegionHandle handle = registerLocked(name);
        startLocked(handle.index, event.threadId, event.timestampNs);
        return;
    }
    stopByNameLocked(name, event.threadId, event.timestampNs);
}

RegionReport RegionMonitor::buildReport() {
    RegionReport report;
    for (const auto& region : regions_) {
        RegionReport::Row row;
        row.name = region.name;
        for (const auto& [threadId, state] : region.threads) {
            row.entries += state.entries;
            row.elapsedNs += state.elapsedNs;
            row.openAtFinish += static_cast<uint64_t>(state.nesting > 0 ? 1 : 0);
        }
        row.meanNs = row.entries == 0
                         ? 0.0
                         : static_cast<double>(row.elapsedNs) / static_cast<double>(row.entries);
        report.openRegionsAtFinish += row.openAtFinish;
        report.rows.push_back(std::move(row));
    }
    std::sort(report.rows.begin(), report.rows.end(),
              [](const RegionReport::Row& a, const RegionReport::Row& b) { return a.name < b.name; });
    report.diag.failedRegistrations = failedRegistrations_.size();
    report.diag.failedRegistrationNames.assign(failedRegistrations_.begin(),
                                               failedRegistrations_.end());
    report.diag.droppedEvents = unmatchedStops_;
    return report;
}

RegionReport RegionMonitor::report() {
    std::lock_guard<std::mutex> lock(mutex_);
    if (!finishedReport_) {
        finishedReport_ = buildReport();
    }
    return *finishedReport_;
}

std::string RegionMonitor::finish(ReportFormat format) {
    RegionReport result = report();
    std::lock_guard<std::mutex> lock(mutex_);
    requireNotFinished();
    return format == ReportFormat::Json ? result.toJson() : result.toText();
}

BackendDiagnostics RegionMonitor::diagnostics() const {
    std::lock_guard<std::mutex> lock(mutex_);
    BackendDiagnostics diag;
    diag.failedRegistrations = failedRegistrations_.size();
    diag.failedRegistrationNames.assign(failedRegistrations_.begin(), failedRegistrations_.end());
    diag.droppedEvents = unmatchedStops_;
    return diag;
}

NameSet RegionReport::regionNames() const {
    NameSet names;
    for (const auto& row : rows) {
        names.insert(row.name);
    }
    return names;
}

std::string RegionReport::toText() const {
    std::ostringstream out;
    size_t nameWidth = 6;
    for (const auto& row : rows) {
        nameWidth = std::max(nameWidth, row.name.size());
    }
    out << std::left << std::setw(static_cast<int>(nameWidth + 2)) << "region" << std::right
        << std::setw(9) << "entries" << std::setw(13) << "elapsed_ns" << std::setw(13) << "mean_ns"
        << "\n";
    for (const auto& row : rows) {
        out << std::left << std::setw(static_cast<int>(nameWidth + 2)) << row.name << std::right
            << std::setw(9) << row.entries << std::setw(13) << row.elapsedNs << std::setw(13)
            << std::fixed << std::setprecision(1) << row.meanNs << "\n";
    }
    out << diagnosticsText(diag);
    out << "open_regions_at_finish=" << openRegionsAtFinish << "\n";
    return out.str();
}

std::string RegionReport::toJson() const {
    nlohmann::ordered_json doc;
    nlohmann::ordered_json regions = nlohmann::ordered_json::array();
    for (const auto& row : rows) {
        nlohmann::ordered_json r;
        r["region"] = row.name;
        r["entries"] = row.entries;
        r["elapsed_ns"] = row.elapsedNs;
        r["mean_ns"] = row.meanNs;
        regions.push_back(std::move(r));
    }
    doc["regions"] = std::move(regions);
    doc["diagnostics"] = diagnosticsJson(diag);
    doc["open_regions_at_finish"] = openRegionsAtFinish;
    return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// CountingHandler

CountingHandler::CountingHandler(size_t functionSlots) : slots_(functionSlots) {}

void CountingHandler::onEvent(const Event& event) {
    const uint32_t functionId = event.packedId & kMaxFunctionId;
    if (functionId < slots_.size()) {
        Slot& slot = slots_[functionId];
        (event.kind == SledKind::Entry ? slot.entries : slot.exits)
            .fetch_add(1, std::memory_order_relaxed);
        slot.lastTimestampNs.store(event.timestampNs, std::memory_order_relaxed);
    } else {
        overflow_.fetch_add(1, std::memory_order_relaxed);
    }
    threadTotals_[event.threadId % kThreadShards].fetch_add(1, std::memory_order_relaxed);
}

uint64_t CountingHandler::total() const {
    uint64_t sum = overflow_.load(std::memory_order_relaxed);
    for (const auto& slot : slots_) {
        sum += slot.entries.load(std::memory_order_relaxed) +
               slot.exits.load(std::memory_order_relaxed);
    }
    return sum;
}

uint64_t CountingHandler::countFor(uint32_t functionId) const {
    if (functionId >= slots_.size()) {
        return 0;
    }
    return slots_[functionId].entries.load(std::memory_order_relaxed) +
           slots_[functionId].exits.load(std::memory_order_relaxed);
}

uint64_t CountingHandler::threadTotal(uint32_t threadId) const {
    return threadTotals_[threadId % kThreadShards].load(std::memory_order_relaxed);
}

int64_t CountingHandler::lastTimestamp(uint32_t functionId) const {
    return functionId < slots_.size()
               ? slots_[functionId].lastTimestampNs.load(std::memory_order_relaxed)
               : 0;
}

} // namespace capi
