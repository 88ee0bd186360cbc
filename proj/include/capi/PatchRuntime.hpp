// Copyright (c) 2026 The capi authors
// SPDX-License-Identifier: Apache-2.0
//
// Simulated patchable runtime. Loadable objects register a table of
// entry/exit sleds (one pair per function, NOP until patched); applying an
// instrumentation config flips the sleds of the listed functions to
// PATCHED, and dispatch forwards events of patched functions to the
// installed handler while unpatched ones fall through.

#ifndef CAPI_PATCHRUNTIME_HPP
#define CAPI_PATCHRUNTIME_HPP

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "capi/Errors.hpp"
#include "capi/InstrumentationConfig.hpp"
#include "capi/Postprocess.hpp"

namespace capi {

// ---------------------------------------------------------------------------
// Packed function ids: 8-bit object id in the high bits, 24-bit per-object
// function id below. Object 0 is the main executable, so its packed ids
// equal the plain function ids.

using PackedId = uint32_t;

constexpr uint32_t kMaxObjectId = 255;
constexpr uint32_t kMaxFunctionId = (1u << 24) - 1;

/// Throws RuntimeRegistryError on out-of-range inputs.
PackedId packId(uint32_t objectId, uint32_t functionId);

struct UnpackedId {
    uint32_t objectId;
    uint32_t functionId;
    bool operator==(const UnpackedId&) const = default;
};

UnpackedId unpackId(PackedId packed);

// ---------------------------------------------------------------------------
// Sleds and objects.

enum class SledKind : uint8_t { Entry = 0, Exit = 1 };
enum class SledState : uint8_t { Nop = 0, Patched = 1 };

struct Event {
    PackedId packedId;
    SledKind kind;
    uint32_t threadId;
    int64_t timestampNs;
};

class EventHandler {
public:
    virtual ~EventHandler() = default;
    virtual void onEvent(const Event& event) = 0;
};

/// Shape of a loadable object as described by a fixture file: its functions
/// in id order, each with symbol visibility and optional metadata.
struct ObjectLayout {
    struct Function {
        std::string name;
        bool hidden = false;
        std::string demangled;      // empty when unknown
        uint64_t numStatements = 1; // consumed by the sled threshold option
    };

    std::string name;
    std::vector<Function> functions;
};

std::vector<ObjectLayout> loadObjectLayouts(const std::filesystem::path& path);
std::vector<ObjectLayout> parseObjectLayouts(const std::string& text,
                                             const std::string& sourceName = "<objects>");

/// Sled-table view of an object handed to the registry: name and function
/// count only; the function names travel separately as symbols.
struct ObjectDescriptor {
    std::string name;
    uint32_t functionCount = 0;
};

struct PatchReport {
    uint64_t patched = 0;                // functions whose sleds were patched
    std::vector<std::string> notFound;   // config names with no resolution
    uint64_t skippedUnresolved = 0;      // of those, known-but-hidden symbols

    std::string toText() const;
};

struct ResolvedFunction {
    uint64_t address = 0;
    std::optional<std::string> name;
};

// ---------------------------------------------------------------------------
// Registry.
//
// Registration, unregistration and applyConfig are serialized; dispatch may
// run concurrently from many logical threads once patching is done. Sled
// states are atomic, so a dispatch sees either NOP or PATCHED.

class RuntimeRegistry {
public:
    RuntimeRegistry() = default;
    RuntimeRegistry(const RuntimeRegistry&) = delete;
    RuntimeRegistry& operator=(const RuntimeRegistry&) = delete;

    /// Registers an object and resolves its functions by translating each
    /// visible symbol's local address through the object's base address
    /// into the sled table. Hidden or missing symbols leave the function
    /// unresolved (counted, skipped with a warning).
    ///
    /// The first registration takes object id 0 and must be the main
    /// executable; later ones take the lowest free id in 1..255.
    uint32_t registerObject(const ObjectDescriptor& object, const SymbolTable& symbols);

    /// Drops a DSO: sleds forced to NOP, index entries removed, id reusable.
    /// Object 0 cannot be unregistered.
    void unregisterObject(uint32_t objectId);

    /// Patches every config name resolvable in the name index. Unresolvable
    /// names are reported, never fatal.
    PatchReport applyConfig(const InstrumentationConfig& config);

    /// Flips all sleds back to NOP (the pre-patching state).
    void unpatchAll();

    void setHandler(EventHandler* handler) { handler_ = handler; }

    /// Hot path. Unknown object ids and out-of-range function ids bump the
    /// invalid-event counter; NOP sleds swallow the event. Patched sleds
    /// jump into the out-of-line trampoline, which invokes the handler.
    void dispatch(PackedId packedId, SledKind kind, uint32_t threadId, int64_t timestampNs) const {
        const uint32_t objectId = packedId >> 24;
        const uint32_t functionId = packedId & kMaxFunctionId;
        const LiveObject* object = objects_[objectId].get();
        if (object == nullptr || functionId >= object->functionCount) {
            invalidEvents_.fetch_add(1, std::memory_order_relaxed);
            return;
        }
        const auto slot = 2 * functionId + static_cast<uint32_t>(kind);
        if (object->sledStates[slot].load(std::memory_order_relaxed) !=
            static_cast<uint8_t>(SledState::Patched)) {
            return;
        }
        trampoline(Event{packedId, kind, threadId, timestampNs});
    }

    std::optional<PackedId> lookup(const std::string& name) const;
    ResolvedFunction resolve(PackedId packedId) const;
    SledState sledState(PackedId packedId, SledKind kind) const;

    /// Synthetic sled address: base + 16 * functionId, +8 for the exit sled.
    uint64_t sledAddress(PackedId packedId, SledKind kind) const;

    bool isRegistered(uint32_t objectId) const { return objects_[objectId] != nullptr; }
    size_t liveObjectCount() const;
    uint64_t baseAddress(uint32_t objectId) const;

    /// Function names with any patched sled, sorted.
    NameSet patchedFunctions() const;

    uint64_t unresolvedSymbols() const { return unresolvedSymbols_; }
    uint64_t invalidEvents() const { return invalidEvents_.load(std::memory_order_relaxed); }
    const std::vector<std::string>& warnings() const { return warnings_; }

private:
    struct LiveObject {
        // Hot fields first: dispatch touches these on every event.
        uint32_t functionCount = 0;
        // 2 * functionCount states, entry/exit interleaved
        std::unique_ptr<std::atomic<uint8_t>[]> sledStates;
        uint64_t baseAddress = 0;
        uint32_t objectId = 0;
        std::string name;
        std::set<std::string> hiddenNames;
        std::vector<std::string> resolvedNames;
    };

    /// The patched-sled continuation: saves the event record and performs
    /// the indirect call into the installed handler. Deliberately out of
    /// line, standing in for the register-spilling jump pad a patched sled
    /// branches to.
    void trampoline(const Event& event) const;

    uint32_t lowestFreeId() const;

    std::array<std::unique_ptr<LiveObject>, 256> objects_;
    std::unordered_map<std::string, PackedId> nameIndex_;
    std::unordered_map<PackedId, std::string> packedToName_;
    EventHandler* handler_ = nullptr;
    uint64_t unresolvedSymbols_ = 0;
    mutable std::atomic<uint64_t> invalidEvents_{0};
    std::vector<std::string> warnings_;
    std::mutex registrationMutex_;
};

/// Registers fixture objects in file order (first entry = main executable).
/// Functions with numStatements below `sledThreshold` get no sleds at all,
/// mirroring a compile-time instruction-count pre-filter; remaining
/// functions are re-numbered densely. Returns the complete name -> packed
/// id map, hidden functions included, which is what a trace replay needs to
/// model the compiled-in sled identity.
struct FixtureIndex {
    std::map<std::string, PackedId> packedByName;
    std::map<std::string, std::string> demangledByName;
};

FixtureIndex registerObjectLayouts(RuntimeRegistry& registry,
                                   const std::vector<ObjectLayout>& layouts,
                                   uint64_t sledThreshold = 1);

} // namespace capi

#endif // CAPI_PATCHRUNTIME_HPP
