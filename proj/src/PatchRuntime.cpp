// Copyright (c) 2026 The capi authors
// SPDX-License-Identifier: Apache-2.0

#include "capi/PatchRuntime.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace capi {

namespace {

// Each object owns a disjoint 2^20-byte address window; a function's entry
// sled sits at base + 16 * id, the exit sled 8 bytes further.
constexpr uint64_t kObjectWindow = 1ull << 20;
constexpr uint64_t kSledStride = 16;
constexpr uint64_t kExitOffset = 8;
constexpr uint32_t kMaxFunctionsPerObject = static_cast<uint32_t>(kObjectWindow / kSledStride);

uint64_t windowBase(uint32_t objectId) { return (static_cast<uint64_t>(objectId) + 1) * kObjectWindow; }

} // namespace

PackedId packId(uint32_t objectId, uint32_t functionId) {
    if (objectId > kMaxObjectId) {
        throw RuntimeRegistryError("object id " + std::to_string(objectId) + " out of range (max 255)");
    }
    if (functionId > kMaxFunctionId) {
        throw RuntimeRegistryError("function id " + std::to_string(functionId) +
                                   " out of range (max 16777215)");
    }
    return (objectId << 24) | functionId;
}

UnpackedId unpackId(PackedId packed) {
    return UnpackedId{packed >> 24, packed & kMaxFunctionId};
}

std::string PatchReport::toText() const {
    std::ostringstream out;
    out << "patched " << patched << " function(s)";
    if (!notFound.empty()) {
        out << ", " << notFound.size() << " not found:";
        for (const auto& name : notFound) {
            out << " " << name;
        }
    }
    if (skippedUnresolved > 0) {
        out << " (" << skippedUnresolved << " hidden/unresolved)";
    }
    out << "\n";
    return out.str();
}

void RuntimeRegistry::trampoline(const Event& event) const {
    if (EventHandler* handler = handler_) {
        handler->onEvent(event);
    }
}

uint32_t RuntimeRegistry::lowestFreeId() const {
    for (uint32_t id = 1; id <= kMaxObjectId; ++id) {
        if (objects_[id] == nullptr) {
            return id;
        }
    }
    throw RuntimeRegistryError("registry full: 255 DSOs already registered");
}

uint32_t RuntimeRegistry::registerObject(const ObjectDescriptor& object,
                                         const SymbolTable& symbols) {
    std::lock_guard<std::mutex> lock(registrationMutex_);
    if (object.functionCount > kMaxFunctionsPerObject) {
        throw RuntimeRegistryError("object \"" + object.name + "\" has " +
                                   std::to_string(object.functionCount) +
                                   " functions; the synthetic address window fits " +
                                   std::to_string(kMaxFunctionsPerObject));
    }
    for (const auto& live : objects_) {
        if (live != nullptr && live->name == object.name) {
            throw RuntimeRegistryError("object \"" + object.name + "\" is already registered");
        }
    }
    const uint32_t objectId = objects_[0] == nullptr ? 0 : lowestFreeId();

    auto live = std::make_unique<LiveObject>();
    live->name = object.name;
    live->objectId = objectId;
    live->baseAddress = windowBase(objectId);
    live->functionCount = object.functionCount;
    live->sledStates = std::make_unique<std::atomic<uint8_t>[]>(2 * object.functionCount);
    for (uint32_t i = 0; i < 2 * object.functionCount; ++i) {
        live->sledStates[i].store(static_cast<uint8_t>(SledState::Nop), std::memory_order_relaxed);
    }

    // Symbol injection: translate each visible local address through the
    // base address and match it against the sled table.
    std::set<uint32_t> resolved;
    for (const auto& [name, info] : symbols.symbols) {
        if (info.objectName != object.name) {
            continue;
        }
        if (info.hidden) {
            live->hiddenNames.insert(name);
            warnings_.push_back("object " + object.name + ": symbol \"" + name +
                                "\" is hidden and cannot be resolved");
            continue;
        }
        const uint64_t absolute = live->baseAddress + info.localAddress;
        const uint64_t offset = absolute - live->baseAddress;
        if (offset % kSledStride != 0 || offset / kSledStride >= object.functionCount) {
            warnings_.push_back("object " + object.name + ": symbol \"" + name +
                                "\" matches no sled address");
            continue;
        }
        const auto functionId = static_cast<uint32_t>(offset / kSledStride);
        const PackedId packed = packId(objectId, functionId);
        nameIndex_[name] = packed;
        packedToName_[packed] = name;
        live->resolvedNames.push_back(name);
        resolved.insert(functionId);
    }
    const uint64_t unresolved = object.functionCount - resolved.size();
    if (unresolved > 0) {
        unresolvedSymbols_ += unresolved;
        warnings_.push_back("object " + object.name + ": " + std::to_string(unresolved) +
                            " function(s) have no resolvable symbol");
    }

    objects_[objectId] = std::move(live);
    return objectId;
}

void RuntimeRegistry::unregisterObject(uint32_t objectId) {
    std::lock_guard<std::mutex> lock(registrationMutex_);
    if (objectId == 0) {
        throw RuntimeRegistryError("object 0 is the main executable and cannot be unregistered");
    }
    if (objectId > kMaxObjectId || objects_[objectId] == nullptr) {
        throw RuntimeRegistryError("unregister: unknown object id " + std::to_string(objectId));
    }
    LiveObject& live = *objects_[objectId];
    for (uint32_t i = 0; i < 2 * live.functionCount; ++i) {
        live.sledStates[i].store(static_cast<uint8_t>(SledState::Nop), std::memory_order_release);
    }
    for (const auto& name : live.resolvedNames) {
        auto it = nameIndex_.find(name);
        if (it != nameIndex_.end()) {
            packedToName_.erase(it->second);
            nameIndex_.erase(it);
        }
    }
    objects_[objectId].reset();
}

PatchReport RuntimeRegistry::applyConfig(const InstrumentationConfig& config) {
    std::lock_guard<std::mutex> lock(registrationMutex_);
    PatchReport report;
    for (const auto& name : config.include) {
        auto it = nameIndex_.find(name);
        if (it == nameIndex_.end()) {
            report.notFound.push_back(name);
            for (const auto& live : objects_) {
                if (live != nullptr && live->hiddenNames.count(name) != 0) {
                    ++report.skippedUnresolved;
                    break;
                }
            }
            continue;
        }
        const auto [objectId, functionId] = unpackId(it->second);
        LiveObject& live = *objects_[objectId];
        live.sledStates[2 * functionId].store(static_cast<uint8_t>(SledState::Patched),
                                              std::memory_order_release);
        live.sledStates[2 * functionId + 1].store(static_cast<uint8_t>(SledState::Patched),
                                                  std::memory_order_release);
        ++report.patched;
    }
    return report;
}

void RuntimeRegistry::unpatchAll() {
    std::lock_guard<std::mutex> lock(registrationMutex_);
    for (const auto& live : objects_) {
        if (live == nullptr) {
            continue;
        }
        for (uint32_t i = 0; i < 2 * live->functionCount; ++i) {
            live->sledStates[i].store(static_cast<uint8_t>(SledState::Nop),
                                      std::memory_order_release);
        }
    }
}

std::optional<PackedId> RuntimeRegistry::lookup(const std::string& name) const {
    auto it = nameIndex_.find(name);
    if (it == nameIndex_.end()) {
        return std::nullopt;
    }
    return it->second;
}

ResolvedFunction RuntimeRegistry::resolve(PackedId packedId) const {
    const auto [objectId, functionId] = unpackId(packedId);
    ResolvedFunction result;
    const LiveObject* live = objects_[objectId].get();
    if (live != nullptr && functionId < live->functionCount) {
        result.address = live->baseAddress + functionId * kSledStride;
    } else {
        result.address = packedId; // unknown object: fall back to the raw id
    }
    auto it = packedToName_.find(packedId);
    if (it != packedToName_.end()) {
        result.name = it->second;
    }
    return result;
}

uint64_t RuntimeRegistry::sledAddress(PackedId packedId, SledKind kind) const {
    const auto [objectId, functionId] = unpackId(packedId);
    const LiveObject* live = objects_[objectId].get();
    if (live == nullptr || functionId >= live->functionCount) {
        throw RuntimeRegistryError("sledAddress: unknown packed id " + std::to_string(packedId));
    }
    return live->baseAddress + functionId * kSledStride +
           (kind == SledKind::Exit ? kExitOffset : 0);
}

SledState RuntimeRegistry::sledState(PackedId packedId, SledKind kind) const {
    const auto [objectId, functionId] = unpackId(packedId);
    const LiveObject* live = objects_[objectId].get();
    if (live == nullptr || functionId >= live->functionCount) {
        throw RuntimeRegistryError("sledState: unknown packed id " + std::to_string(packedId));
    }
    return static_cast<SledState>(
        live->sledStates[2 * functionId + static_cast<uint32_t>(kind)].load(
            std::memory_order_acquire));
}

size_t RuntimeRegistry::liveObjectCount() const {
    size_t count = 0;
    for (const auto& live : objects_) {
        if (live != nullptr) {
            ++count;
        }
    }
    return count;
}

uint64_t RuntimeRegistry::baseAddress(uint32_t objectId) const {
    if (objectId > kMaxObjectId || objects_[objectId] == nullptr) {
        throw RuntimeRegistryError("baseAddress: unknown object id " + std::to_string(objectId));
    }
    return objects_[objectId]->baseAddress;
}

NameSet RuntimeRegistry::patchedFunctions() const {
    NameSet names;
    for (const auto& [name, packed] : nameIndex_) {
        const auto [objectId, functionId] = unpackId(packed);
        const LiveObject* live = objects_[objectId].get();
        if (live == nullptr) {
            continue;
        }
        if (live->sledStates[2 * functionId].load(std::memory_order_acquire) ==
                static_cast<uint8_t>(SledState::Patched) ||
            live->sledStates[2 * functionId + 1].load(std::memory_order_acquire) ==
                static_cast<uint8_t>(SledState::Patched)) {
            names.insert(name);
        }
    }
    return names;
}

std::vector<ObjectLayout> parseObjectLayouts(const std::string& text,
                                             const std::string& sourceName) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(sourceName + ": " + e.what());
    }
    if (!doc.is_object() || !doc.contains("objects") || !doc["objects"].is_array()) {
        throw ParseError(sourceName + ": expected a top-level \"objects\" array");
    }
    std::vector<ObjectLayout> layouts;
    for (const auto& entry : doc["objects"]) {
        if (!entry.is_object() || !entry.contains("name") || !entry.contains("functions")) {
            throw ParseError(sourceName + ": each object needs \"name\" and \"functions\"");
        }
        ObjectLayout layout;
        layout.name = entry["name"].get<std::string>();
        std::set<std::string> seen;
        for (const auto& fn : entry["functions"]) {
            ObjectLayout::Function function;
            if (fn.is_string()) {
                function.name = fn.get<std::string>();
            } else if (fn.is_object() && fn.contains("name")) {
                function.name = fn["name"].get<std::string>();
                function.hidden = fn.value("hidden", false);
                function.demangled = fn.value("demangled", std::string{});
                function.numStatements = fn.value("numStatements", uint64_t{1});
            } else {
                throw ParseError(sourceName + ": object \"" + layout.name +
                                 "\": functions must be names or objects with a \"name\"");
            }
            if (!seen.insert(function.name).second) {
                throw ParseError(sourceName + ": object \"" + layout.name +
                                 "\" lists function \"" + function.name + "\" twice");
            }
            layout.functions.push_back(std::move(function));
        }
        layouts.push_back(std::move(layout));
    }
    if (layouts.empty()) {
        throw ParseError(sourceName + ": no objects defined");
    }
    return layouts;
}

std::vector<ObjectLayout> loadObjectLayouts(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open object fixture: " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parseObjectLayouts(buffer.str(), path.string());
}

FixtureIndex registerObjectLayouts(RuntimeRegistry& registry,
                                   const std::vector<ObjectLayout>& layouts,
                                   uint64_t sledThreshold) {
    FixtureIndex index;
    for (const auto& layout : layouts) {
        // The compile-time pre-filter: functions below the statement
        // threshold get no sleds, the rest are renumbered densely.
        std::vector<const ObjectLayout::Function*> instrumented;
        for (const auto& function : layout.functions) {
            if (function.numStatements >= sledThreshold) {
                instrumented.push_back(&function);
            }
        }

        ObjectDescriptor descriptor{layout.name, static_cast<uint32_t>(instrumented.size())};
        SymbolTable slice;
        slice.objects.push_back(layout.name);
        for (size_t i = 0; i < instrumented.size(); ++i) {
            slice.symbols.emplace(instrumented[i]->name,
                                  SymbolInfo{layout.name, i * kSledStride, instrumented[i]->hidden});
        }
        const uint32_t objectId = registry.registerObject(descriptor, slice);

        for (size_t i = 0; i < instrumented.size(); ++i) {
            const ObjectLayout::Function& function = *instrumented[i];
            index.packedByName[function.name] = packId(objectId, static_cast<uint32_t>(i));
            if (!function.demangled.empty()) {
                index.demangledByName[function.name] = function.demangled;
            }
        }
    }
    return index;
}

} // namespace capi
