// Copyright (c) 2026 The capi authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CAPI_INSTRUMENTATIONCONFIG_HPP
#define CAPI_INSTRUMENTATIONCONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace capi {

enum class Provenance { Pipeline, Compensation };

/// The instrumentation configuration: the ordered set of functions chosen
/// for measurement, with provenance and optional precomputed function ids.
struct InstrumentationConfig {
    std::vector<std::string> include;
    std::map<std::string, Provenance> origin;
    std::map<std::string, uint32_t> idHints; // name -> packed function id

    /// No duplicate names; origin/idHints keys must be include members.
    void validate() const;

    bool operator==(const InstrumentationConfig&) const = default;
};

/// Region-names filter block:
///
///     SCOREP_REGION_NAMES_BEGIN
///     EXCLUDE *
///     INCLUDE <name>
///     ...
///     SCOREP_REGION_NAMES_END
///
/// Names are emitted verbatim (mangled); the wildcard characters * and ?
/// are escaped with a backslash. `demangled` adds trailing comments.
std::string emitScorepFilter(const InstrumentationConfig& config,
                             const std::map<std::string, std::string>& demangled = {});

/// Parses the dialect emitted above. Wildcard patterns other than the
/// leading `EXCLUDE *` are rejected, not ignored. Comment lines (#) are
/// skipped. Origin of every parsed name is Provenance::Pipeline.
InstrumentationConfig parseScorepFilter(const std::string& text,
                                        const std::string& sourceName = "<filter>");

/// Native JSON form; round-trips the full configuration bit-exactly.
/// An empty config emits {"version":1,"include":[]}.
std::string emitNativeConfig(const InstrumentationConfig& config);
InstrumentationConfig parseNativeConfig(const std::string& text,
                                        const std::string& sourceName = "<ic>");

enum class ConfigFormat { ScorepFilter, Native };

/// Decides the on-disk format by content: JSON documents are native,
/// anything else is treated as a filter file.
ConfigFormat sniffConfigFormat(const std::string& text);

/// Reads a config file in either format.
InstrumentationConfig loadConfigFile(const std::filesystem::path& path);

} // namespace capi

#endif // CAPI_INSTRUMENTATIONCONFIG_HPP
