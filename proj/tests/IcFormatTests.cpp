// Copyright (c) 2026 The capi authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <random>

#include "capi/Errors.hpp"
#include "capi/InstrumentationConfig.hpp"
#include "capi/PatchRuntime.hpp"
#include "TestSupport.hpp"

using namespace capi;

namespace {

InstrumentationConfig configOf(std::vector<std::string> names) {
    InstrumentationConfig config;
    config.include = std::move(names);
    return config;
}

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        out.push_back(line);
    }
    return out;
}

} // namespace

TEST_CASE("filter emission is the documented five-line block") {
    const auto block = lines(emitScorepFilter(configOf({"foo", "bar"})));
    REQUIRE(block.size() == 5);
    CHECK(block[0] == "SCOREP_REGION_NAMES_BEGIN");
    CHECK(block[1] == "  EXCLUDE *");
    CHECK(block[2] == "  INCLUDE foo");
    CHECK(block[3] == "  INCLUDE bar");
    CHECK(block[4] == "SCOREP_REGION_NAMES_END");
}

TEST_CASE("an empty config emits only the frame") {
    const auto block = lines(emitScorepFilter(configOf({})));
    REQUIRE(block.size() == 3);
    CHECK(block[0] == "SCOREP_REGION_NAMES_BEGIN");
    CHECK(block[1] == "  EXCLUDE *");
    CHECK(block[2] == "SCOREP_REGION_NAMES_END");
    const InstrumentationConfig parsed = parseScorepFilter(emitScorepFilter(configOf({})));
    CHECK(parsed.include.empty());
}

TEST_CASE("filter round trip preserves names, wildcards escaped") {
    const InstrumentationConfig config = configOf({"foo", "bar", "weird*name", "q?m", "back\\slash"});
    const InstrumentationConfig parsed = parseScorepFilter(emitScorepFilter(config));
    CHECK(parsed.include == config.include);
}

TEST_CASE("demangled comments are emitted and skipped on parse") {
    const std::string text =
        emitScorepFilter(configOf({"_Z3foov"}), {{"_Z3foov", "foo()"}});
    CHECK(text.find("INCLUDE _Z3foov # foo()") != std::string::npos);
    CHECK(parseScorepFilter(text).include == std::vector<std::string>{"_Z3foov"});
}

TEST_CASE("filter parse errors") {
    CHECK_THROWS_WITH_AS(parseScorepFilter("SCOREP_REGION_NAMES_BEGIN\nEXCLUDE *\nINCLUDE f\n"),
                         doctest::Contains("missing SCOREP_REGION_NAMES_END"), ParseError);
    CHECK_THROWS_WITH_AS(parseScorepFilter("EXCLUDE *\nSCOREP_REGION_NAMES_END\n"),
                         doctest::Contains("expected SCOREP_REGION_NAMES_BEGIN"), ParseError);
    CHECK_THROWS_WITH_AS(parseScorepFilter(""), doctest::Contains("missing SCOREP_REGION_NAMES_BEGIN"),
                         ParseError);
    CHECK_THROWS_WITH_AS(
        parseScorepFilter("SCOREP_REGION_NAMES_BEGIN\nEXCLUDE *\nINCLUDE f*\nSCOREP_REGION_NAMES_END\n"),
        doctest::Contains("unsupported wildcard"), ParseError);
    CHECK_THROWS_WITH_AS(
        parseScorepFilter("SCOREP_REGION_NAMES_BEGIN\nINCLUDE f\nSCOREP_REGION_NAMES_END\n"),
        doctest::Contains("EXCLUDE"), ParseError);
    CHECK_THROWS_AS(
        parseScorepFilter(
            "SCOREP_REGION_NAMES_BEGIN\nEXCLUDE *\nSCOREP_REGION_NAMES_END\nINCLUDE f\n"),
        ParseError);
    CHECK_THROWS_AS(parseScorepFilter("SCOREP_REGION_NAMES_BEGIN\nEXCLUDE *\nINCLUDE f g\n"
                                      "SCOREP_REGION_NAMES_END\n"),
                    ParseError);
}

TEST_CASE("comment and blank lines are skipped") {
    const InstrumentationConfig parsed = parseScorepFilter("# header\n\nSCOREP_REGION_NAMES_BEGIN\n"
                                                           "  EXCLUDE *\n"
                                                           "  # a note\n"
                                                           "  INCLUDE foo\n"
                                                           "SCOREP_REGION_NAMES_END\n");
    CHECK(parsed.include == std::vector<std::string>{"foo"});
}

TEST_CASE("the empty native config is the exact documented document") {
    CHECK(emitNativeConfig(configOf({})) == R"({"version":1,"include":[]})");
    CHECK(parseNativeConfig(R"({"version":1,"include":[]})").include.empty());
}

TEST_CASE("native config round trip is exact, id hints included") {
    InstrumentationConfig config = configOf({"foo", "bar"});
    config.origin["foo"] = Provenance::Pipeline;
    config.origin["bar"] = Provenance::Compensation;
    config.idHints["foo"] = packId(1, 5);

    const std::string text = emitNativeConfig(config);
    CHECK(text.find("16777221") != std::string::npos);
    const InstrumentationConfig parsed = parseNativeConfig(text);
    CHECK(parsed == config);
    // Emission is deterministic.
    CHECK(emitNativeConfig(parsed) == text);
}

TEST_CASE("native config parse errors") {
    CHECK_THROWS_WITH_AS(parseNativeConfig(R"({"version":2,"include":[]})"),
                         doctest::Contains("version"), ParseError);
    CHECK_THROWS_AS(parseNativeConfig(R"({"include":[]})"), ParseError);
    CHECK_THROWS_AS(parseNativeConfig("[]"), ParseError);
    CHECK_THROWS_AS(parseNativeConfig("{garbage"), ParseError);
    CHECK_THROWS_AS(parseNativeConfig(R"({"version":1,"include":["a","a"]})"), ParseError);
    CHECK_THROWS_AS(parseNativeConfig(R"({"version":1,"include":[],"origin":{"x":"pipeline"}})"),
                    ParseError);
    CHECK_THROWS_AS(
        parseNativeConfig(R"({"version":1,"include":["a"],"idHints":{"a":4294967296}})"),
        ParseError);
}

TEST_CASE("format sniffing distinguishes the two dialects") {
    CHECK(sniffConfigFormat(R"(  {"version":1,"include":[]})") == ConfigFormat::Native);
    CHECK(sniffConfigFormat("SCOREP_REGION_NAMES_BEGIN\n") == ConfigFormat::ScorepFilter);
    CHECK(sniffConfigFormat("") == ConfigFormat::ScorepFilter);
}

TEST_CASE("random configs round-trip through both formats") {
    std::mt19937 rng(53);
    std::uniform_int_distribution<int> count(0, 12);
    std::uniform_int_distribution<int> suffix(0, 1 << 20);
    std::bernoulli_distribution coin(0.5);
    for (int i = 0; i < 100; ++i) {
        InstrumentationConfig config;
        std::set<std::string> used;
        const int n = count(rng);
        for (int k = 0; k < n; ++k) {
            std::string name = "_Z" + std::to_string(suffix(rng)) + (coin(rng) ? "fv" : "*odd?");
            if (!used.insert(name).second) {
                continue;
            }
            config.include.push_back(name);
            config.origin[name] = coin(rng) ? Provenance::Pipeline : Provenance::Compensation;
            if (coin(rng)) {
                config.idHints[name] = packId(static_cast<uint32_t>(suffix(rng)) & 0xFF,
                                              static_cast<uint32_t>(suffix(rng)) & 0xFFFF);
            }
        }
        // Filter text keeps the include list, by design nothing else.
        CHECK(parseScorepFilter(emitScorepFilter(config)).include == config.include);
        CHECK(parseNativeConfig(emitNativeConfig(config)) == config);
    }
}
