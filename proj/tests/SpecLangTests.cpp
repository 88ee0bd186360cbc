// Copyright (c) 2026 The capi authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstdlib>
#include <map>
#include <random>

#include "capi/Errors.hpp"
#include "capi/SpecLang.hpp"
#include "TestSupport.hpp"

using namespace capi;
using namespace capi::test;

namespace {

/// In-memory module resolver for parser tests.
ImportResolver mapResolver(std::map<std::string, std::string> modules) {
    return [modules = std::move(modules)](const std::string& name) -> std::optional<ImportedModule> {
        auto it = modules.find(name);
        if (it == modules.end()) {
            return std::nullopt;
        }
        return ImportedModule{name, it->second, {}};
    };
}

std::vector<std::string> namedInstances(const SelectorPipeline& pipeline) {
    std::vector<std::string> names;
    for (const auto& instance : pipeline.instances) {
        if (instance.name) {
            names.push_back(*instance.name);
        }
    }
    return names;
}

} // namespace

TEST_CASE("the bundled example spec parses into the expected pipeline shape") {
    const SelectorPipeline pipeline = parseSpecFile(fixturePath("listing1.capi"));

    // Imported module first, then the spec's own statements.
    CHECK(namedInstances(pipeline) ==
          std::vector<std::string>{"mpi_ops", "mpi_comm", "excluded", "kernels"});
    CHECK(pipeline.instances.size() == 9);

    // Top-level instances outside the import: the two bindings plus the
    // anonymous subtract and the anonymous join serving as the entry.
    size_t topLevelLocal = 0;
    for (size_t i = 0; i < pipeline.instances.size(); ++i) {
        if (pipeline.isTopLevel(i) && !pipeline.instances[i].importedFrom) {
            ++topLevelLocal;
        }
    }
    CHECK(topLevelLocal == 4);

    const SelectorInstance& entry = pipeline.entry();
    CHECK(entry.kind == SelectorKind::Join);
    CHECK_FALSE(entry.name.has_value());
    REQUIRE(entry.args.size() == 2);
    REQUIRE(entry.args[0].type == Argument::Type::InstanceRef);
    CHECK(pipeline.instances[entry.args[0].instance].kind == SelectorKind::Subtract);
    CHECK_FALSE(pipeline.instances[entry.args[0].instance].name.has_value());
    REQUIRE(entry.args[1].type == Argument::Type::InstanceRef);
    CHECK(pipeline.instances[entry.args[1].instance].name == "mpi_comm");

    for (const auto& instance : pipeline.instances) {
        if (instance.name == "mpi_ops" || instance.name == "mpi_comm") {
            CHECK(instance.importedFrom == "mpi.capi");
        }
    }
}

TEST_CASE("a binding to a join of two universes") {
    const SelectorPipeline pipeline = parseSpec("x = join(%%, %%)");
    REQUIRE(pipeline.instances.size() == 1);
    const SelectorInstance& entry = pipeline.entry();
    CHECK(entry.name == "x");
    CHECK(entry.kind == SelectorKind::Join);
    REQUIRE(entry.args.size() == 2);
    CHECK(entry.args[0].type == Argument::Type::UniverseRef);
    CHECK(entry.args[1].type == Argument::Type::UniverseRef);
}

TEST_CASE("references must point backwards") {
    CHECK_THROWS_WITH_AS(parseSpec("a = subtract(%%, %b)"), doctest::Contains("%b"), ParseError);
    // Self reference is a forward reference too.
    CHECK_THROWS_AS(parseSpec("a = join(%a)"), ParseError);
}

TEST_CASE("parse errors carry positions and name the problem") {
    try {
        parseSpec("x = join(%%)\n  $ = 2\n");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
        CHECK(e.column() == 3);
        CHECK(std::string(e.what()).find("unexpected character") != std::string::npos);
    }

    CHECK_THROWS_WITH_AS(parseSpec("x = frobnicate(%%)"), doctest::Contains("unknown selector"),
                         ParseError);
    CHECK_THROWS_WITH_AS(parseSpec("x = subtract(%%)"), doctest::Contains("exactly 2"), ParseError);
    CHECK_THROWS_WITH_AS(parseSpec("x = flops(10, \">=\", %%)"),
                         doctest::Contains("comparison operator"), ParseError);
    CHECK_THROWS_WITH_AS(parseSpec("x = flops(\"!=\", 10, %%)"),
                         doctest::Contains("comparison operator"), ParseError);
    CHECK_THROWS_WITH_AS(parseSpec("x = byName(%%, %%)"), doctest::Contains("expected a string"),
                         ParseError);
    CHECK_THROWS_WITH_AS(parseSpec("x = %%\nx = %%"), doctest::Contains("duplicate instance name"),
                         ParseError);
    CHECK_THROWS_WITH_AS(parseSpec("x = byName(\"[\", %%)"), doctest::Contains("invalid regex"),
                         ParseError);
    CHECK_THROWS_WITH_AS(parseSpec("x = join(\"unterminated"),
                         doctest::Contains("unterminated string"), ParseError);
    CHECK_THROWS_AS(parseSpec("join"), ParseError);
    CHECK_THROWS_AS(parseSpec("x ="), ParseError);
}

TEST_CASE("empty input has no entry instance") {
    CHECK_THROWS_WITH_AS(parseSpec(""), doctest::Contains("no entry instance"), ParseError);
    CHECK_THROWS_WITH_AS(parseSpec("# only a comment\n"), doctest::Contains("no entry instance"),
                         ParseError);
}

TEST_CASE("imports splice at the directive position and resolve in order") {
    const auto resolver = mapResolver({{"m.capi", "base = inlineSpecified(%%)\n"}});
    const SelectorPipeline pipeline =
        parseSpec("!import(\"m.capi\")\nsubtract(%%, %base)\n", resolver);
    REQUIRE(pipeline.instances.size() == 2);
    CHECK(pipeline.instances[0].name == "base");
    CHECK(pipeline.instances[0].importedFrom == "m.capi");
    CHECK(pipeline.entry().kind == SelectorKind::Subtract);
}

TEST_CASE("importing the same module twice is idempotent") {
    const auto resolver = mapResolver({
        {"m.capi", "base = inlineSpecified(%%)\n"},
        {"a.capi", "!import(\"m.capi\")\nwide = join(%base, %%)\n"},
    });
    const SelectorPipeline pipeline =
        parseSpec("!import(\"a.capi\")\n!import(\"m.capi\")\njoin(%base, %wide)\n", resolver);
    CHECK(namedInstances(pipeline) == std::vector<std::string>{"base", "wide"});
}

TEST_CASE("import cycles and unresolved imports are reported") {
    const auto cyclic = mapResolver({
        {"a.capi", "!import(\"b.capi\")\nx = %%\n"},
        {"b.capi", "!import(\"a.capi\")\ny = %%\n"},
    });
    CHECK_THROWS_WITH_AS(parseSpec("!import(\"a.capi\")\nz = %%\n", cyclic),
                         doctest::Contains("import cycle"), ParseError);
    CHECK_THROWS_WITH_AS(parseSpec("!import(\"missing.capi\")\nz = %%\n", cyclic),
                         doctest::Contains("cannot resolve import"), ParseError);
    CHECK_THROWS_WITH_AS(parseSpec("!import(\"x.capi\")\nz = %%\n"),
                         doctest::Contains("no import resolver"), ParseError);
}

TEST_CASE("file imports honor CAPI_SPEC_PATH") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "capi_specpath_test";
    fs::create_directories(dir);
    {
        std::ofstream out(dir / "shared.capi");
        out << "shared = inSystemHeader(%%)\n";
    }
    setenv("CAPI_SPEC_PATH", dir.c_str(), 1);
    const SelectorPipeline pipeline =
        parseSpec("!import(\"shared.capi\")\nsubtract(%%, %shared)\n",
                  makeFileImportResolver(fs::temp_directory_path() / "elsewhere"));
    unsetenv("CAPI_SPEC_PATH");
    CHECK(namedInstances(pipeline) == std::vector<std::string>{"shared"});
    fs::remove_all(dir);
}

TEST_CASE("formatting round-trips the bundled example") {
    const SelectorPipeline pipeline = parseSpecFile(fixturePath("listing1.capi"));
    const std::string text = formatSpec(pipeline);
    const SelectorPipeline reparsed = parseSpec(text);
    CHECK(pipeline.structurallyEqual(reparsed));
    CHECK(reparsed.structurallyEqual(pipeline));
}

TEST_CASE("canonical text of simple pipelines") {
    CHECK(formatSpec(parseSpec("x = join(%%, %%)")) == "x = join(%%, %%)\n");
    CHECK(formatSpec(parseSpec("x   =  flops( \">=\" , 10,\n loopDepth(\">=\", 1, %%))")) ==
          "x = flops(\">=\", 10, loopDepth(\">=\", 1, %%))\n");
    CHECK(formatSpec(parseSpec("x = byName(\"a\\\\d+\\\"q\", %%)")) ==
          "x = byName(\"a\\\\d+\\\"q\", %%)\n");
    CHECK(formatSpec(SelectorPipeline{}).empty());
}

TEST_CASE("parsing is deterministic") {
    const std::string source = readFile(fixturePath("listing1.capi"));
    const auto resolver = makeFileImportResolver(fixturePath(""));
    const SelectorPipeline a = parseSpec(source, resolver);
    const SelectorPipeline b = parseSpec(source, resolver);
    CHECK(a.structurallyEqual(b));
}

namespace {

/// Random valid pipeline, built bottom-up; used for round-trip fuzzing.
SelectorPipeline randomPipeline(std::mt19937& rng) {
    SelectorPipeline pipeline;
    std::uniform_int_distribution<int> statements(1, 6);
    std::uniform_int_distribution<int> kindPick(0, 8);
    std::uniform_int_distribution<int> cmpPick(0, 4);
    std::uniform_int_distribution<int64_t> num(0, 99);
    std::bernoulli_distribution named(0.6);
    const char* ops[] = {">=", "<=", ">", "<", "=="};
    int nameCounter = 0;

    // Either a reference to an earlier named instance or %%, since nested
    // anonymous instances are exercised through the text-based tests.
    auto selectorArg = [&]() -> Argument {
        std::vector<size_t> namedIndices;
        for (size_t i = 0; i < pipeline.instances.size(); ++i) {
            if (pipeline.instances[i].name) {
                namedIndices.push_back(i);
            }
        }
        if (!namedIndices.empty() && std::bernoulli_distribution(0.5)(rng)) {
            std::uniform_int_distribution<size_t> pick(0, namedIndices.size() - 1);
            return Argument::ref(namedIndices[pick(rng)]);
        }
        return Argument::universe();
    };

    const int count = statements(rng);
    for (int s = 0; s < count; ++s) {
        SelectorInstance instance;
        if (named(rng)) {
            instance.name = "n" + std::to_string(nameCounter++);
        }
        switch (kindPick(rng)) {
        case 0:
            instance.kind = SelectorKind::Universe;
            break;
        case 1:
            instance.kind = SelectorKind::Join;
            instance.args = {selectorArg(), selectorArg()};
            break;
        case 2:
            instance.kind = SelectorKind::Subtract;
            instance.args = {selectorArg(), selectorArg()};
            break;
        case 3:
            instance.kind = SelectorKind::InSystemHeader;
            instance.args = {selectorArg()};
            break;
        case 4:
            instance.kind = SelectorKind::InlineSpecified;
            instance.args = {selectorArg()};
            break;
        case 5:
            instance.kind = SelectorKind::Flops;
            instance.args = {Argument::compare(ops[cmpPick(rng)]), Argument::integer(num(rng)),
                             selectorArg()};
            break;
        case 6:
            instance.kind = SelectorKind::LoopDepth;
            instance.args = {Argument::compare(ops[cmpPick(rng)]), Argument::integer(num(rng)),
                             selectorArg()};
            break;
        case 7:
            instance.kind = SelectorKind::ByName;
            instance.args = {Argument::string("f[0-9]+"), selectorArg()};
            break;
        default:
            instance.kind = SelectorKind::OnCallPathTo;
            instance.args = {selectorArg(), selectorArg()};
            break;
        }
        pipeline.instances.push_back(std::move(instance));
    }
    return pipeline;
}

} // namespace

TEST_CASE("random pipelines survive a format/parse round trip") {
    std::mt19937 rng(23);
    for (int i = 0; i < 100; ++i) {
        const SelectorPipeline pipeline = randomPipeline(rng);
        const SelectorPipeline reparsed = parseSpec(formatSpec(pipeline));
        CHECK(pipeline.structurallyEqual(reparsed));
    }
}
