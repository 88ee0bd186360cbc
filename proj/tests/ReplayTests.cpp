// Copyright (c) 2026 The capi authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstdlib>
#include <fstream>

#include "capi/Errors.hpp"
#include "capi/Replay.hpp"
#include "TestSupport.hpp"

using namespace capi;
using namespace capi::test;

namespace {

std::filesystem::path writeTemp(const std::string& name, const std::string& content) {
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path);
    out << content;
    return path;
}

std::vector<ObjectLayout> toyObjects() {
    return loadObjectLayouts(fixturePath("toyapp.objects.json"));
}

} // namespace

TEST_CASE("trace parsing accepts the documented line format") {
    const auto events = parseTrace("# comment\nT0 enter main 0\nT1 exit main 25\n");
    REQUIRE(events.size() == 2);
    CHECK(events[0].threadId == 0);
    CHECK(events[0].kind == SledKind::Entry);
    CHECK(events[0].function == "main");
    CHECK(events[1].threadId == 1);
    CHECK(events[1].timestampNs == 25);
}

TEST_CASE("trace parse errors carry line numbers") {
    CHECK_THROWS_WITH_AS(parseTrace("T0 enter main 0\nbogus line\n"), doctest::Contains(":2"),
                         ParseError);
    CHECK_THROWS_WITH_AS(parseTrace("X0 enter main 0\n"), doctest::Contains("thread id"),
                         ParseError);
    CHECK_THROWS_WITH_AS(parseTrace("T0 wander main 0\n"), doctest::Contains("enter"), ParseError);
    CHECK_THROWS_WITH_AS(parseTrace("T0 enter main zero\n"), doctest::Contains("timestamp"),
                         ParseError);
    CHECK_THROWS_WITH_AS(parseTrace("T0 enter main 0 extra\n"), doctest::Contains("trailing"),
                         ParseError);
    CHECK_THROWS_WITH_AS(parseTrace("T0 enter main 10\nT0 exit main 5\n"),
                         doctest::Contains("backwards"), ParseError);
}

TEST_CASE("timestamps may go backwards across threads, not within one") {
    const auto events = parseTrace("T0 enter main 100\nT1 enter vec_add 5\nT0 exit main 200\n");
    CHECK(events.size() == 3);
}

TEST_CASE("replay filters the trace by the config") {
    const auto icPath = writeTemp("replay_ic.filt", "SCOREP_REGION_NAMES_BEGIN\n"
                                                    "EXCLUDE *\n"
                                                    "INCLUDE solve\n"
                                                    "INCLUDE iterate\n"
                                                    "SCOREP_REGION_NAMES_END\n");
    ReplayOptions options;
    options.backend = BackendKind::Profile;
    options.configPath = icPath;
    const ReplayResult result =
        replay(toyObjects(), loadTrace(fixturePath("toyapp.trace")), options);
    CHECK(result.patch.patched == 2);
    CHECK(result.patch.notFound.empty());
    CHECK(result.report.find("solve/iterate") != std::string::npos);
    CHECK(result.report.find("compute_kernel") == std::string::npos);
    CHECK(result.exitCode() == 0);
}

TEST_CASE("without a config and without the env var nothing is patched") {
    unsetenv("CAPI_FILTERING_FILE");
    ReplayOptions options;
    options.backend = BackendKind::Profile;
    const ReplayResult result =
        replay(toyObjects(), loadTrace(fixturePath("toyapp.trace")), options);
    CHECK(result.patch.patched == 0);
    CHECK(result.report.find("main") == std::string::npos);
    CHECK(result.exitCode() == 0);
}

TEST_CASE("the CAPI_FILTERING_FILE env var names the config, --ic wins over it") {
    const auto envConfig = writeTemp("replay_env.json", R"({"version":1,"include":["solve"]})");
    const auto argConfig = writeTemp("replay_arg.json", R"({"version":1,"include":["iterate"]})");
    setenv("CAPI_FILTERING_FILE", envConfig.c_str(), 1);

    ReplayOptions fromEnv;
    fromEnv.backend = BackendKind::Regions;
    const ReplayResult envResult =
        replay(toyObjects(), loadTrace(fixturePath("toyapp.trace")), fromEnv);
    CHECK(envResult.report.find("solve") != std::string::npos);
    CHECK(envResult.report.find("iterate") == std::string::npos);

    ReplayOptions fromArg = fromEnv;
    fromArg.configPath = argConfig;
    const ReplayResult argResult =
        replay(toyObjects(), loadTrace(fixturePath("toyapp.trace")), fromArg);
    CHECK(argResult.report.find("iterate") != std::string::npos);
    CHECK(argResult.report.find("solve") == std::string::npos);
    unsetenv("CAPI_FILTERING_FILE");
}

TEST_CASE("deferred init surfaces pre-init regions as failed registrations") {
    const auto icPath = writeTemp("preinit_ic.json",
                                  R"({"version":1,"include":["main","solve","MPI_Init"]})");
    ReplayOptions options;
    options.backend = BackendKind::Regions;
    options.configPath = icPath;
    options.initMode = InitMode::OnFunctionExit;
    options.initFunction = "MPI_Init";
    const ReplayResult result =
        replay(toyObjects(), loadTrace(fixturePath("preinit.trace")), options);
    CHECK(result.diagnostics.failedRegistrations == 2);
    CHECK(result.diagnostics.failedRegistrationNames ==
          std::vector<std::string>{"MPI_Init", "main"});
    CHECK(result.report.find("solve") != std::string::npos);
    // main's exit and MPI_Init's exit stop regions that never opened.
    CHECK(result.diagnostics.droppedEvents == 2);
    CHECK(result.exitCode() == 1);
}

TEST_CASE("parallel dispatch yields the same merged profile") {
    const auto icPath = writeTemp("parallel_ic.json",
                                  R"({"version":1,"include":["vec_add","compute_kernel"]})");
    ReplayOptions sequential;
    sequential.backend = BackendKind::Profile;
    sequential.configPath = icPath;
    ReplayOptions parallel = sequential;
    parallel.parallel = true;

    const auto trace = loadTrace(fixturePath("toyapp.trace"));
    const ReplayResult a = replay(toyObjects(), trace, sequential);
    const ReplayResult b = replay(toyObjects(), trace, parallel);
    CHECK(a.report == b.report);

    parallel.initMode = InitMode::OnFunctionExit;
    CHECK_THROWS_AS(replay(toyObjects(), trace, parallel), Error);
}

TEST_CASE("hidden functions in the config are reported as not found") {
    const auto icPath = writeTemp("hidden_ic.json",
                                  R"({"version":1,"include":["mpi_internal_pool","solve"]})");
    ReplayOptions options;
    options.backend = BackendKind::Generic;
    options.configPath = icPath;
    const ReplayResult result =
        replay(toyObjects(), loadTrace(fixturePath("toyapp.trace")), options);
    CHECK(result.patch.patched == 1);
    CHECK(result.patch.notFound == std::vector<std::string>{"mpi_internal_pool"});
    CHECK(result.patch.skippedUnresolved == 1);
    CHECK(result.unresolvedSymbols == 1);
    CHECK(result.exitCode() == 1);
}

TEST_CASE("trace events referencing unknown functions are input errors") {
    ReplayOptions options;
    const auto trace = parseTrace("T0 enter not_in_fixture 0\n");
    CHECK_THROWS_WITH_AS(replay(toyObjects(), trace, options),
                         doctest::Contains("not_in_fixture"), ParseError);
}

TEST_CASE("threshold-filtered functions vanish from traces without error") {
    ReplayOptions options;
    options.backend = BackendKind::Profile;
    options.sledThreshold = 10;
    const auto icPath = writeTemp("threshold_ic.json", R"({"version":1,"include":["solve"]})");
    options.configPath = icPath;
    // vec_add events resolve to no sled at threshold 10 and are skipped.
    const ReplayResult result =
        replay(toyObjects(), loadTrace(fixturePath("toyapp.trace")), options);
    CHECK(result.report.find("vec_add") == std::string::npos);
    CHECK(result.exitCode() == 0);
}

TEST_CASE("bench reports throughput for both phases and the patching time") {
    BenchOptions options;
    options.repeat = 5;
    const auto trace = loadTrace(fixturePath("toyapp.trace"));
    const BenchResult result = bench(toyObjects(), trace, options);

    // 27 usable events per pass (the hidden pool function never appears).
    CHECK(result.eventsPerPhase == trace.size() * options.repeat);
    CHECK(result.handlerInvocations == result.eventsPerPhase);
    CHECK(result.patchedFunctions == 10);
    CHECK(result.nopElapsed.count() > 0.0);
    CHECK(result.patchedElapsed.count() > 0.0);
    CHECK(result.applyElapsed.count() >= 0.0);
    const std::string text = result.toText();
    CHECK(text.find("events/s") != std::string::npos);
    CHECK(text.find("nop/patched") != std::string::npos);
}

TEST_CASE("unbalanced profile traces propagate as trace errors") {
    const auto icPath = writeTemp("unbalanced_ic.json", R"({"version":1,"include":["main"]})");
    ReplayOptions options;
    options.backend = BackendKind::Profile;
    options.configPath = icPath;
    const auto trace = parseTrace("T0 enter main 0\n");
    // The unclosed frame is detected when the report is finalized.
    CHECK_THROWS_AS(replay(toyObjects(), trace, options), TraceError);
}
