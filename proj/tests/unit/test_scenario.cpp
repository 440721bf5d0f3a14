#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "mflow/errors.hpp"
#include "mflow/scenario.hpp"

using namespace mflow;

namespace {

const char* kPoisson = R"({
  "name": "poisson",
  "module": "driver",
  "experiment": "sample",
  "seeds": [3, 4],
  "driver": {"kind": "compound_poisson", "horizon": 2.0, "rate": 2.0, "dt": 0.05}
})";

std::filesystem::path scratch(const std::string& name)
{
    auto dir = std::filesystem::temp_directory_path() / ("mflow_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

ConfigError config_error_of(const std::string& text)
{
    try {
        parse_scenario(text);
    } catch (const ConfigError& e) {
        return e;
    }
    ADD_FAILURE() << "expected ConfigError for:\n" << text;
    return ConfigError("none", "");
}

}  // namespace

TEST(Scenario, ParsesValidFile)
{
    const auto s = parse_scenario(kPoisson);
    EXPECT_EQ(s.name, "poisson");
    EXPECT_EQ(s.output, "poisson");
    EXPECT_EQ(s.seeds, (std::vector<std::uint64_t>{3, 4}));
    EXPECT_EQ(s.line_of("seeds"), 5);
}

TEST(Scenario, EmptySeedListNamesFieldAndLine)
{
    std::string text = kPoisson;
    text.replace(text.find("[3, 4]"), 6, "[]");
    const auto e = config_error_of(text);
    EXPECT_EQ(e.field, "seeds");
    EXPECT_EQ(e.line, 5);
    EXPECT_NE(std::string(e.what()).find("empty"), std::string::npos);
}

TEST(Scenario, MalformedJsonReportsLine)
{
    const auto e = config_error_of("{\n  \"name\": \"x\",\n  \"seeds\": [1,,]\n}");
    EXPECT_EQ(e.line, 3);
}

TEST(Scenario, RejectsBadFields)
{
    auto with = [](const std::string& from, const std::string& to) {
        std::string t = kPoisson;
        t.replace(t.find(from), from.size(), to);
        return t;
    };
    EXPECT_EQ(config_error_of(with("\"sample\"", "\"nonexistent\"")).field, "experiment");
    EXPECT_EQ(config_error_of(with("\"compound_poisson\"", "\"telegraph\"")).field, "driver.kind");
    EXPECT_EQ(config_error_of(with("\"dt\": 0.05", "\"dt\": -1")).field, "driver.dt");
    EXPECT_EQ(config_error_of(with("[3, 4]", "[3, -4]")).field, "seeds");
    EXPECT_EQ(config_error_of(with("\"name\"", "\"title\": \"t\", \"colour\": 1, \"name\"")).field, "colour");
}

TEST(Scenario, BuildDriverHonoursOverrides)
{
    const auto s = parse_scenario(kPoisson);
    const auto a = build_driver(s.driver, 3);
    const auto b = build_driver(s.driver, 3, 0.1);
    EXPECT_EQ(a.kind, "compound_poisson");
    // jump times are inserted into the base grid
    EXPECT_EQ(a.points(), 41u + a.jumps.size());
    EXPECT_EQ(b.points(), 21u + b.jumps.size());
    EXPECT_EQ(a.jumps.size(), b.jumps.size());
    EXPECT_GT(a.jumps.size(), 0u);
}

TEST(Scenario, Sha256KnownVector)
{
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Scenario, RunWritesReportAndManifest)
{
    const auto out = scratch("run");
    RunOptions opts;
    opts.out = out;
    const auto r = run_scenario(parse_scenario(kPoisson), opts);
    EXPECT_TRUE(r.pass) << r.error;
    EXPECT_TRUE(std::filesystem::exists(out / "poisson" / "report.json"));
    ASSERT_EQ(r.manifest.size(), 4u);
    for (const auto& m : r.manifest) {
        EXPECT_EQ(m.sha256.size(), 64u);
        EXPECT_EQ(std::filesystem::file_size(out / "poisson" / m.file), m.bytes);
    }
}

TEST(Scenario, DigestIsDeterministicAndIgnoresTiming)
{
    const auto out = scratch("digest");
    RunOptions opts;
    opts.out = out;
    const auto s = parse_scenario(kPoisson);
    const auto a = run_scenario(s, opts);
    auto b = run_scenario(s, opts);
    b.wall_seconds += 10.0;
    EXPECT_EQ(a.digest(), b.digest());
    opts.seed_override = 9;
    const auto c = run_scenario(s, opts);
    EXPECT_NE(a.digest(), c.digest());
}

TEST(Scenario, EmptySuiteDirectorySucceeds)
{
    const auto dir = scratch("empty_suite");
    RunOptions opts;
    opts.out = dir / "out";
    const auto suite = run_suite(dir, opts);
    EXPECT_TRUE(suite.runs.empty());
    EXPECT_TRUE(suite.pass());
    EXPECT_TRUE(std::filesystem::exists(opts.out / "suite.json"));
}

TEST(Scenario, SuiteReportsEveryScenario)
{
    const auto dir = scratch("suite");
    std::string failing = kPoisson;
    failing.replace(failing.find("\"poisson\""), 9, "\"failing\"");
    failing.replace(failing.rfind('}'), 1, ", \"thresholds\": {\"finite_paths\": 2}}");
    std::string broken = kPoisson;
    broken.replace(broken.find("[3, 4]"), 6, "[]");
    std::ofstream(dir / "a_ok.json") << kPoisson;
    std::ofstream(dir / "b_failing.json") << failing;
    std::ofstream(dir / "c_broken.json") << broken;
    RunOptions opts;
    opts.out = dir / "out";
    opts.workers = 2;
    const auto suite = run_suite(dir, opts);
    ASSERT_EQ(suite.runs.size(), 2u);
    EXPECT_TRUE(suite.runs[0].second.pass);
    EXPECT_FALSE(suite.runs[1].second.pass);
    ASSERT_EQ(suite.config_errors.size(), 1u);
    EXPECT_EQ(suite.config_errors[0].first, "c_broken.json");
    EXPECT_FALSE(suite.pass());
}

TEST(Scenario, CatalogAndSchemaListExperiments)
{
    const auto cat = list_catalog();
    const auto schema = scenario_schema();
    for (const auto& [name, fn] : experiments()) {
        bool found = false;
        for (const auto& e : cat["experiments"]) found = found || e.dump().find(name) != std::string::npos;
        EXPECT_TRUE(found) << name;
    }
    EXPECT_TRUE(schema.contains("properties"));
}
