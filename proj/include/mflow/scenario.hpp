#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mflow/driver.hpp"
#include "mflow/io.hpp"

namespace mflow {

// One experiment, parsed from a JSON file:
// {
//   "name": "...", "module": "lindec", "experiment": "rotation_factorization",
//   "seeds": [1, 2], "driver": {"kind": "brownian", "horizon": 1, "dt": 1e-3, ...},
//   "field": {...}, "params": {...}, "thresholds": {...}, "output": "subdir"
// }
struct Scenario {
    std::string name;
    std::string module;
    std::string experiment;
    std::vector<std::uint64_t> seeds;
    Json driver = Json::object();
    Json field;  // null when the experiment fixes its own fields
    Json params = Json::object();
    Json thresholds = Json::object();
    std::string output;  // defaults to name
    int criterion = 0;   // acceptance criterion number, 0 if none
    std::string title;
    std::filesystem::path source;
    std::string text;  // raw file, for line lookups

    Json echo() const;
    // 1-based line of the first occurrence of "key" in the source, 0 if unknown
    int line_of(const std::string& key) const;
};

Scenario parse_scenario(const std::string& text, const std::string& source = "<string>");
Scenario load_scenario(const std::filesystem::path& path);

// Builds a driver from a "driver" object. `seed` and `dt` override the spec's.
DriverPath build_driver(const Json& spec, std::uint64_t seed, std::optional<double> dt = std::nullopt);

struct RunOptions {
    std::filesystem::path out = "out";
    int workers = 1;
    std::optional<std::uint64_t> seed_override;
    std::optional<double> dt_override;
};

enum class Cmp { le, ge, eq, lt, gt };

struct Check {
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
    Cmp cmp = Cmp::le;
    bool pass = false;
};

struct ManifestEntry {
    std::string file;
    std::uintmax_t bytes = 0;
    std::string sha256;
};

struct RunReport {
    Json scenario;
    std::vector<Check> checks;
    Json results = Json::object();  // slopes, per-level residuals, verdict data
    std::vector<ManifestEntry> manifest;
    double wall_seconds = 0.0;
    std::string error;  // runtime failure with module context
    bool pass = false;

    // Report JSON; timing is included unless `for_digest`.
    Json to_json(bool for_digest = false) const;
    std::string digest() const;
};

// Working state handed to an experiment.
class RunContext {
public:
    RunContext(const Scenario& s, const RunOptions& opts, RunReport& report);

    const Scenario& scenario() const { return s_; }
    const std::vector<std::uint64_t>& seeds() const { return seeds_; }
    std::uint64_t seed() const { return seeds_.front(); }
    std::optional<double> dt_override() const { return opts_.dt_override; }

    DriverPath driver(std::uint64_t seed) const;
    DriverPath driver(std::uint64_t seed, double dt) const;
    double base_dt() const;

    // Typed parameter lookup with a module default; the value used is echoed.
    double param(const std::string& key, double fallback);
    int param_int(const std::string& key, int fallback);
    std::vector<double> param_list(const std::string& key, std::vector<double> fallback);
    std::string param_string(const std::string& key, const std::string& fallback);
    FieldSpec param_field(const std::string& key, const FieldSpec& fallback);
    // The scenario's "field", or the fallback when it has none.
    FieldSpec field(const FieldSpec& fallback);
    double threshold(const std::string& key, double fallback);

    bool check(const std::string& name, double value, const std::string& threshold_key, double fallback,
               Cmp cmp = Cmp::le);
    Json& results() { return report_.results; }

    void emit(const std::string& file, const std::string& content);
    void emit_json(const std::string& file, const Json& j);

private:
    const Scenario& s_;
    const RunOptions& opts_;
    RunReport& report_;
    std::vector<std::uint64_t> seeds_;
    std::filesystem::path dir_;
};

using Experiment = std::function<void(RunContext&)>;

// "<module>.<experiment>" -> runner
const std::map<std::string, Experiment>& experiments();

RunReport run_scenario(const Scenario& s, const RunOptions& opts);

struct SuiteReport {
    std::vector<std::pair<std::string, RunReport>> runs;  // file name, report
    std::vector<std::pair<std::string, std::string>> config_errors;
    bool pass() const;
    Json to_json(bool for_digest = false) const;
};

// Runs every *.json in dir (sorted), up to opts.workers at a time.
SuiteReport run_suite(const std::filesystem::path& dir, const RunOptions& opts);

Json list_catalog();
Json scenario_schema();

std::string sha256_hex(const std::string& data);

}  // namespace mflow
