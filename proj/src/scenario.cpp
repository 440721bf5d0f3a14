#include "mflow/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <thread>

#include <openssl/evp.h>

#include "mflow/attain.hpp"
#include "mflow/bundle.hpp"
#include "mflow/errors.hpp"
#include "mflow/fields.hpp"

namespace mflow {

namespace {

const std::vector<std::string>& driver_kinds()
{
    static const std::vector<std::string> kinds = {"brownian",      "brownian_with_jumps", "compound_poisson",
                                                   "levy",          "deterministic_time",  "jump_path"};
    return kinds;
}

int line_at_offset(const std::string& text, std::size_t offset)
{
    offset = std::min(offset, text.size());
    return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

[[noreturn]] void fail(const Scenario& s, const std::string& what, const std::string& field)
{
    const auto leaf = field.substr(field.find_last_of('.') + 1);
    const int line = s.line_of(leaf);
    throw ConfigError(s.source.string() + ":" + std::to_string(line) + ": " + field + ": " + what, field, line);
}

double num(const Json& spec, const std::string& key, double fallback)
{
    if (!spec.contains(key)) return fallback;
    const auto& v = spec.at(key);
    if (!v.is_number()) throw ConfigError("expected a number", "driver." + key);
    return v.get<double>();
}

std::vector<Vec> jump_sizes(const Json& spec, int dim)
{
    std::vector<Vec> out;
    if (!spec.contains("jump_sizes")) return out;
    for (const auto& s : spec.at("jump_sizes")) {
        if (s.is_number()) {
            out.push_back(Vec::Constant(dim, s.get<double>()));
        } else {
            out.push_back(vec_from_json(s, "driver.jump_sizes"));
        }
    }
    return out;
}

std::vector<double> jump_times(const Json& spec)
{
    if (!spec.contains("jump_times")) return {};
    if (!spec.at("jump_times").is_array()) throw ConfigError("expected an array", "driver.jump_times");
    return spec.at("jump_times").get<std::vector<double>>();
}

JumpLaw jump_law(const Json& spec)
{
    if (!spec.contains("law")) return FixedJump{};
    const auto& law = spec.at("law");
    const auto kind = law.value("kind", std::string("fixed"));
    if (kind == "fixed") return FixedJump{law.value("value", 1.0)};
    if (kind == "uniform") return UniformJump{law.value("lo", -1.0), law.value("hi", 1.0)};
    if (kind == "gaussian") return GaussianJump{law.value("mean", 0.0), law.value("sd", 1.0)};
    throw ConfigError("unknown jump law '" + kind + "'", "driver.law.kind");
}

}  // namespace

int Scenario::line_of(const std::string& key) const
{
    const auto pos = text.find('"' + key + '"');
    return pos == std::string::npos ? 0 : line_at_offset(text, pos);
}

Json Scenario::echo() const
{
    Json j;
    j["name"] = name;
    j["module"] = module;
    j["experiment"] = experiment;
    if (criterion) j["criterion"] = criterion;
    if (!title.empty()) j["title"] = title;
    j["source"] = source.filename().string();
    j["seeds"] = seeds;
    j["driver"] = driver;
    if (!field.is_null()) j["field"] = field;
    j["params"] = params;
    j["thresholds"] = thresholds;
    j["output"] = output;
    return j;
}

Scenario parse_scenario(const std::string& text, const std::string& source)
{
    Scenario s;
    s.source = source;
    s.text = text;
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::parse_error& e) {
        const int line = line_at_offset(text, e.byte == 0 ? 0 : e.byte - 1);
        throw ConfigError(source + ":" + std::to_string(line) + ": parse error: " + e.what(), "<document>", line);
    }
    if (!j.is_object()) fail(s, "scenario must be a JSON object", "<document>");

    auto str = [&](const std::string& key, bool required) -> std::string {
        if (!j.contains(key)) {
            if (required) fail(s, "missing required key", key);
            return {};
        }
        if (!j.at(key).is_string() || j.at(key).get<std::string>().empty()) fail(s, "expected a non-empty string", key);
        return j.at(key).get<std::string>();
    };
    s.name = str("name", true);
    s.module = str("module", true);
    s.experiment = str("experiment", true);
    s.title = str("title", false);
    s.output = str("output", false);
    if (s.output.empty()) s.output = s.name;
    if (s.output.find("..") != std::string::npos || s.output.front() == '/') fail(s, "must be a relative name", "output");
    if (!experiments().contains(s.module + "." + s.experiment))
        fail(s, "unknown experiment '" + s.module + "." + s.experiment + "'", "experiment");

    if (!j.contains("seeds")) fail(s, "missing required key (seeds must be explicit)", "seeds");
    const auto& seeds = j.at("seeds");
    if (!seeds.is_array()) fail(s, "expected an array of non-negative integers", "seeds");
    if (seeds.empty()) fail(s, "seed list is empty", "seeds");
    for (const auto& v : seeds) {
        if (!v.is_number_integer() || v.get<long long>() < 0) fail(s, "seeds must be non-negative integers", "seeds");
        s.seeds.push_back(v.get<std::uint64_t>());
    }

    if (!j.contains("driver") || !j.at("driver").is_object()) fail(s, "missing driver object", "driver");
    s.driver = j.at("driver");
    if (!s.driver.contains("kind") || !s.driver.at("kind").is_string()) fail(s, "missing driver kind", "driver.kind");
    const auto kind = s.driver.at("kind").get<std::string>();
    if (std::find(driver_kinds().begin(), driver_kinds().end(), kind) == driver_kinds().end())
        fail(s, "unknown driver kind '" + kind + "'", "driver.kind");
    for (const char* key : {"horizon", "dt"})
        if (s.driver.contains(key) && (!s.driver.at(key).is_number() || s.driver.at(key).get<double>() <= 0.0))
            fail(s, "must be a positive number", std::string("driver.") + key);

    if (j.contains("field")) {
        s.field = j.at("field");
        try {
            (void)field_from_json(s.field);
        } catch (const ConfigError& e) {
            fail(s, e.what(), e.field);
        }
    }
    for (const char* key : {"params", "thresholds"}) {
        if (!j.contains(key)) continue;
        if (!j.at(key).is_object()) fail(s, "expected an object", key);
        (std::string(key) == "params" ? s.params : s.thresholds) = j.at(key);
    }
    for (const auto& [k, v] : s.thresholds.items())
        if (!v.is_number()) fail(s, "thresholds must be numbers", "thresholds." + k);
    if (j.contains("criterion")) {
        if (!j.at("criterion").is_number_integer()) fail(s, "expected an integer", "criterion");
        s.criterion = j.at("criterion").get<int>();
    }
    static const std::vector<std::string> known = {"name",   "module",     "experiment", "title",     "output",
                                                   "seeds",  "driver",     "field",      "params",    "thresholds",
                                                   "criterion"};
    for (const auto& [k, v] : j.items())
        if (std::find(known.begin(), known.end(), k) == known.end()) fail(s, "unknown key", k);
    return s;
}

Scenario load_scenario(const std::filesystem::path& path)
{
    std::string text;
    try {
        text = read_text(path);
    } catch (const Error& e) {
        throw ConfigError(e.what(), "<file>");
    }
    return parse_scenario(text, path.string());
}

DriverPath build_driver(const Json& spec, std::uint64_t seed, std::optional<double> dt_override)
{
    const auto kind = spec.value("kind", std::string());
    const double horizon = num(spec, "horizon", 1.0);
    const double dt = dt_override.value_or(num(spec, "dt", 1e-3));
    const int dim = static_cast<int>(num(spec, "dim", 1));
    if (kind == "brownian") return gen_brownian(seed, horizon, dt, dim);
    if (kind == "brownian_with_jumps") return brownian_with_jumps(seed, horizon, dt, jump_times(spec), jump_sizes(spec, dim));
    if (kind == "compound_poisson")
        return gen_compound_poisson(seed, horizon, num(spec, "rate", 1.0), jump_law(spec), dt, dim);
    if (kind == "levy") {
        LevyParams lp{num(spec, "alpha", 1.5), num(spec, "scale", 1.0), num(spec, "sigma", 1.0)};
        return gen_levy_truncated(seed, horizon, dt, lp, num(spec, "eps_qv", 1e-3)).path;
    }
    if (kind == "deterministic_time") return deterministic_time(horizon, dt);
    if (kind == "jump_path") return jump_path(horizon, jump_times(spec), jump_sizes(spec, dim), dt);
    throw ConfigError("unknown driver kind '" + kind + "'", "driver.kind");
}

// ---------------------------------------------------------------- reports

namespace {

std::string cmp_name(Cmp c)
{
    switch (c) {
    case Cmp::le: return "<=";
    case Cmp::ge: return ">=";
    case Cmp::eq: return "==";
    case Cmp::lt: return "<";
    case Cmp::gt: return ">";
    }
    return "?";
}

bool compare(double v, double t, Cmp c)
{
    switch (c) {
    case Cmp::le: return v <= t;
    case Cmp::ge: return v >= t;
    case Cmp::eq: return v == t;
    case Cmp::lt: return v < t;
    case Cmp::gt: return v > t;
    }
    return false;
}

Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(fmt_double(v)); }

}  // namespace

Json RunReport::to_json(bool for_digest) const
{
    Json j;
    j["scenario"] = scenario;
    Json checks_json = Json::array();
    for (const auto& c : checks)
        checks_json.push_back({{"name", c.name},
                               {"value", finite_or_null(c.value)},
                               {"cmp", cmp_name(c.cmp)},
                               {"threshold", finite_or_null(c.threshold)},
                               {"pass", c.pass}});
    j["checks"] = checks_json;
    j["results"] = results;
    Json files = Json::array();
    for (const auto& m : manifest) files.push_back({{"file", m.file}, {"bytes", m.bytes}, {"sha256", m.sha256}});
    j["manifest"] = files;
    if (!error.empty()) j["error"] = error;
    j["pass"] = pass;
    if (!for_digest) j["timing"] = {{"wall_seconds", wall_seconds}};
    return j;
}

std::string RunReport::digest() const { return sha256_hex(to_json(true).dump()); }

std::string sha256_hex(const std::string& data)
{
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) throw Error("sha256 failed");
    std::string out;
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", md[i]);
        out += buf;
    }
    return out;
}

// ---------------------------------------------------------------- context

RunContext::RunContext(const Scenario& s, const RunOptions& opts, RunReport& report)
    : s_(s), opts_(opts), report_(report), seeds_(s.seeds), dir_(opts.out / s.output)
{
    // the override keeps the seed count: S, S+1, ...
    if (opts.seed_override)
        for (std::size_t i = 0; i < seeds_.size(); ++i) seeds_[i] = *opts.seed_override + i;
    report_.results["seeds_used"] = seeds_;
}

DriverPath RunContext::driver(std::uint64_t seed) const { return build_driver(s_.driver, seed, opts_.dt_override); }

DriverPath RunContext::driver(std::uint64_t seed, double dt) const { return build_driver(s_.driver, seed, dt); }

double RunContext::base_dt() const { return opts_.dt_override.value_or(s_.driver.value("dt", 1e-3)); }

double RunContext::param(const std::string& key, double fallback)
{
    double v = fallback;
    if (s_.params.contains(key)) {
        if (!s_.params.at(key).is_number()) fail(s_, "expected a number", "params." + key);
        v = s_.params.at(key).get<double>();
    }
    report_.results["params"][key] = v;
    return v;
}

int RunContext::param_int(const std::string& key, int fallback)
{
    int v = fallback;
    if (s_.params.contains(key)) {
        if (!s_.params.at(key).is_number_integer()) fail(s_, "expected an integer", "params." + key);
        v = s_.params.at(key).get<int>();
    }
    report_.results["params"][key] = v;
    return v;
}

std::vector<double> RunContext::param_list(const std::string& key, std::vector<double> fallback)
{
    std::vector<double> v = std::move(fallback);
    if (s_.params.contains(key)) {
        const auto& j = s_.params.at(key);
        if (!j.is_array() || j.empty()) fail(s_, "expected a non-empty array of numbers", "params." + key);
        v.clear();
        for (const auto& e : j) {
            if (!e.is_number()) fail(s_, "expected a number", "params." + key);
            v.push_back(e.get<double>());
        }
    }
    report_.results["params"][key] = v;
    return v;
}

std::string RunContext::param_string(const std::string& key, const std::string& fallback)
{
    std::string v = fallback;
    if (s_.params.contains(key)) {
        if (!s_.params.at(key).is_string()) fail(s_, "expected a string", "params." + key);
        v = s_.params.at(key).get<std::string>();
    }
    report_.results["params"][key] = v;
    return v;
}

FieldSpec RunContext::param_field(const std::string& key, const FieldSpec& fallback)
{
    FieldSpec v = fallback;
    if (s_.params.contains(key)) {
        try {
            v = field_from_json(s_.params.at(key));
        } catch (const ConfigError& e) {
            fail(s_, e.what(), "params." + key);
        }
    }
    report_.results["params"][key] = field_to_json(v);
    return v;
}

FieldSpec RunContext::field(const FieldSpec& fallback)
{
    FieldSpec v = s_.field.is_null() ? fallback : field_from_json(s_.field);
    report_.results["field"] = field_to_json(v);
    return v;
}

double RunContext::threshold(const std::string& key, double fallback)
{
    const double v = s_.thresholds.contains(key) ? s_.thresholds.at(key).get<double>() : fallback;
    report_.results["thresholds"][key] = v;
    return v;
}

bool RunContext::check(const std::string& name, double value, const std::string& threshold_key, double fallback,
                       Cmp cmp)
{
    const double t = threshold(threshold_key, fallback);
    Check c{name, value, t, cmp, compare(value, t, cmp)};
    report_.checks.push_back(c);
    return c.pass;
}

void RunContext::emit(const std::string& file, const std::string& content)
{
    write_text(dir_ / file, content);
    report_.manifest.push_back({file, content.size(), sha256_hex(content)});
}

void RunContext::emit_json(const std::string& file, const Json& j) { emit(file, j.dump(2) + "\n"); }

// ---------------------------------------------------------------- running

RunReport run_scenario(const Scenario& s, const RunOptions& opts)
{
    RunReport report;
    report.scenario = s.echo();
    const auto t0 = std::chrono::steady_clock::now();
    try {
        RunContext ctx(s, opts, report);
        experiments().at(s.module + "." + s.experiment)(ctx);
        report.pass = !report.checks.empty() &&
                      std::all_of(report.checks.begin(), report.checks.end(), [](const Check& c) { return c.pass; });
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        report.error = s.module + "." + s.experiment + ": " + e.what();
        report.pass = false;
    }
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_text(opts.out / s.output / "report.json", report.to_json().dump(2) + "\n");
    return report;
}

bool SuiteReport::pass() const
{
    return config_errors.empty() &&
           std::all_of(runs.begin(), runs.end(), [](const auto& r) { return r.second.pass; });
}

Json SuiteReport::to_json(bool for_digest) const
{
    Json j;
    Json runs_json = Json::array();
    std::size_t passed = 0;
    for (const auto& [file, r] : runs) {
        passed += r.pass ? 1 : 0;
        Json e{{"file", file}, {"name", r.scenario.value("name", "")}, {"pass", r.pass}, {"digest", r.digest()}};
        if (!r.error.empty()) e["error"] = r.error;
        if (!for_digest) e["wall_seconds"] = r.wall_seconds;
        runs_json.push_back(e);
    }
    j["runs"] = runs_json;
    Json errs = Json::array();
    for (const auto& [file, msg] : config_errors) errs.push_back({{"file", file}, {"error", msg}});
    j["config_errors"] = errs;
    j["total"] = runs.size() + config_errors.size();
    j["passed"] = passed;
    j["pass"] = pass();
    return j;
}

SuiteReport run_suite(const std::filesystem::path& dir, const RunOptions& opts)
{
    if (!std::filesystem::is_directory(dir)) throw ConfigError("not a directory: " + dir.string(), "<suite>");
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());

    struct Slot {
        std::optional<RunReport> report;
        std::string config_error;
    };
    std::vector<Slot> slots(files.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < files.size();) {
            try {
                slots[i].report = run_scenario(load_scenario(files[i]), opts);
            } catch (const std::exception& e) {
                slots[i].config_error = e.what();
            }
        }
    };
    const auto n = static_cast<std::size_t>(std::max(1, opts.workers));
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < std::min(n, files.size()); ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();

    SuiteReport suite;
    for (std::size_t i = 0; i < files.size(); ++i) {
        const auto name = files[i].filename().string();
        if (slots[i].report) {
            suite.runs.emplace_back(name, std::move(*slots[i].report));
        } else {
            suite.config_errors.emplace_back(name, slots[i].config_error);
        }
    }
    write_text(opts.out / "suite.json", suite.to_json().dump(2) + "\n");
    return suite;
}

// ---------------------------------------------------------------- listings

Json list_catalog()
{
    Json j;
    Json fields = Json::array();
    for (auto c : catalog_entries())
        fields.push_back({{"name", catalog_name(c)}, {"description", catalog_description(c)}});
    j["fields"] = fields;
    j["field_variants"] = {"linear", "affine", "polynomial", "right_invariant", "catalog"};
    Json fol = Json::array();
    for (const auto& p : {cartesian_pair(), hyperbolic_pair(), secant_pair()}) fol.push_back(p.name);
    j["foliations"] = fol;
    j["groups"] = {group_name(GroupTag::so2), group_name(GroupTag::so3), group_name(GroupTag::so2xso2)};
    j["drivers"] = driver_kinds();
    Json exps = Json::array();
    for (const auto& [k, v] : experiments()) exps.push_back(k);
    j["experiments"] = exps;
    return j;
}

Json scenario_schema()
{
    Json str = {{"type", "string"}, {"minLength", 1}};
    Json driver = {
        {"type", "object"},
        {"required", {"kind"}},
        {"properties",
         {{"kind", {{"enum", driver_kinds()}}},
          {"horizon", {{"type", "number"}, {"exclusiveMinimum", 0}}},
          {"dt", {{"type", "number"}, {"exclusiveMinimum", 0}}},
          {"dim", {{"type", "integer"}, {"minimum", 1}}},
          {"jump_times", {{"type", "array"}, {"items", {{"type", "number"}}}}},
          {"jump_sizes", {{"type", "array"}}},
          {"rate", {{"type", "number"}}},
          {"law", {{"type", "object"}}},
          {"alpha", {{"type", "number"}}},
          {"scale", {{"type", "number"}}},
          {"sigma", {{"type", "number"}}},
          {"eps_qv", {{"type", "number"}}}}}};
    Json exps = Json::array();
    for (const auto& [k, v] : experiments()) exps.push_back(k.substr(k.find('.') + 1));
    Json mods = Json::array();
    for (const auto& [k, v] : experiments()) {
        const auto m = k.substr(0, k.find('.'));
        if (std::find(mods.begin(), mods.end(), m) == mods.end()) mods.push_back(m);
    }
    return {{"$schema", "https://json-schema.org/draft/2020-12/schema"},
            {"title", "mflow scenario"},
            {"type", "object"},
            {"required", {"name", "module", "experiment", "seeds", "driver"}},
            {"additionalProperties", false},
            {"properties",
             {{"name", str},
              {"module", {{"enum", mods}}},
              {"experiment", {{"enum", exps}}},
              {"title", str},
              {"output", str},
              {"criterion", {{"type", "integer"}}},
              {"seeds", {{"type", "array"}, {"minItems", 1}, {"items", {{"type", "integer"}, {"minimum", 0}}}}},
              {"driver", driver},
              {"field", {{"type", "object"}, {"required", {"variant"}}}},
              {"params", {{"type", "object"}}},
              {"thresholds", {{"type", "object"}, {"additionalProperties", {{"type", "number"}}}}}}}};
}

}  // namespace mflow
