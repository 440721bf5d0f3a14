// mflow: run scenario files and suites.
//
//   mflow run scenarios/acceptance/c01_rotation.json --out out
//   mflow suite scenarios/acceptance --out out --workers 2
//   mflow list-catalog
//   mflow emit-schema
//
// Exit status: 0 all checks pass, 1 a check failed or a run errored,
// 2 configuration error.

#include <iostream>

#include <CLI11.hpp>

#include "mflow/errors.hpp"
#include "mflow/scenario.hpp"

namespace {

void print_report(const std::string& label, const mflow::RunReport& r)
{
    std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << label << "  (" << r.wall_seconds << " s)\n";
    for (const auto& c : r.checks) {
        std::cout << "    " << (c.pass ? "ok   " : "FAIL ") << c.name << " = " << mflow::fmt_double(c.value)
                  << " (threshold " << mflow::fmt_double(c.threshold) << ")\n";
    }
    if (!r.error.empty()) std::cout << "    error: " << r.error << "\n";
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Marcus flow decomposition experiments"};
    app.require_subcommand(1);

    mflow::RunOptions opts;
    std::string out = "out";
    std::optional<std::uint64_t> seed_override;
    std::optional<double> dt_override;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--out", out, "output directory")->capture_default_str();
        sub->add_option("--seed-override", seed_override, "replace the seed list with S, S+1, ...");
        sub->add_option("--dt-override", dt_override, "replace the driver step (coarsest level for refinements)")
            ->check(CLI::PositiveNumber);
    };

    std::string scenario_file;
    auto* run = app.add_subcommand("run", "run one scenario file");
    run->add_option("scenario", scenario_file, "scenario JSON file")->required()->check(CLI::ExistingFile);
    add_common(run);

    std::string suite_dir;
    auto* suite = app.add_subcommand("suite", "run every scenario in a directory");
    suite->add_option("directory", suite_dir, "directory of scenario JSON files")->required()->check(CLI::ExistingDirectory);
    suite->add_option("--workers", opts.workers, "scenarios run concurrently")->capture_default_str()->check(CLI::PositiveNumber);
    add_common(suite);

    auto* catalog = app.add_subcommand("list-catalog", "list fields, foliations, groups, drivers and experiments");
    auto* schema = app.add_subcommand("emit-schema", "print the scenario JSON schema");

    CLI11_PARSE(app, argc, argv);
    opts.out = out;
    opts.seed_override = seed_override;
    opts.dt_override = dt_override;

    try {
        if (*catalog) {
            std::cout << mflow::list_catalog().dump(2) << "\n";
            return 0;
        }
        if (*schema) {
            std::cout << mflow::scenario_schema().dump(2) << "\n";
            return 0;
        }
        if (*run) {
            const auto s = mflow::load_scenario(scenario_file);
            const auto report = mflow::run_scenario(s, opts);
            print_report(s.name, report);
            std::cout << "report: " << (opts.out / s.output / "report.json").string() << "\n"
                      << "digest: " << report.digest() << "\n";
            return report.pass ? 0 : 1;
        }
        const auto result = mflow::run_suite(suite_dir, opts);
        for (const auto& [file, r] : result.runs) print_report(file, r);
        for (const auto& [file, msg] : result.config_errors) std::cout << "[CONFIG] " << file << ": " << msg << "\n";
        std::cout << "summary: " << (opts.out / "suite.json").string() << "\n";
        return result.pass() ? 0 : 1;
    } catch (const mflow::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
