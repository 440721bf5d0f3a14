// Acceptance runner: one [PASS]/[FAIL] line per criterion.
//
//   acceptance <scenario dir> <output dir>
//
// Criteria 1-11 are scenario files carrying a "criterion" number; criterion
// 12 re-runs every scenario and compares report digests.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include "mflow/errors.hpp"
#include "mflow/scenario.hpp"

namespace {

// Only criterion 8 carries a runtime limit.
constexpr double kExample1MaxSeconds = 120.0;

std::string summarize(const mflow::RunReport& r)
{
    std::ostringstream os;
    bool first = true;
    for (const auto& c : r.checks) {
        os << (first ? "" : "; ") << c.name << "=" << mflow::fmt_double(c.value) << (c.pass ? "" : " (FAILED)");
        first = false;
    }
    if (!r.error.empty()) os << (first ? "" : "; ") << "error: " << r.error;
    return os.str();
}

}  // namespace

int main(int argc, char** argv)
{
    if (argc < 2) {
        std::cerr << "usage: acceptance <scenario dir> [output dir]\n";
        return 2;
    }
    const std::filesystem::path dir = argv[1];
    mflow::RunOptions opts;
    opts.out = argc > 2 ? std::filesystem::path(argv[2]) : std::filesystem::path("acceptance_out");

    std::map<int, std::pair<mflow::Scenario, mflow::RunReport>> runs;
    bool all = true;
    try {
        std::vector<std::filesystem::path> files;
        for (const auto& e : std::filesystem::directory_iterator(dir))
            if (e.path().extension() == ".json") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            auto s = mflow::load_scenario(f);
            if (s.criterion <= 0) continue;
            auto r = mflow::run_scenario(s, opts);
            bool pass = r.pass;
            std::string extra;
            if (s.criterion == 8) {
                pass = pass && r.wall_seconds <= kExample1MaxSeconds;
                extra = "; runtime=" + mflow::fmt_double(std::round(r.wall_seconds * 10) / 10) + "s (limit " +
                        mflow::fmt_double(kExample1MaxSeconds) + "s)";
            }
            all = all && pass;
            std::cout << (pass ? "[PASS] " : "[FAIL] ") << s.criterion << ". " << s.title << ": " << summarize(r)
                      << extra << std::endl;
            runs.emplace(s.criterion, std::make_pair(std::move(s), std::move(r)));
        }
    } catch (const mflow::ConfigError& e) {
        std::cout << "[FAIL] configuration: " << e.what() << std::endl;
        return 1;
    }

    for (int c = 1; c <= 11; ++c)
        if (!runs.contains(c)) {
            all = false;
            std::cout << "[FAIL] " << c << ". missing scenario for this criterion" << std::endl;
        }

    // 12: second pass, digests must match
    int mismatched = 0;
    for (const auto& [c, run] : runs) {
        const auto again = mflow::run_scenario(run.first, opts);
        mismatched += again.digest() != run.second.digest() ? 1 : 0;
    }
    const bool det = mismatched == 0 && !runs.empty();
    all = all && det;
    std::cout << (det ? "[PASS] " : "[FAIL] ") << "12. Determinism: " << runs.size() - static_cast<std::size_t>(mismatched)
              << "/" << runs.size() << " report digests identical across two runs" << std::endl;
    return all ? 0 : 1;
}
