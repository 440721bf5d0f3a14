#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "mflow/linalg.hpp"

namespace mflow {

struct JumpEvent {
    double time = 0.0;
    Vec size;
    std::size_t index = 0;  // grid index holding the post-jump value
    Vec pre;                // Z(time-)
};

// Cadlag driver sample on a grid. Column i of `values` is Z(t_i) after any
// jump at t_i. Column i of `increments` is the continuous part of
// Z(t_i-) - Z(t_{i-1}); column 0 is zero.
struct DriverPath {
    double horizon = 0.0;
    int dim = 1;
    std::vector<double> grid;
    Mat values;
    Mat increments;
    Mat qv_c;  // (dim*dim) x (N+1), cumulative [Z,Z]^c, column-major blocks
    std::vector<JumpEvent> jumps;
    std::vector<int> jump_at;  // per grid index: index into jumps or -1

    // provenance, echoed into the JSON header
    std::string kind;
    std::uint64_t seed = 0;
    std::map<std::string, double> params;

    std::size_t points() const { return grid.size(); }
    std::size_t steps() const { return grid.empty() ? 0 : grid.size() - 1; }
    Vec value(std::size_t i) const { return values.col(static_cast<Eigen::Index>(i)); }
    Vec increment(std::size_t i) const { return increments.col(static_cast<Eigen::Index>(i)); }
    Mat qv_increment(std::size_t i) const;
    Mat qv_at(std::size_t i) const;
    const JumpEvent* jump(std::size_t i) const
    {
        return jump_at[i] < 0 ? nullptr : &jumps[static_cast<std::size_t>(jump_at[i])];
    }
    double jump_square_sum() const;
    // First grid index whose time is >= t - tol.
    std::size_t index_at(double t) const;
};

struct FixedJump {
    double value = 1.0;
};
struct UniformJump {
    double lo = -1.0;
    double hi = 1.0;
};
struct GaussianJump {
    double mean = 0.0;
    double sd = 1.0;
};
using JumpLaw = std::variant<FixedJump, UniformJump, GaussianJump>;

struct LevyParams {
    double alpha = 1.5;  // power-law index of the Levy density c|z|^{-1-alpha}
    double scale = 1.0;  // c
    double sigma = 1.0;  // Brownian component
};

struct LevyResult {
    DriverPath path;
    double tail_qv_bound = 0.0;
    double threshold = 0.0;  // explicit jumps have |size| >= threshold
};

struct QuadraticVariation {
    Mat continuous;
    Mat discrete;
};

DriverPath gen_brownian(std::uint64_t seed, double horizon, double dt, int dim = 1);

// `dt` only shapes the grid; the path is constant between jumps.
DriverPath gen_compound_poisson(std::uint64_t seed, double horizon, double rate,
                                const JumpLaw& law, double dt = 0.0, int dim = 1);

LevyResult gen_levy_truncated(std::uint64_t seed, double horizon, double dt,
                              const LevyParams& levy, double eps_qv);

// Jump size threshold that keeps the expected omitted square sum at eps_qv.
double levy_threshold(const LevyParams& levy, double horizon, double eps_qv);

DriverPath deterministic_time(double horizon, double dt);

// Zero path with the given jumps (deterministic test mode).
DriverPath jump_path(double horizon, const std::vector<double>& times,
                     const std::vector<Vec>& sizes, double dt = 0.0);

// Adds jumps to an existing path, inserting grid points where needed. The
// continuous increment of a split step is bridged with a seeded sample.
DriverPath inject_jumps(const DriverPath& base, const std::vector<double>& times,
                        const std::vector<Vec>& sizes);

DriverPath brownian_with_jumps(std::uint64_t seed, double horizon, double dt,
                               const std::vector<double>& times, const std::vector<Vec>& sizes);

QuadraticVariation quadratic_variation(const DriverPath& path);

// Keep every `factor`-th grid point. Jumps must sit on kept points. The
// continuous QV is re-realized from the coarse increments.
DriverPath coarsen(const DriverPath& path, std::size_t factor);

// Same grid and values; jumps with |size| < threshold are folded into the
// continuous increment of their step.
DriverPath remove_small_jumps(const DriverPath& path, double threshold);

// Coarse has the grid and values of fine and a subset of its jumps.
bool is_coupled(const DriverPath& fine, const DriverPath& coarse);

// Jump sizes present in fine but not in coarse.
std::vector<JumpEvent> omitted_jumps(const DriverPath& fine, const DriverPath& coarse);

}  // namespace mflow
