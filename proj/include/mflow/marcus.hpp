#pragma once

#include <string>
#include <vector>

#include "mflow/driver.hpp"
#include "mflow/fields.hpp"

namespace mflow {

struct JumpRecord {
    std::size_t index = 0;
    double time = 0.0;
    Vec pre;
    Vec size;
    Vec post;
    std::vector<Vec> samples;  // transport curve at u = i / substeps
    int substeps = 0;
};

enum class PathStatus { complete, stopped };

struct StatePath {
    std::vector<double> grid;
    Mat states;  // n x (N+1); NaN after a stop
    std::vector<JumpRecord> jumps;
    std::vector<int> jump_at;  // per grid index, -1 if no jump
    PathStatus status = PathStatus::complete;
    double stop_time = 0.0;
    std::string stop_reason;

    bool complete() const { return status == PathStatus::complete; }
    std::size_t points() const { return grid.size(); }
    Vec state(std::size_t i) const { return states.col(static_cast<Eigen::Index>(i)); }
    Vec final_state() const { return states.col(states.cols() - 1); }
    const JumpRecord* jump(std::size_t i) const
    {
        return jump_at[i] < 0 ? nullptr : &jumps[static_cast<std::size_t>(jump_at[i])];
    }
};

struct MatrixFlowPath {
    std::vector<double> times;
    std::vector<Mat> flows;
    Mat generator;
};

// Euler jumps (x + X(x) dz) exist only to show the Marcus transport matters.
enum class JumpRule { marcus, euler };

struct SolveOptions {
    JumpRule jump_rule = JumpRule::marcus;
    int min_substeps = 0;
    bool keep_samples = true;
};

// Heun on the continuous increments; at a jump the continuous part of the
// step is applied first, then the time-one flow of X dz.
StatePath solve_path(const VectorField& field, const DriverPath& z, const Vec& x0,
                     const SolveOptions& opts = {});
StatePath solve_path(const FieldSpec& field, const DriverPath& z, const Vec& x0,
                     const SolveOptions& opts = {});

// Solves for several initial states sharing one driver (OpenMP).
std::vector<StatePath> solve_many(const VectorField& field, const DriverPath& z,
                                  const std::vector<Vec>& x0s, const SolveOptions& opts = {});

// F(t_i) = exp(A Z(t_i)); scalar drivers only.
MatrixFlowPath solve_linear_exact(const Mat& a, const DriverPath& z);

// Exact solution for linear or affine fields with a scalar driver. Throws
// ParameterError for other fields.
StatePath solve_exact(const FieldSpec& field, const DriverPath& z, const Vec& x0);
bool has_exact_solution(const FieldSpec& field);

// Extended integral of g along a solved path: left-point sum, the
// continuous quadratic-variation correction and the jump u-average.
Vec marcus_integral(const VectorField& g, const VectorField& x, const StatePath& path,
                    const DriverPath& z);

// max_i |f(x_i) - y_i| with y solving the pushforward equation from f(x0).
double change_of_variables_check(const Diffeo& f, const FieldSpec& field, const DriverPath& z,
                                 const Vec& x0);

// Composite Simpson on equally spaced samples over [0, 1]; trapezoid if the
// interval count is odd.
Vec simpson_average(const std::vector<Vec>& samples);

}  // namespace mflow
