#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "mflow/driver.hpp"
#include "mflow/fields.hpp"

namespace mflow {

// Evaluates the flow of a planar field along one fixed driver sample.
// Transitions phi_{s,t} are re-solved forward from the given state, using the
// driver increments on (s, t]. Thread safe.
class FlowSampler {
public:
    FlowSampler(FieldSpec field, DriverPath z);

    const DriverPath& driver() const { return z_; }
    const FieldSpec& field() const { return spec_; }
    std::size_t points() const { return z_.points(); }
    bool exact() const { return exact_; }

    Vec flow(std::size_t i, const Vec& x) const { return transition(0, i, x); }
    // `left` stops just before any jump at index `to`.
    Vec transition(std::size_t from, std::size_t to, const Vec& x, bool left = false) const;
    // d phi^2 / dy of the transition at x, central differences with step h.
    double vertical_det(std::size_t from, std::size_t to, const Vec& x, double h, bool left = false) const;

    std::size_t cache_size() const;

private:
    Vec solve(std::size_t from, std::size_t to, const Vec& x, bool left) const;

    FieldSpec spec_;
    DriverPath z_;
    FieldPtr field_;
    bool exact_ = false;
    Mat gen_;  // linear or augmented affine generator
    bool affine_ = false;

    using Key = std::tuple<std::size_t, std::size_t, bool, double, double>;
    mutable std::mutex mu_;
    mutable std::map<Key, Vec> cache_;
};

using SamplerPtr = std::shared_ptr<const FlowSampler>;

struct Window {
    Vec center;
    double rx = 0.5;
    double ry = 0.5;
    bool contains(const Vec& p) const
    {
        return std::abs(p[0] - center[0]) <= rx && std::abs(p[1] - center[1]) <= ry;
    }
    double radius() const { return std::max(rx, ry); }
};

inline constexpr double kFlowEpsDet = 1e-6;

// Factorization of the transition phi = phi_{s,t} on a window:
// psi(x, y) = (x, phi^2(x, y)), eta(a, b) = (phi^1(a, beta(a, b)), b) with
// phi^2(a, beta(a, b)) = b.
struct PointFactorization {
    SamplerPtr sampler;
    std::size_t from = 0;
    std::size_t to = 0;
    double time = 0.0;
    Vec x0;
    Window window;
    int resolution = 0;
    std::vector<double> xs, ys;  // grid nodes
    Mat psi2;                    // phi^2 at (xs[i], ys[j])
    Mat beta;                    // beta at (xs[i], ys[j]); NaN where Newton failed
    Mat eta1;                    // phi^1(xs[i], beta)
    Mat det;                     // d phi^2 / dy at the nodes
    int masked = 0;
    double residual = 0.0;       // max |eta(psi(p)) - phi(p)| over unmasked nodes

    Vec psi(const Vec& p) const;
    // Newton for beta seeded at `seed` (defaults to p[1]).
    Vec eta(const Vec& p, std::optional<double> seed = std::nullopt) const;
};

// Damped Newton for y with phi^2_{from,to}(a, y) = b. Returns nullopt if it
// does not converge.
std::optional<double> solve_beta(const FlowSampler& s, std::size_t from, std::size_t to, double a, double b,
                                 double seed, double h);

PointFactorization pointwise_decompose(const SamplerPtr& sampler, std::size_t from, std::size_t to,
                                       const Vec& x0, const Window& window, int resolution = 9,
                                       double eps_det = kFlowEpsDet);

struct FlowBreakdown {
    std::optional<std::size_t> index;
    std::optional<double> time;
    bool crossing = false;
};

// First grid index after `from` where |d phi^2_{from,t}/dy| at the tracked
// point drops below eps_det or changes sign over a continuous step.
FlowBreakdown detect_breakdown(const FlowSampler& s, const Vec& x0, std::size_t from = 0,
                               double eps_det = kFlowEpsDet, double h = 1e-5);

struct AlternateFactorization {
    SamplerPtr sampler;
    Vec x0;
    std::vector<std::size_t> breakpoints;  // grid indices s_0 = 0 < s_1 < ... < s_r
    std::vector<PointFactorization> factors;  // factor i covers [s_i, s_{i+1}]
    std::vector<Vec> anchors;                 // phi_{s_i}(x0)
    double margin = 0.0;
    double eps_det = kFlowEpsDet;
    bool stalled = false;
    std::string diagnostic;

    std::size_t restarts() const { return factors.empty() ? 0 : factors.size() - 1; }
    std::size_t last_index() const { return breakpoints.back(); }
    std::vector<double> breakpoint_times() const;
};

AlternateFactorization alternate_decompose(const SamplerPtr& sampler, const Vec& x0, double horizon,
                                           double eps_det, double margin, double window_radius = 0.5,
                                           int resolution = 5);

// Applies the factor pairs right to left at grid index i (left-limit
// convention at breakpoints). Throws DomainError outside the windows.
Vec recompose(const AlternateFactorization& fac, std::size_t i, const Vec& x);

}  // namespace mflow
