#include "mflow/driver.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mflow/errors.hpp"

namespace mflow {

namespace {

constexpr std::uint64_t kJumpStream = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kBridgeStream = 0xD1B54A32D192ED03ULL;

std::uint64_t mix(std::uint64_t a, std::uint64_t b)
{
    std::uint64_t z = a ^ (b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2));
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::vector<double> base_grid(double horizon, double dt)
{
    if (!(horizon > 0.0) || !std::isfinite(horizon))
        throw ParameterError("driver: horizon T must be positive");
    if (!(dt > 0.0) || !std::isfinite(dt))
        throw ParameterError("driver: dt must be positive");
    if (dt > horizon * (1.0 + 1e-12))
        throw ParameterError("driver: dt must not exceed T");
    const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil(horizon / dt - 1e-9)));
    std::vector<double> g(n + 1);
    for (std::size_t i = 0; i < n; ++i) g[i] = static_cast<double>(i) * dt;
    g[n] = horizon;
    return g;
}

struct ContinuousModel {
    Mat increments;      // dim x N over the base grid
    bool martingale;     // realized squares enter [Z,Z]^c
    double variance;     // per unit time, for bridging
    std::uint64_t bridge_seed;
};

struct Node {
    double t;
    Vec cont;
    Vec jump;
    bool has_jump = false;
};

DriverPath assemble(const std::vector<double>& grid, int dim, const ContinuousModel& model,
                    const std::vector<double>& jump_times, const std::vector<Vec>& jump_sizes)
{
    const double horizon = grid.back();
    const double tol = 1e-12 * std::max(1.0, horizon);
    const std::size_t n = grid.size() - 1;

    // inserted[j]: jump points strictly inside base step j; snapped: on grid
    std::vector<std::vector<std::pair<double, Vec>>> inserted(n);
    std::vector<Vec> snapped(grid.size(), Vec());
    for (std::size_t q = 0; q < jump_times.size(); ++q) {
        const double s = jump_times[q];
        const Vec& size = jump_sizes[q];
        if (size.size() != dim) throw ParameterError("driver: jump size dimension mismatch");
        if (!(s > tol) || s > horizon + tol)
            throw ParameterError("driver: jump time outside (0, T]");
        if (size.norm() == 0.0) continue;
        auto it = std::lower_bound(grid.begin(), grid.end(), s - tol);
        const auto i = static_cast<std::size_t>(it - grid.begin());
        if (i < grid.size() && std::abs(grid[i] - s) <= tol) {
            snapped[i] = snapped[i].size() ? Vec(snapped[i] + size) : size;
        } else {
            auto& bucket = inserted[i - 1];
            auto same = std::find_if(bucket.begin(), bucket.end(),
                                     [&](const auto& p) { return std::abs(p.first - s) <= tol; });
            if (same != bucket.end())
                same->second += size;
            else
                bucket.emplace_back(s, size);
        }
    }

    std::vector<Node> nodes;
    nodes.reserve(grid.size() + jump_times.size());
    nodes.push_back({0.0, Vec::Zero(dim), Vec::Zero(dim), false});
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t j = 0; j < n; ++j) {
        auto& bucket = inserted[j];
        std::sort(bucket.begin(), bucket.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        Vec rem = model.increments.col(static_cast<Eigen::Index>(j));
        double cur = grid[j];
        const double end = grid[j + 1];
        if (!bucket.empty()) {
            std::mt19937_64 rng(mix(model.bridge_seed, j));
            for (const auto& [s, size] : bucket) {
                const double frac = (s - cur) / (end - cur);
                Vec sub = frac * rem;
                if (model.variance > 0.0) {
                    const double sd = std::sqrt(model.variance * (s - cur) * (end - s) / (end - cur));
                    for (int c = 0; c < dim; ++c) sub[c] += sd * normal(rng);
                }
                rem -= sub;
                nodes.push_back({s, sub, size, true});
                cur = s;
            }
        }
        Node last{end, rem, Vec::Zero(dim), false};
        if (snapped[j + 1].size()) {
            last.jump = snapped[j + 1];
            last.has_jump = true;
        }
        nodes.push_back(std::move(last));
    }

    DriverPath p;
    p.horizon = horizon;
    p.dim = dim;
    const auto np = static_cast<Eigen::Index>(nodes.size());
    p.grid.resize(nodes.size());
    p.values = Mat::Zero(dim, np);
    p.increments = Mat::Zero(dim, np);
    p.qv_c = Mat::Zero(dim * dim, np);
    p.jump_at.assign(nodes.size(), -1);
    for (Eigen::Index i = 0; i < np; ++i) {
        const Node& nd = nodes[static_cast<std::size_t>(i)];
        p.grid[static_cast<std::size_t>(i)] = nd.t;
        if (i == 0) continue;
        p.increments.col(i) = nd.cont;
        Mat dq = Mat::Zero(dim, dim);
        if (model.martingale) dq = nd.cont * nd.cont.transpose();
        p.qv_c.col(i) = p.qv_c.col(i - 1) + dq.reshaped();
        const Vec pre = p.values.col(i - 1) + nd.cont;
        if (nd.has_jump) {
            p.jump_at[static_cast<std::size_t>(i)] = static_cast<int>(p.jumps.size());
            p.jumps.push_back({nd.t, nd.jump, static_cast<std::size_t>(i), pre});
            p.values.col(i) = pre + nd.jump;
        } else {
            p.values.col(i) = pre;
        }
    }
    return p;
}

double jump_sample(const JumpLaw& law, std::mt19937_64& rng)
{
    return std::visit(
        [&](const auto& l) -> double {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, FixedJump>) {
                return l.value;
            } else if constexpr (std::is_same_v<T, UniformJump>) {
                return std::uniform_real_distribution<double>(l.lo, l.hi)(rng);
            } else {
                return std::normal_distribution<double>(l.mean, l.sd)(rng);
            }
        },
        law);
}

}  // namespace

Mat DriverPath::qv_increment(std::size_t i) const
{
    const auto c = static_cast<Eigen::Index>(i);
    Vec d = i == 0 ? Vec(Vec::Zero(dim * dim)) : Vec(qv_c.col(c) - qv_c.col(c - 1));
    return d.reshaped(dim, dim);
}

Mat DriverPath::qv_at(std::size_t i) const
{
    return Vec(qv_c.col(static_cast<Eigen::Index>(i))).reshaped(dim, dim);
}

double DriverPath::jump_square_sum() const
{
    double s = 0.0;
    for (const auto& j : jumps) s += j.size.squaredNorm();
    return s;
}

std::size_t DriverPath::index_at(double t) const
{
    const double tol = 1e-9 * std::max(1.0, horizon);
    auto it = std::lower_bound(grid.begin(), grid.end(), t - tol);
    if (it == grid.end()) return grid.size() - 1;
    return static_cast<std::size_t>(it - grid.begin());
}

DriverPath gen_brownian(std::uint64_t seed, double horizon, double dt, int dim)
{
    if (dim < 1) throw ParameterError("gen_brownian: dim must be >= 1");
    const auto grid = base_grid(horizon, dt);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto n = static_cast<Eigen::Index>(grid.size() - 1);
    Mat inc(dim, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const double sd = std::sqrt(grid[j + 1] - grid[j]);
        for (int c = 0; c < dim; ++c) inc(c, j) = sd * normal(rng);
    }
    auto p = assemble(grid, dim, {inc, true, 1.0, mix(seed, kBridgeStream)}, {}, {});
    p.kind = "brownian";
    p.seed = seed;
    p.params = {{"T", horizon}, {"dt", dt}, {"dim", dim}};
    return p;
}

DriverPath gen_compound_poisson(std::uint64_t seed, double horizon, double rate,
                                const JumpLaw& law, double dt, int dim)
{
    if (!(rate >= 0.0)) throw ParameterError("gen_compound_poisson: rate must be >= 0");
    if (dim < 1) throw ParameterError("gen_compound_poisson: dim must be >= 1");
    const auto grid = base_grid(horizon, dt > 0.0 ? dt : horizon);
    std::mt19937_64 rng(seed);
    const int count =
        rate > 0.0 ? std::poisson_distribution<int>(rate * horizon)(rng) : 0;
    std::uniform_real_distribution<double> unif(0.0, horizon);
    std::vector<double> times(static_cast<std::size_t>(count));
    std::vector<Vec> sizes(static_cast<std::size_t>(count), Vec(dim));
    for (int q = 0; q < count; ++q) {
        double s = unif(rng);
        while (s <= 0.0) s = unif(rng);
        times[static_cast<std::size_t>(q)] = s;
        for (int c = 0; c < dim; ++c) sizes[static_cast<std::size_t>(q)][c] = jump_sample(law, rng);
    }
    const auto n = static_cast<Eigen::Index>(grid.size() - 1);
    auto p = assemble(grid, dim, {Mat::Zero(dim, n), false, 0.0, 0}, times, sizes);
    p.kind = "compound_poisson";
    p.seed = seed;
    p.params = {{"T", horizon}, {"rate", rate}, {"dim", dim}};
    return p;
}

double levy_threshold(const LevyParams& levy, double horizon, double eps_qv)
{
    if (!(levy.alpha > 0.0 && levy.alpha < 2.0))
        throw ParameterError("gen_levy_truncated: alpha must lie in (0, 2)");
    if (!(eps_qv > 0.0)) throw ParameterError("gen_levy_truncated: eps_qv must be positive");
    if (!(levy.scale > 0.0)) throw ParameterError("gen_levy_truncated: scale must be positive");
    const double a = levy.alpha;
    return std::pow(eps_qv * (2.0 - a) / (2.0 * levy.scale * horizon), 1.0 / (2.0 - a));
}

LevyResult gen_levy_truncated(std::uint64_t seed, double horizon, double dt,
                              const LevyParams& levy, double eps_qv)
{
    const double delta = levy_threshold(levy, horizon, eps_qv);
    const auto grid = base_grid(horizon, dt);
    const double a = levy.alpha;
    const double c = levy.scale;
    // Expected omitted square mass per unit time, folded into the Gaussian part.
    const double small_var = 2.0 * c * std::pow(delta, 2.0 - a) / (2.0 - a);

    // Jumps in decreasing size order (series representation): a smaller
    // threshold extends the same prefix, which couples all thresholds.
    std::mt19937_64 jrng(mix(seed, kJumpStream));
    std::exponential_distribution<double> expo(1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> times;
    std::vector<Vec> sizes;
    double gamma = 0.0;
    constexpr std::size_t kMaxJumps = 2000000;
    while (true) {
        gamma += expo(jrng);
        const double sign = unif(jrng) < 0.5 ? -1.0 : 1.0;
        double s = unif(jrng) * horizon;
        const double r = std::pow(a * gamma / (2.0 * c * horizon), -1.0 / a);
        if (r < delta) break;
        if (times.size() >= kMaxJumps)
            throw ParameterError("gen_levy_truncated: eps_qv too small, jump budget exceeded");
        if (s <= 0.0) s = horizon;
        times.push_back(s);
        sizes.push_back(Vec::Constant(1, sign * r));
    }

    std::mt19937_64 brng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double var = levy.sigma * levy.sigma + small_var;
    const auto n = static_cast<Eigen::Index>(grid.size() - 1);
    Mat inc(1, n);
    for (Eigen::Index j = 0; j < n; ++j) inc(0, j) = std::sqrt(var * (grid[j + 1] - grid[j])) * normal(brng);

    LevyResult out;
    out.path = assemble(grid, 1, {inc, true, var, mix(seed, kBridgeStream)}, times, sizes);
    out.path.kind = "levy_truncated";
    out.path.seed = seed;
    out.path.params = {{"T", horizon}, {"dt", dt}, {"alpha", a}, {"scale", c},
                       {"sigma", levy.sigma}, {"eps_qv", eps_qv}, {"threshold", delta}};
    out.tail_qv_bound = small_var * horizon;
    out.threshold = delta;
    return out;
}

DriverPath deterministic_time(double horizon, double dt)
{
    const auto grid = base_grid(horizon, dt);
    const auto n = static_cast<Eigen::Index>(grid.size() - 1);
    Mat inc(1, n);
    for (Eigen::Index j = 0; j < n; ++j) inc(0, j) = grid[j + 1] - grid[j];
    auto p = assemble(grid, 1, {inc, false, 0.0, 0}, {}, {});
    // values are exactly the grid times, not a running sum
    for (Eigen::Index i = 0; i < p.values.cols(); ++i) p.values(0, i) = p.grid[i];
    p.kind = "time";
    p.params = {{"T", horizon}, {"dt", dt}};
    return p;
}

DriverPath jump_path(double horizon, const std::vector<double>& times,
                     const std::vector<Vec>& sizes, double dt)
{
    if (times.size() != sizes.size()) throw ParameterError("jump_path: times/sizes length mismatch");
    const int dim = sizes.empty() ? 1 : static_cast<int>(sizes.front().size());
    const auto grid = base_grid(horizon, dt > 0.0 ? dt : horizon);
    const auto n = static_cast<Eigen::Index>(grid.size() - 1);
    auto p = assemble(grid, dim, {Mat::Zero(dim, n), false, 0.0, 0}, times, sizes);
    p.kind = "jumps";
    p.params = {{"T", horizon}, {"jumps", static_cast<double>(p.jumps.size())}};
    return p;
}

DriverPath inject_jumps(const DriverPath& base, const std::vector<double>& times,
                        const std::vector<Vec>& sizes)
{
    if (times.size() != sizes.size()) throw ParameterError("inject_jumps: times/sizes length mismatch");
    std::vector<double> all_t = times;
    std::vector<Vec> all_s = sizes;
    for (const auto& j : base.jumps) {
        all_t.push_back(j.time);
        all_s.push_back(j.size);
    }
    const auto n = static_cast<Eigen::Index>(base.steps());
    const bool martingale = base.qv_c.cols() > 0 && base.qv_c.col(base.qv_c.cols() - 1).norm() > 0.0;
    auto p = assemble(base.grid, base.dim,
                      {base.increments.rightCols(n), martingale, martingale ? 1.0 : 0.0,
                       mix(base.seed, kBridgeStream)},
                      all_t, all_s);
    if (base.kind == "time") {
        // keep Z(t) = t + (jump sum) without running-sum drift
        double cum = 0.0;
        for (Eigen::Index i = 1; i < p.values.cols(); ++i) {
            const auto ui = static_cast<std::size_t>(i);
            p.increments(0, i) = p.grid[ui] - p.grid[ui - 1];
            const double pre = p.grid[ui] + cum;
            if (p.jump_at[ui] >= 0) {
                auto& j = p.jumps[static_cast<std::size_t>(p.jump_at[ui])];
                j.pre = Vec::Constant(1, pre);
                p.values(0, i) = pre + j.size[0];
                cum += j.size[0];
            } else {
                p.values(0, i) = pre;
            }
        }
    }
    p.kind = base.kind + "+jumps";
    p.seed = base.seed;
    p.params = base.params;
    p.params["injected"] = static_cast<double>(times.size());
    return p;
}

DriverPath brownian_with_jumps(std::uint64_t seed, double horizon, double dt,
                               const std::vector<double>& times, const std::vector<Vec>& sizes)
{
    return inject_jumps(gen_brownian(seed, horizon, dt, sizes.empty() ? 1 : static_cast<int>(sizes[0].size())),
                        times, sizes);
}

QuadraticVariation quadratic_variation(const DriverPath& path)
{
    QuadraticVariation qv;
    qv.continuous = path.qv_at(path.points() - 1);
    qv.discrete = Mat::Zero(path.dim, path.dim);
    for (const auto& j : path.jumps) qv.discrete += j.size * j.size.transpose();
    return qv;
}

DriverPath coarsen(const DriverPath& path, std::size_t factor)
{
    if (factor < 1) throw ParameterError("coarsen: factor must be >= 1");
    if (path.steps() % factor != 0) throw ParameterError("coarsen: step count not divisible by factor");
    for (const auto& j : path.jumps)
        if (j.index % factor != 0) throw ParameterError("coarsen: jump not on a kept grid point");
    DriverPath c;
    c.horizon = path.horizon;
    c.dim = path.dim;
    c.kind = path.kind;
    c.seed = path.seed;
    c.params = path.params;
    const std::size_t n = path.steps() / factor;
    const auto np = static_cast<Eigen::Index>(n + 1);
    c.grid.resize(n + 1);
    c.values = Mat::Zero(path.dim, np);
    c.increments = Mat::Zero(path.dim, np);
    c.qv_c = Mat::Zero(path.dim * path.dim, np);
    c.jump_at.assign(n + 1, -1);
    const bool martingale = path.qv_c.cols() > 0 && path.qv_c.col(path.qv_c.cols() - 1).norm() > 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
        const std::size_t f = i * factor;
        const auto ci = static_cast<Eigen::Index>(i);
        c.grid[i] = path.grid[f];
        c.values.col(ci) = path.values.col(static_cast<Eigen::Index>(f));
        if (i == 0) continue;
        Vec inc = Vec::Zero(path.dim);
        for (std::size_t q = f - factor + 1; q <= f; ++q) inc += path.increments.col(static_cast<Eigen::Index>(q));
        // realized on the coarse grid, as if sampled there directly
        Mat dq = Mat::Zero(path.dim, path.dim);
        if (martingale) dq = inc * inc.transpose();
        c.qv_c.col(ci) = c.qv_c.col(ci - 1) + dq.reshaped();
        // intermediate jumps cannot exist (checked above); only one at f
        c.increments.col(ci) = inc;
        if (const JumpEvent* j = path.jump(f)) {
            JumpEvent e = *j;
            e.index = i;
            e.pre = c.values.col(ci - 1) + inc;
            c.jump_at[i] = static_cast<int>(c.jumps.size());
            c.jumps.push_back(e);
            c.values.col(ci) = e.pre + e.size;
        } else {
            c.values.col(ci) = c.values.col(ci - 1) + inc;
        }
    }
    if (path.kind == "time")
        for (Eigen::Index i = 0; i < c.values.cols(); ++i) c.values(0, i) = c.grid[static_cast<std::size_t>(i)];
    return c;
}

DriverPath remove_small_jumps(const DriverPath& path, double threshold)
{
    DriverPath c = path;
    c.jumps.clear();
    std::fill(c.jump_at.begin(), c.jump_at.end(), -1);
    for (const auto& j : path.jumps) {
        if (j.size.norm() >= threshold) {
            c.jump_at[j.index] = static_cast<int>(c.jumps.size());
            c.jumps.push_back(j);
        } else {
            c.increments.col(static_cast<Eigen::Index>(j.index)) += j.size;
        }
    }
    c.params["fold_threshold"] = threshold;
    return c;
}

bool is_coupled(const DriverPath& fine, const DriverPath& coarse)
{
    if (fine.grid != coarse.grid || fine.dim != coarse.dim) return false;
    if (fine.values != coarse.values) return false;
    for (const auto& j : coarse.jumps) {
        const JumpEvent* f = fine.jump(j.index);
        if (f == nullptr || f->size != j.size) return false;
    }
    return true;
}

std::vector<JumpEvent> omitted_jumps(const DriverPath& fine, const DriverPath& coarse)
{
    std::vector<JumpEvent> out;
    for (const auto& j : fine.jumps)
        if (coarse.jump(j.index) == nullptr) out.push_back(j);
    return out;
}

}  // namespace mflow
