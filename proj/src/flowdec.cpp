#include "mflow/flowdec.hpp"

#include <algorithm>
#include <cmath>

#include "mflow/errors.hpp"

namespace mflow {

namespace {

constexpr std::size_t kCacheLimit = 200000;

}  // namespace

FlowSampler::FlowSampler(FieldSpec field, DriverPath z) : spec_(std::move(field)), z_(std::move(z))
{
    field_ = make_field(spec_);
    if (spec_.state_dim() != 2) throw ParameterError("FlowSampler: planar fields only (state dimension 2)");
    if (z_.dim != spec_.driver_dim()) throw ParameterError("FlowSampler: driver dimension mismatch");
    if (z_.dim == 1) {
        if (auto aff = affine_generators(spec_)) {
            exact_ = affine_ = true;
            gen_ = aff->front();
        } else if (auto lin = linear_generators(spec_)) {
            exact_ = true;
            gen_ = lin->front();
        }
    }
}

std::size_t FlowSampler::cache_size() const
{
    std::lock_guard lock(mu_);
    return cache_.size();
}

Vec FlowSampler::solve(std::size_t from, std::size_t to, const Vec& x, bool left) const
{
    if (exact_) {
        const JumpEvent* j = z_.jump(to);
        const double zt = left && j ? j->pre[0] : z_.values(0, static_cast<Eigen::Index>(to));
        const double dz = zt - z_.values(0, static_cast<Eigen::Index>(from));
        const Mat m = expm(gen_ * dz);
        if (!affine_) return m * x;
        Vec xa(3);
        xa << x, 1.0;
        return (m * xa).head(2);
    }
    Vec u = x;
    for (std::size_t s = from + 1; s <= to; ++s) {
        const Vec dz = z_.increment(s);
        if (dz.squaredNorm() > 0.0) {
            const Vec k1 = field_->apply(u, dz);
            const Vec k2 = field_->apply(u + k1, dz);
            u += 0.5 * (k1 + k2);
        }
        if (left && s == to) break;
        if (const JumpEvent* j = z_.jump(s)) u = ode_flow(*field_, j->size, u).endpoint;
    }
    if (!u.allFinite())
        throw IntegrationError("FlowSampler: non-finite transition from t = " + std::to_string(z_.grid[from]));
    return u;
}

Vec FlowSampler::transition(std::size_t from, std::size_t to, const Vec& x, bool left) const
{
    if (to >= z_.points() || from > to) throw ParameterError("FlowSampler: grid indices out of range");
    if (x.size() != 2) throw ParameterError("FlowSampler: state must be planar");
    if (from == to && !left) return x;
    const Key key{from, to, left, x[0], x[1]};
    {
        std::lock_guard lock(mu_);
        if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    }
    Vec v = solve(from, to, x, left);
    std::lock_guard lock(mu_);
    if (cache_.size() >= kCacheLimit) cache_.clear();
    cache_.emplace(key, v);
    return v;
}

double FlowSampler::vertical_det(std::size_t from, std::size_t to, const Vec& x, double h, bool left) const
{
    Vec up = x, dn = x;
    up[1] += h;
    dn[1] -= h;
    return (transition(from, to, up, left)[1] - transition(from, to, dn, left)[1]) / (2.0 * h);
}

std::optional<double> solve_beta(const FlowSampler& s, std::size_t from, std::size_t to, double a, double b,
                                 double seed, double h)
{
    double y = seed;
    Vec p(2);
    auto resid = [&](double yy) {
        p << a, yy;
        return s.transition(from, to, p)[1] - b;
    };
    double f = resid(y);
    const double tol = 1e-13 * std::max(1.0, std::abs(b));
    for (int it = 0; it < 60; ++it) {
        if (std::abs(f) <= tol) return y;
        p << a, y;
        const double d = s.vertical_det(from, to, p, h);
        if (!(std::abs(d) > 0.0) || !std::isfinite(d)) return std::nullopt;
        double step = f / d;
        double lambda = 1.0;
        double fy = resid(y - step);
        while (!(std::abs(fy) < std::abs(f)) && lambda > 1e-6) {
            lambda *= 0.5;
            fy = resid(y - lambda * step);
        }
        if (!(std::abs(fy) < std::abs(f))) return std::abs(f) <= 1e3 * tol ? std::optional<double>(y) : std::nullopt;
        y -= lambda * step;
        f = fy;
    }
    return std::abs(f) <= 1e3 * tol ? std::optional<double>(y) : std::nullopt;
}

Vec PointFactorization::psi(const Vec& p) const
{
    Vec out(2);
    out << p[0], sampler->transition(from, to, p)[1];
    return out;
}

Vec PointFactorization::eta(const Vec& p, std::optional<double> seed) const
{
    const double h = 1e-4 * window.radius();
    const auto b = solve_beta(*sampler, from, to, p[0], p[1], seed.value_or(p[1]), h);
    if (!b) throw DomainError("eta: no preimage for (" + std::to_string(p[0]) + ", " + std::to_string(p[1]) + ")");
    Vec q(2);
    q << p[0], *b;
    Vec out(2);
    out << sampler->transition(from, to, q)[0], p[1];
    return out;
}

PointFactorization pointwise_decompose(const SamplerPtr& sampler, std::size_t from, std::size_t to,
                                       const Vec& x0, const Window& window, int resolution, double eps_det)
{
    if (!sampler) throw ParameterError("pointwise_decompose: null sampler");
    if (resolution < 2) throw ParameterError("pointwise_decompose: resolution must be >= 2");
    if (!(window.rx > 0.0 && window.ry > 0.0)) throw ParameterError("pointwise_decompose: empty window");
    const double h = 1e-4 * window.radius();
    const double d0 = sampler->vertical_det(from, to, x0, h);
    if (!(std::abs(d0) >= eps_det))
        throw BreakdownError("pointwise_decompose: d phi^2/dy below threshold at the base point",
                             sampler->driver().grid[to]);

    PointFactorization pf;
    pf.sampler = sampler;
    pf.from = from;
    pf.to = to;
    pf.time = sampler->driver().grid[to];
    pf.x0 = x0;
    pf.window = window;
    pf.resolution = resolution;
    const int m = resolution;
    for (int i = 0; i < m; ++i) {
        const double u = -1.0 + 2.0 * i / (m - 1);
        pf.xs.push_back(window.center[0] + u * window.rx);
        pf.ys.push_back(window.center[1] + u * window.ry);
    }
    pf.psi2.resize(m, m);
    pf.beta.resize(m, m);
    pf.eta1.resize(m, m);
    pf.det.resize(m, m);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
            Vec p(2);
            p << pf.xs[static_cast<std::size_t>(i)], pf.ys[static_cast<std::size_t>(j)];
            const Vec phi = sampler->transition(from, to, p);
            pf.psi2(i, j) = phi[1];
            pf.det(i, j) = sampler->vertical_det(from, to, p, h);
            // eta at the node (a, b) = (x_i, y_j); seed from the neighbour below
            const double seed = j > 0 && std::isfinite(pf.beta(i, j - 1)) ? pf.beta(i, j - 1) : p[1];
            const auto b = solve_beta(*sampler, from, to, p[0], p[1], seed, h);
            if (b) {
                Vec q(2);
                q << p[0], *b;
                pf.beta(i, j) = *b;
                pf.eta1(i, j) = sampler->transition(from, to, q)[0];
            } else {
                pf.beta(i, j) = nan;
                pf.eta1(i, j) = nan;
                ++pf.masked;
            }
            // eta(psi(p)) against phi(p)
            const auto back = solve_beta(*sampler, from, to, p[0], phi[1], p[1], h);
            if (back) {
                Vec q(2);
                q << p[0], *back;
                const double e = std::abs(sampler->transition(from, to, q)[0] - phi[0]);
                pf.residual = std::max(pf.residual, e);
            }
        }
    }
    return pf;
}

FlowBreakdown detect_breakdown(const FlowSampler& s, const Vec& x0, std::size_t from, double eps_det, double h)
{
    if (!(eps_det > 0.0)) throw ParameterError("detect_breakdown: eps_det must be positive");
    FlowBreakdown r;
    const DriverPath& z = s.driver();
    double prev = s.vertical_det(from, from, x0, h);
    for (std::size_t j = from + 1; j < z.points(); ++j) {
        const bool jump = z.jump(j) != nullptr;
        const double pre = s.vertical_det(from, j, x0, h, jump);
        if (!(std::abs(pre) >= eps_det) || std::signbit(pre) != std::signbit(prev)) {
            r.index = j;
            r.time = z.grid[j];
            return r;
        }
        double d = pre;
        if (jump) {
            d = s.vertical_det(from, j, x0, h);
            if (!(std::abs(d) >= eps_det)) {
                r.index = j;
                r.time = z.grid[j];
                return r;
            }
            if (std::signbit(d) != std::signbit(pre)) r.crossing = true;
        }
        prev = d;
    }
    return r;
}

std::vector<double> AlternateFactorization::breakpoint_times() const
{
    std::vector<double> out;
    for (auto i : breakpoints) out.push_back(sampler->driver().grid[i]);
    return out;
}

AlternateFactorization alternate_decompose(const SamplerPtr& sampler, const Vec& x0, double horizon,
                                           double eps_det, double margin, double window_radius, int resolution)
{
    if (!sampler) throw ParameterError("alternate_decompose: null sampler");
    if (!(margin > 0.0)) throw ParameterError("alternate_decompose: margin must be positive");
    if (!(eps_det > 0.0)) throw ParameterError("alternate_decompose: eps_det must be positive");
    const DriverPath& z = sampler->driver();
    std::size_t last = z.points() - 1;
    while (last > 0 && z.grid[last] > horizon + 1e-12 * std::max(1.0, horizon)) --last;

    AlternateFactorization fac;
    fac.sampler = sampler;
    fac.x0 = x0;
    fac.margin = margin;
    fac.eps_det = eps_det;
    fac.breakpoints.push_back(0);
    fac.anchors.push_back(x0);
    const double h = 1e-4 * window_radius;
    std::size_t from = 0;
    Vec anchor = x0;
    while (from < last) {
        Window w{anchor, window_radius, window_radius};
        const FlowBreakdown br = detect_breakdown(*sampler, anchor, from, eps_det, h);
        std::size_t end = last;
        if (br.index && *br.index <= last) {
            const double target = z.grid[*br.index] - margin;
            std::size_t s = *br.index - 1;
            while (s > from && z.grid[s] > target) --s;
            if (s <= from) {
                fac.stalled = true;
                fac.diagnostic = "no progress: breakdown at t = " + std::to_string(z.grid[*br.index]) +
                                 " is within the margin of the restart at t = " + std::to_string(z.grid[from]);
                break;
            }
            end = s;
        }
        try {
            fac.factors.push_back(pointwise_decompose(sampler, from, end, anchor, w, resolution, eps_det));
        } catch (const IntegrationError& e) {
            throw IntegrationError(std::string("alternate_decompose: transition flow from t = ") +
                                   std::to_string(z.grid[from]) + " failed: " + e.what());
        }
        anchor = sampler->transition(from, end, anchor);
        from = end;
        fac.breakpoints.push_back(end);
        fac.anchors.push_back(anchor);
    }
    return fac;
}

namespace {

Vec apply_pair(const FlowSampler& s, std::size_t from, std::size_t to, const Vec& p, double h)
{
    // psi then eta; beta is seeded at p[1], which solves it exactly in exact arithmetic
    const double b = s.transition(from, to, p)[1];
    const auto beta = solve_beta(s, from, to, p[0], b, p[1], h);
    if (!beta) throw DomainError("recompose: vertical factor not invertible at (" + std::to_string(p[0]) + ", " +
                                 std::to_string(p[1]) + ")");
    Vec q(2);
    q << p[0], *beta;
    Vec out(2);
    out << s.transition(from, to, q)[0], b;
    return out;
}

}  // namespace

Vec recompose(const AlternateFactorization& fac, std::size_t i, const Vec& x)
{
    if (fac.factors.empty() || i > fac.breakpoints.back())
        throw DomainError("recompose: grid index beyond the factorized range");
    Vec p = x;
    if (i == 0) return p;
    for (std::size_t k = 0; k < fac.factors.size(); ++k) {
        const PointFactorization& f = fac.factors[k];
        if (!f.window.contains(p))
            throw DomainError("recompose: point (" + std::to_string(p[0]) + ", " + std::to_string(p[1]) +
                              ") outside the window of factor " + std::to_string(k));
        const double h = 1e-4 * f.window.radius();
        const std::size_t to = std::min(i, f.to);
        p = apply_pair(*fac.sampler, f.from, to, p, h);
        if (i <= f.to) break;
    }
    return p;
}

}  // namespace mflow
