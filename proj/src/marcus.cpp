#include "mflow/marcus.hpp"

#include <cmath>
#include <limits>

#include "mflow/errors.hpp"

namespace mflow {

namespace {

void stop(StatePath& p, std::size_t from, double t, std::string reason)
{
    p.status = PathStatus::stopped;
    p.stop_time = t;
    p.stop_reason = std::move(reason);
    for (auto i = static_cast<Eigen::Index>(from); i < p.states.cols(); ++i)
        p.states.col(i).setConstant(std::numeric_limits<double>::quiet_NaN());
}

StatePath empty_path(const DriverPath& z, Eigen::Index n)
{
    StatePath p;
    p.grid = z.grid;
    p.states = Mat::Zero(n, static_cast<Eigen::Index>(z.points()));
    p.jump_at.assign(z.points(), -1);
    return p;
}

}  // namespace

Vec simpson_average(const std::vector<Vec>& s)
{
    if (s.size() < 2) throw IntegrationError("simpson_average: need at least two samples");
    const std::size_t m = s.size() - 1;
    const double h = 1.0 / static_cast<double>(m);
    Vec acc;
    if (m % 2 == 0) {
        acc = s.front() + s.back();
        for (std::size_t i = 1; i < m; ++i) acc += (i % 2 ? 4.0 : 2.0) * s[i];
        return acc * (h / 3.0);
    }
    acc = 0.5 * (s.front() + s.back());
    for (std::size_t i = 1; i < m; ++i) acc += s[i];
    return acc * h;
}

StatePath solve_path(const VectorField& field, const DriverPath& z, const Vec& x0,
                     const SolveOptions& opts)
{
    if (x0.size() != field.state_dim())
        throw ParameterError("solve_path: initial state has dimension " + std::to_string(x0.size()) +
                             ", field expects " + std::to_string(field.state_dim()));
    if (z.dim != field.driver_dim())
        throw ParameterError("solve_path: driver dimension " + std::to_string(z.dim) +
                             " does not match field driver dimension " +
                             std::to_string(field.driver_dim()));
    StatePath p = empty_path(z, x0.size());
    if (!x0.allFinite()) {
        stop(p, 0, 0.0, "non-finite initial state");
        return p;
    }
    p.states.col(0) = x0;
    Vec x = x0;
    for (std::size_t i = 1; i < z.points(); ++i) {
        const Vec dz = z.increment(i);
        if (dz.squaredNorm() > 0.0) {
            const Vec k1 = field.apply(x, dz);
            const Vec k2 = field.apply(x + k1, dz);
            x += 0.5 * (k1 + k2);
        }
        if (!x.allFinite()) {
            stop(p, i, z.grid[i], "non-finite state in continuous step");
            return p;
        }
        if (const JumpEvent* j = z.jump(i)) {
            JumpRecord rec;
            rec.index = i;
            rec.time = j->time;
            rec.pre = x;
            rec.size = j->size;
            if (opts.jump_rule == JumpRule::euler) {
                x = x + field.apply(x, j->size);
                rec.substeps = 1;
                if (opts.keep_samples) rec.samples = {rec.pre, x};
            } else {
                try {
                    OdeFlowResult fl = ode_flow(field, j->size, x, opts.min_substeps);
                    x = fl.endpoint;
                    rec.substeps = fl.substeps;
                    if (opts.keep_samples) rec.samples = std::move(fl.samples);
                } catch (const JumpTransportError& e) {
                    stop(p, i, j->time, std::string("jump transport failed: ") + e.what());
                    return p;
                }
            }
            if (!x.allFinite()) {
                stop(p, i, j->time, "non-finite state after jump");
                return p;
            }
            rec.post = x;
            p.jump_at[i] = static_cast<int>(p.jumps.size());
            p.jumps.push_back(std::move(rec));
        }
        p.states.col(static_cast<Eigen::Index>(i)) = x;
    }
    return p;
}

StatePath solve_path(const FieldSpec& field, const DriverPath& z, const Vec& x0,
                     const SolveOptions& opts)
{
    return solve_path(*make_field(field), z, x0, opts);
}

std::vector<StatePath> solve_many(const VectorField& field, const DriverPath& z,
                                  const std::vector<Vec>& x0s, const SolveOptions& opts)
{
    std::vector<StatePath> out(x0s.size());
    const auto count = static_cast<long>(x0s.size());
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < count; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        out[ui] = solve_path(field, z, x0s[ui], opts);
    }
    return out;
}

MatrixFlowPath solve_linear_exact(const Mat& a, const DriverPath& z)
{
    if (a.rows() != a.cols()) throw ParameterError("solve_linear_exact: generator must be square");
    if (z.dim != 1) throw ParameterError("solve_linear_exact: scalar driver required");
    MatrixFlowPath out;
    out.times = z.grid;
    out.generator = a;
    out.flows.reserve(z.points());
    for (std::size_t i = 0; i < z.points(); ++i) {
        const double zi = z.values(0, static_cast<Eigen::Index>(i));
        out.flows.push_back(i == 0 && zi == 0.0 ? Mat::Identity(a.rows(), a.cols()) : expm(a * zi));
    }
    return out;
}

bool has_exact_solution(const FieldSpec& field)
{
    if (field.driver_dim() != 1) return false;
    return std::holds_alternative<LinearSpec>(field.variant) ||
           std::holds_alternative<AffineSpec>(field.variant) ||
           std::holds_alternative<RightInvariantSpec>(field.variant);
}

StatePath solve_exact(const FieldSpec& field, const DriverPath& z, const Vec& x0)
{
    validate(field);
    if (!has_exact_solution(field))
        throw ParameterError("solve_exact: only linear or affine fields with a scalar driver");
    if (z.dim != 1) throw ParameterError("solve_exact: scalar driver required");
    const auto n = static_cast<Eigen::Index>(field.state_dim());
    if (x0.size() != n) throw ParameterError("solve_exact: initial state dimension mismatch");

    Mat gen;
    Vec xa = x0;
    if (auto aff = affine_generators(field)) {
        gen = aff->front();
        xa.resize(n + 1);
        xa << x0, 1.0;
    } else {
        gen = linear_generators(field)->front();
    }
    StatePath p = empty_path(z, n);
    auto at = [&](double zv) -> Vec { return (expm(gen * zv) * xa).head(n); };
    for (std::size_t i = 0; i < z.points(); ++i) {
        const double zi = z.values(0, static_cast<Eigen::Index>(i));
        p.states.col(static_cast<Eigen::Index>(i)) = i == 0 && zi == 0.0 ? x0 : at(zi);
        if (const JumpEvent* j = z.jump(i)) {
            JumpRecord rec;
            rec.index = i;
            rec.time = j->time;
            rec.size = j->size;
            rec.pre = at(j->pre[0]);
            rec.post = p.state(i);
            p.jump_at[i] = static_cast<int>(p.jumps.size());
            p.jumps.push_back(std::move(rec));
        }
    }
    return p;
}

Vec marcus_integral(const VectorField& g, const VectorField& x, const StatePath& path,
                    const DriverPath& z)
{
    if (g.state_dim() != x.state_dim() || g.driver_dim() != z.dim)
        throw ParameterError("marcus_integral: integrand shape does not match field and driver");
    if (!path.complete())
        throw IntegrationError("marcus_integral: path stopped at t = " + std::to_string(path.stop_time));
    if (path.points() != z.points()) throw ParameterError("marcus_integral: path and driver grids differ");

    const int k = z.dim;
    Vec ito = Vec::Zero(g.out_dim());
    Vec correction = Vec::Zero(g.out_dim());
    Vec jumps = Vec::Zero(g.out_dim());
    for (std::size_t i = 1; i < z.points(); ++i) {
        const Vec xl = path.state(i - 1);
        const Vec dz = z.increment(i);
        const Mat q = z.qv_increment(i);
        if (dz.squaredNorm() > 0.0) ito += g.eval(xl) * dz;
        if (q.squaredNorm() > 0.0) {
            const Mat xa = x.eval(xl);
            for (int b = 0; b < k; ++b) {
                const Mat jb = g.jacobian(xl, b);
                for (int a = 0; a < k; ++a)
                    if (q(a, b) != 0.0) correction += 0.5 * q(a, b) * (jb * xa.col(a));
            }
        }
        if (const JumpRecord* j = path.jump(i)) {
            if (j->samples.size() < 2)
                throw IntegrationError("marcus_integral: missing jump-transport samples at t = " +
                                       std::to_string(j->time));
            const Mat gpre = g.eval(j->pre);
            ito += gpre * j->size;
            std::vector<Vec> vals;
            vals.reserve(j->samples.size());
            for (const auto& s : j->samples) vals.push_back((g.eval(s) - gpre) * j->size);
            jumps += simpson_average(vals);
        }
    }
    return ito + correction + jumps;
}

namespace {

class ConjugateField final : public VectorField {
public:
    ConjugateField(Diffeo f, FieldPtr x) : f_(std::move(f)), x_(std::move(x)), push_(f_, x_) {}
    int state_dim() const override { return x_->state_dim(); }
    int driver_dim() const override { return x_->driver_dim(); }
    Mat eval(const Vec& y) const override { return push_.eval(y); }
    double lipschitz(const Vec& y, const Vec& dz) const override
    {
        if (f_.name == DiffeoName::identity) return x_->lipschitz(y, dz);
        const Vec xs = f_.inverse(y);
        const Mat j = f_.jacobian(xs);
        Eigen::JacobiSVD<Mat> svd(j);
        const auto& sv = svd.singularValues();
        const double cond = sv(0) / sv(sv.size() - 1);
        return cond * x_->lipschitz(xs, dz);
    }

private:
    Diffeo f_;
    FieldPtr x_;
    PushforwardField push_;
};

}  // namespace

double change_of_variables_check(const Diffeo& f, const FieldSpec& field, const DriverPath& z,
                                 const Vec& x0)
{
    auto xf = make_field(field);
    const StatePath xp = solve_path(*xf, z, x0);
    if (!xp.complete()) throw IntegrationError("change_of_variables_check: path stopped: " + xp.stop_reason);
    const ConjugateField yf(f, xf);
    StatePath yp;
    try {
        yp = solve_path(yf, z, f.apply(x0));
    } catch (const DomainError& e) {
        throw DomainError(std::string("change_of_variables_check: ") + e.what());
    }
    if (!yp.complete()) throw IntegrationError("change_of_variables_check: pushforward path stopped: " + yp.stop_reason);
    double worst = 0.0;
    for (std::size_t i = 0; i < xp.points(); ++i) {
        const Vec fx = f.apply(xp.state(i));
        worst = std::max(worst, (fx - yp.state(i)).norm());
    }
    return worst;
}

}  // namespace mflow
