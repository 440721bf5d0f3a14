#include "mflow/ivk.hpp"

#include <algorithm>
#include <cmath>

#include "mflow/errors.hpp"

namespace mflow {

namespace {

double scalar_increment(const DriverPath& z, std::size_t i) { return z.increments(0, static_cast<Eigen::Index>(i)); }

double scalar_qv(const DriverPath& z, std::size_t i)
{
    return z.qv_c(0, static_cast<Eigen::Index>(i)) - z.qv_c(0, static_cast<Eigen::Index>(i - 1));
}

Vec column(const VectorField& f, const Vec& p) { return f.eval(p).col(0); }

StatePath solve_any(const FieldSpec& f, const DriverPath& z, const Vec& x0)
{
    StatePath p = has_exact_solution(f) ? solve_exact(f, z, x0) : solve_path(f, z, x0);
    if (!p.complete()) throw IntegrationError("ivk: flow stopped at t = " + std::to_string(p.stop_time) + ": " + p.stop_reason);
    return p;
}

void require_scalar(const FieldSpec& x, const FieldSpec& y, const DriverPath& z)
{
    validate(x);
    validate(y);
    if (z.dim != 1 || x.driver_dim() != 1 || y.driver_dim() != 1)
        throw ParameterError("ivk: scalar driver and single-column fields required");
    if (x.state_dim() != y.state_dim()) throw ParameterError("ivk: X and Y act on different state dimensions");
}

}  // namespace

FlowMap::FlowMap(const FieldSpec& field, const DriverPath& z)
    : field_(make_field(field)), z_(&z), exact_(has_exact_solution(field)), n_(field.state_dim())
{
    if (z.dim != 1) throw ParameterError("FlowMap: scalar driver required");
    if (exact_) {
        if (auto aff = affine_generators(field)) {
            affine_ = true;
            gen_ = aff->front();
        } else {
            gen_ = linear_generators(field)->front();
        }
    }
}

Mat FlowMap::linear_part(std::size_t i, bool left) const
{
    const JumpEvent* j = z_->jump(i);
    const double zv = left && j ? j->pre[0] : z_->values(0, static_cast<Eigen::Index>(i));
    return expm(gen_ * zv);
}

Vec FlowMap::replay(std::size_t i, const Vec& p, bool left) const
{
    Vec x = p;
    for (std::size_t s = 1; s <= i; ++s) {
        const Vec dz = z_->increment(s);
        if (dz[0] != 0.0) {
            const Vec k1 = field_->apply(x, dz);
            const Vec k2 = field_->apply(x + k1, dz);
            x += 0.5 * (k1 + k2);
        }
        if (left && s == i) break;
        if (const JumpEvent* j = z_->jump(s)) x = ode_flow(*field_, j->size, x).endpoint;
    }
    if (!x.allFinite()) throw IntegrationError("FlowMap: non-finite flow value");
    return x;
}

Vec FlowMap::value(std::size_t i, const Vec& p, bool left) const
{
    if (!exact_) return replay(i, p, left);
    const Mat m = linear_part(i, left);
    if (!affine_) return m * p;
    Vec pa(n_ + 1);
    pa << p, 1.0;
    return (m * pa).head(n_);
}

Mat FlowMap::jacobian(std::size_t i, const Vec& p, bool left) const
{
    if (exact_) return linear_part(i, left).topLeftCorner(n_, n_);
    Mat j(n_, n_);
    Vec pp = p, pm = p;
    for (int c = 0; c < n_; ++c) {
        const double h = 1e-5 * std::max(1.0, std::abs(p[c]));
        pp[c] = p[c] + h;
        pm[c] = p[c] - h;
        j.col(c) = (replay(i, pp, left) - replay(i, pm, left)) / (2.0 * h);
        pp[c] = p[c];
        pm[c] = p[c];
    }
    if (!j.allFinite()) throw IntegrationError("FlowMap: singular finite-difference stencil");
    return j;
}

Vec FlowMap::second(std::size_t i, const Vec& p, const Vec& v, bool left) const
{
    if (exact_) return Vec::Zero(n_);
    const double vn = v.norm();
    if (vn == 0.0) return Vec::Zero(n_);
    const double h = 1e-4 * std::max(1.0, p.norm()) / vn;
    const Vec d = (replay(i, p + h * v, left) - 2.0 * replay(i, p, left) + replay(i, p - h * v, left)) / (h * h);
    if (!d.allFinite()) throw IntegrationError("FlowMap: singular finite-difference stencil");
    return d;
}

namespace {

// Time-one flow of X dz, exact for linear and affine fields.
Vec flow_once(const FlowMap& f, const FieldSpec& spec, double dz, const Vec& p)
{
    Vec d(1);
    d << dz;
    if (f.exact()) {
        if (auto aff = affine_generators(spec)) {
            Vec pa(p.size() + 1);
            pa << p, 1.0;
            return (expm(aff->front() * dz) * pa).head(p.size());
        }
        return expm(linear_generators(spec)->front() * dz) * p;
    }
    return ode_flow(f.field(), d, p).endpoint;
}

struct StepTerms {
    Vec ito, fv, jump, xint;
};

}  // namespace

static std::vector<StepTerms> ivk_steps(const FieldSpec& xs, const FieldSpec& ys, const DriverPath& z,
                                        const Vec& x0, const IvkOptions& opts, const FlowMap& f,
                                        const StatePath& g)
{
    const auto yf = make_field(ys);
    const VectorField& xf = f.field();
    const auto n = x0.size();
    std::vector<StepTerms> out(z.points(), StepTerms{Vec::Zero(n), Vec::Zero(n), Vec::Zero(n), Vec::Zero(n)});
    const auto steps = static_cast<long>(z.points());
#pragma omp parallel for schedule(dynamic, 8)
    for (long li = 1; li < steps; ++li) {
        const auto i = static_cast<std::size_t>(li);
        StepTerms& st = out[i];
        const Vec gl = g.state(i - 1);
        const double dzc = scalar_increment(z, i);
        const double q = scalar_qv(z, i);
        if (dzc != 0.0 || q != 0.0) {
            const Mat fp = f.jacobian(i - 1, gl);
            const Vec yv = column(*yf, gl);
            const Vec u = fp * yv;
            const Vec w = f.value(i - 1, gl);
            const Vec xw = column(xf, w);
            st.ito += u * dzc;
            st.xint += xw * dzc;
            if (q != 0.0) {
                const Mat xj = xf.jacobian(w, 0);
                const Mat yj = yf->jacobian(gl, 0);
                st.fv += 0.5 * q * (xj * u + f.second(i - 1, gl, yv) + fp * (yj * yv));
                st.xint += 0.5 * q * (xj * (xw + u));
            }
        }
        if (const JumpRecord* rec = g.jump(i)) {
            const double dz = rec->size[0];
            const Vec& gm = rec->pre;
            const Mat fl = f.jacobian(i, gm, true);
            const Vec lin = fl * column(*yf, gm) * dz;
            const Vec wm = f.value(i, gm, true);
            const Vec base = flow_once(f, xs, dz, wm);
            Vec moved;
            if (opts.g_jumps_first) {
                moved = flow_once(f, xs, dz, f.value(i, rec->post, true));
            } else {
                Vec d(1);
                d << dz;
                moved = ode_flow(*yf, d, base).endpoint;
            }
            st.ito += lin;
            st.jump += moved - base - lin;
            st.xint += base - wm;
        }
    }
    return out;
}

IvkTerms gen_ivk_integral(const FieldSpec& x, const FieldSpec& y, const DriverPath& z, const Vec& x0,
                          const IvkOptions& opts)
{
    return ivk_report(x, y, z, x0, opts).terms;
}

IvkReport ivk_report(const FieldSpec& x, const FieldSpec& y, const DriverPath& z, const Vec& x0,
                     const IvkOptions& opts)
{
    require_scalar(x, y, z);
    if (x0.size() != x.state_dim()) throw ParameterError("ivk: initial state dimension mismatch");
    const FlowMap f(x, z);
    const StatePath g = solve_any(y, z, x0);
    const auto steps = ivk_steps(x, y, z, x0, opts, f, g);

    IvkReport r;
    const auto n = x0.size();
    r.terms = {Vec::Zero(n), Vec::Zero(n), Vec::Zero(n)};
    r.x_integral = Vec::Zero(n);
    for (std::size_t i = 1; i < steps.size(); ++i) {
        r.terms.ito += steps[i].ito;
        r.terms.finite_variation += steps[i].fv;
        r.terms.jump += steps[i].jump;
        r.x_integral += steps[i].xint;
    }
    r.lhs = f.value(z.points() - 1, g.final_state());
    r.rhs = x0 + r.x_integral + r.terms.total();
    r.residual = (r.lhs - r.rhs).norm();
    return r;
}

double verify_ivk(const FieldSpec& x, const FieldSpec& y, const DriverPath& z, const Vec& x0)
{
    return ivk_report(x, y, z, x0).residual;
}

double verify_leibniz(const FieldSpec& x, const FieldSpec& y, const DriverPath& z,
                      const std::vector<Vec>& probes)
{
    require_scalar(x, y, z);
    if (probes.empty()) throw ParameterError("verify_leibniz: probe set is empty");
    const FlowMap f(x, z);
    const auto yf = make_field(y);
    double worst = 0.0;
    for (const Vec& p : probes) {
        const StatePath g = solve_any(y, z, p);
        const auto steps = static_cast<long>(z.points());
        std::vector<double> res(z.points(), 0.0);
#pragma omp parallel for schedule(dynamic, 8)
        for (long li = 1; li < steps; ++li) {
            const auto i = static_cast<std::size_t>(li);
            const JumpRecord* rec = g.jump(i);
            const Vec g0 = g.state(i - 1);
            const Vec g1 = rec ? rec->pre : g.state(i);
            // continuous part of the step, up to t_i-
            const Vec f00 = f.value(i - 1, g0);
            const Vec f10 = f.value(i, g0, true);
            const Vec f11 = f.value(i, g1, true);
            const Mat j0 = f.jacobian(i - 1, g0);
            const Mat j1 = f.jacobian(i, g1, true);
            const Vec lhs = f11 - f00;
            const Vec rhs = (f10 - f00) + 0.5 * (j0 + j1) * (g1 - g0);
            double r = (lhs - rhs).norm();
            if (rec) {
                Vec d(1);
                d << rec->size[0];
                const OdeFlowResult tr = ode_flow(*yf, d, rec->pre);
                std::vector<Vec> vals;
                vals.reserve(tr.samples.size());
                for (const auto& s : tr.samples) vals.push_back(f.jacobian(i, s) * (yf->apply(s, d)));
                const Vec lhs_j = f.value(i, rec->post) - f11;
                const Vec rhs_j = (f.value(i, rec->pre) - f11) + simpson_average(vals);
                r = std::max(r, (lhs_j - rhs_j).norm());
            }
            res[i] = r;
        }
        worst = std::max(worst, *std::max_element(res.begin(), res.end()));
    }
    return worst;
}

TruncationCheck truncation_error_bound_check(const FieldSpec& x, const FieldSpec& y,
                                             const DriverPath& fine, const DriverPath& coarse,
                                             const Vec& x0)
{
    require_scalar(x, y, fine);
    if (!is_coupled(fine, coarse))
        throw ParameterError("truncation_error_bound_check: drivers are not coupled");
    const auto xf = make_field(x);
    const auto yf = make_field(y);

    auto compose = [&](const DriverPath& z, StatePath* gpath, StatePath* wpath) {
        StatePath g = solve_path(*yf, z, x0);
        if (!g.complete()) throw IntegrationError("truncation check: G stopped: " + g.stop_reason);
        StatePath w = solve_path(*xf, z, g.final_state());
        if (!w.complete()) throw IntegrationError("truncation check: F stopped: " + w.stop_reason);
        Vec out = w.final_state();
        if (gpath) *gpath = std::move(g);
        if (wpath) *wpath = std::move(w);
        return out;
    };

    TruncationCheck c;
    for (const auto& j : omitted_jumps(fine, coarse)) c.omitted_square_sum += j.size.squaredNorm();

    StatePath gp, wp;
    const Vec wf = compose(fine, &gp, &wp);
    const Vec wc = compose(coarse, nullptr, nullptr);
    c.observed = (wf - wc).norm();

    double second = 0.0, lx = 0.0, ly = 0.0;
    auto visit = [&](const StatePath& p) {
        for (std::size_t i = 0; i < p.points(); ++i) {
            const Vec s = p.state(i);
            const Mat jx = xf->jacobian(s, 0);
            const Mat jy = yf->jacobian(s, 0);
            second = std::max(second, 0.5 * (jx * column(*xf, s)).norm() + 0.5 * (jy * column(*yf, s)).norm());
            lx = std::max(lx, jx.norm());
            ly = std::max(ly, jy.norm());
        }
    };
    visit(gp);
    visit(wp);
    const double zmax = fine.values.row(0).maxCoeff();
    const double zmin = fine.values.row(0).minCoeff();
    const double amplification = std::exp((lx + ly) * (zmax - zmin));
    c.constant = 4.0 * second * amplification;
    c.bound = c.constant * c.omitted_square_sum;
    return c;
}

}  // namespace mflow
