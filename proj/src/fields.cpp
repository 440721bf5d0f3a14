#include "mflow/fields.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mflow/errors.hpp"

namespace mflow {

namespace {

constexpr int kMaxSubsteps = 1 << 20;

double fd_step(double xi)
{
    return std::cbrt(std::numeric_limits<double>::epsilon()) * std::max(1.0, std::abs(xi));
}

void check_dim(const Vec& x, int n, const char* who)
{
    if (x.size() != n)
        throw ParameterError(std::string(who) + ": state has dimension " + std::to_string(x.size()) +
                             ", expected " + std::to_string(n));
}

class LinearField final : public VectorField {
public:
    explicit LinearField(LinearSpec s) : s_(std::move(s)) {}
    int state_dim() const override { return static_cast<int>(s_.mats.front().rows()); }
    int driver_dim() const override { return static_cast<int>(s_.mats.size()); }
    Mat eval(const Vec& x) const override
    {
        Mat out(state_dim(), driver_dim());
        for (int c = 0; c < driver_dim(); ++c) out.col(c) = s_.mats[static_cast<std::size_t>(c)] * x;
        return out;
    }
    Vec apply(const Vec& x, const Vec& dz) const override
    {
        if (driver_dim() == 1) return s_.mats.front() * (x * dz[0]);
        return eval(x) * dz;
    }
    Mat jacobian(const Vec&, int col) const override { return s_.mats[static_cast<std::size_t>(col)]; }
    bool exact_jacobian() const override { return true; }
    double lipschitz(const Vec& x, const Vec& dz) const override { return jacobian_dir(x, dz).norm(); }

private:
    LinearSpec s_;
};

class AffineField final : public VectorField {
public:
    explicit AffineField(AffineSpec s) : s_(std::move(s)) {}
    int state_dim() const override { return static_cast<int>(s_.mats.front().rows()); }
    int driver_dim() const override { return static_cast<int>(s_.mats.size()); }
    Mat eval(const Vec& x) const override
    {
        Mat out(state_dim(), driver_dim());
        for (int c = 0; c < driver_dim(); ++c) {
            const auto uc = static_cast<std::size_t>(c);
            out.col(c) = s_.mats[uc] * x + s_.offsets[uc];
        }
        return out;
    }
    Mat jacobian(const Vec&, int col) const override { return s_.mats[static_cast<std::size_t>(col)]; }
    bool exact_jacobian() const override { return true; }
    double lipschitz(const Vec& x, const Vec& dz) const override { return jacobian_dir(x, dz).norm(); }

private:
    AffineSpec s_;
};

double monomial_value(const Monomial& m, const Vec& x)
{
    double v = m.coef;
    for (std::size_t i = 0; i < m.powers.size(); ++i)
        for (int p = 0; p < m.powers[i]; ++p) v *= x[static_cast<Eigen::Index>(i)];
    return v;
}

class PolynomialField final : public VectorField {
public:
    explicit PolynomialField(PolynomialSpec s) : s_(std::move(s)) {}
    int state_dim() const override { return s_.state_dim; }
    int driver_dim() const override { return s_.driver_dim; }
    Mat eval(const Vec& x) const override
    {
        Mat out = Mat::Zero(s_.state_dim, s_.driver_dim);
        for (const auto& m : s_.terms) out(m.row, m.col) += monomial_value(m, x);
        return out;
    }
    Mat jacobian(const Vec& x, int col) const override
    {
        Mat j = Mat::Zero(s_.state_dim, s_.state_dim);
        for (const auto& m : s_.terms) {
            if (m.col != col) continue;
            for (std::size_t v = 0; v < m.powers.size(); ++v) {
                const int p = m.powers[v];
                if (p == 0) continue;
                Monomial d = m;
                d.coef *= p;
                d.powers[v] -= 1;
                j(m.row, static_cast<Eigen::Index>(v)) += monomial_value(d, x);
            }
        }
        return j;
    }
    bool exact_jacobian() const override { return true; }

private:
    PolynomialSpec s_;
};

class RightInvariantField final : public VectorField {
public:
    explicit RightInvariantField(RightInvariantSpec s) : s_(std::move(s)) {}
    int state_dim() const override { return s_.group_dim * s_.group_dim; }
    int driver_dim() const override { return static_cast<int>(s_.algebra.size()); }
    Mat eval(const Vec& x) const override
    {
        const int m = s_.group_dim;
        const Mat g = x.reshaped(m, m);
        Mat out(state_dim(), driver_dim());
        for (int c = 0; c < driver_dim(); ++c)
            out.col(c) = (s_.algebra[static_cast<std::size_t>(c)] * g).reshaped();
        return out;
    }
    Mat jacobian(const Vec&, int col) const override
    {
        const int m = s_.group_dim;
        Mat j = Mat::Zero(m * m, m * m);
        for (int b = 0; b < m; ++b) j.block(b * m, b * m, m, m) = s_.algebra[static_cast<std::size_t>(col)];
        return j;
    }
    bool exact_jacobian() const override { return true; }
    double lipschitz(const Vec&, const Vec& dz) const override
    {
        Mat w = Mat::Zero(s_.group_dim, s_.group_dim);
        for (int c = 0; c < driver_dim(); ++c) w += dz[c] * s_.algebra[static_cast<std::size_t>(c)];
        return w.norm();
    }

private:
    RightInvariantSpec s_;
};

class CatalogField final : public VectorField {
public:
    explicit CatalogField(CatalogSpec s) : s_(s) {}
    int state_dim() const override { return 2; }
    int driver_dim() const override { return 1; }
    Mat eval(const Vec& v) const override
    {
        const double x = v[0], y = v[1];
        Mat out(2, 1);
        switch (s_.name) {
        case CatalogName::pendulum:
            out << y, -s_.param * std::sin(x);
            break;
        case CatalogName::vertical_sine:
            out << 0.0, s_.param * std::sin(y);
            break;
        case CatalogName::cubic_shear:
            out << s_.param * (y * y * y + y), 0.0;
            break;
        case CatalogName::van_der_pol:
            out << y, s_.param * (1.0 - x * x) * y - x;
            break;
        }
        return out;
    }

private:
    CatalogSpec s_;
};

}  // namespace

Mat VectorField::jacobian(const Vec& x, int col) const
{
    const int n = state_dim();
    Mat j(out_dim(), n);
    Vec xp = x, xm = x;
    for (int i = 0; i < n; ++i) {
        const double h = fd_step(x[i]);
        xp[i] = x[i] + h;
        xm[i] = x[i] - h;
        j.col(i) = (eval(xp).col(col) - eval(xm).col(col)) / (2.0 * h);
        xp[i] = x[i];
        xm[i] = x[i];
    }
    return j;
}

Mat VectorField::jacobian_dir(const Vec& x, const Vec& dz) const
{
    Mat j = Mat::Zero(out_dim(), state_dim());
    for (int c = 0; c < driver_dim(); ++c)
        if (dz[c] != 0.0) j += dz[c] * jacobian(x, c);
    return j;
}

double VectorField::lipschitz(const Vec& x, const Vec& dz) const
{
    // nonlinear fields: local Jacobian with a safety factor
    return 2.0 * jacobian_dir(x, dz).norm();
}

int FieldSpec::state_dim() const
{
    return std::visit(
        [](const auto& s) -> int {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, LinearSpec> || std::is_same_v<T, AffineSpec>)
                return s.mats.empty() ? 0 : static_cast<int>(s.mats.front().rows());
            else if constexpr (std::is_same_v<T, PolynomialSpec>)
                return s.state_dim;
            else if constexpr (std::is_same_v<T, RightInvariantSpec>)
                return s.group_dim * s.group_dim;
            else
                return 2;
        },
        variant);
}

int FieldSpec::driver_dim() const
{
    return std::visit(
        [](const auto& s) -> int {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, LinearSpec> || std::is_same_v<T, AffineSpec>)
                return static_cast<int>(s.mats.size());
            else if constexpr (std::is_same_v<T, PolynomialSpec>)
                return s.driver_dim;
            else if constexpr (std::is_same_v<T, RightInvariantSpec>)
                return static_cast<int>(s.algebra.size());
            else
                return 1;
        },
        variant);
}

std::string FieldSpec::tag() const
{
    static constexpr const char* names[] = {"linear", "affine", "polynomial", "right_invariant", "catalog"};
    return names[variant.index()];
}

FieldSpec linear_field(const Mat& a) { return {LinearSpec{{a}}}; }
FieldSpec affine_field(const Mat& a, const Vec& b) { return {AffineSpec{{a}, {b}}}; }
FieldSpec catalog_field(CatalogName name, double param) { return {CatalogSpec{name, param}}; }
FieldSpec right_invariant_field(const Mat& w)
{
    return {RightInvariantSpec{{w}, static_cast<int>(w.rows())}};
}

std::string_view catalog_name(CatalogName name)
{
    switch (name) {
    case CatalogName::pendulum: return "pendulum";
    case CatalogName::vertical_sine: return "vertical_sine";
    case CatalogName::cubic_shear: return "cubic_shear";
    case CatalogName::van_der_pol: return "van_der_pol";
    }
    return "?";
}

std::string_view catalog_description(CatalogName name)
{
    switch (name) {
    case CatalogName::pendulum: return "(y, -p sin x)";
    case CatalogName::vertical_sine: return "(0, p sin y)";
    case CatalogName::cubic_shear: return "(p (y^3 + y), 0); time-one map (x + y^3 + y, y) for p = 1";
    case CatalogName::van_der_pol: return "(y, p (1 - x^2) y - x)";
    }
    return "";
}

std::optional<CatalogName> catalog_from_name(std::string_view s)
{
    for (auto c : catalog_entries())
        if (catalog_name(c) == s) return c;
    return std::nullopt;
}

std::vector<CatalogName> catalog_entries()
{
    return {CatalogName::pendulum, CatalogName::vertical_sine, CatalogName::cubic_shear,
            CatalogName::van_der_pol};
}

void validate(const FieldSpec& spec)
{
    std::visit(
        [](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, LinearSpec> || std::is_same_v<T, AffineSpec>) {
                if (s.mats.empty()) throw ParameterError("field: no generator matrices");
                const auto n = s.mats.front().rows();
                for (const auto& m : s.mats) {
                    if (m.rows() != n || m.cols() != n) throw ParameterError("field: generators must be square and equal size");
                    if (!m.allFinite()) throw ParameterError("field: non-finite generator entry");
                }
                if constexpr (std::is_same_v<T, AffineSpec>) {
                    if (s.offsets.size() != s.mats.size()) throw ParameterError("field: affine offsets count mismatch");
                    for (const auto& b : s.offsets)
                        if (b.size() != n || !b.allFinite()) throw ParameterError("field: bad affine offset");
                }
            } else if constexpr (std::is_same_v<T, PolynomialSpec>) {
                if (s.state_dim < 1 || s.driver_dim < 1) throw ParameterError("field: polynomial dimensions");
                for (const auto& m : s.terms) {
                    if (m.row < 0 || m.row >= s.state_dim || m.col < 0 || m.col >= s.driver_dim)
                        throw ParameterError("field: polynomial term index out of range");
                    if (static_cast<int>(m.powers.size()) != s.state_dim)
                        throw ParameterError("field: polynomial exponent vector length");
                    int deg = 0;
                    for (int p : m.powers) {
                        if (p < 0) throw ParameterError("field: negative exponent");
                        deg += p;
                    }
                    if (deg > 3) throw ParameterError("field: polynomial degree above 3");
                    if (!std::isfinite(m.coef)) throw ParameterError("field: non-finite coefficient");
                }
            } else if constexpr (std::is_same_v<T, RightInvariantSpec>) {
                if (s.algebra.empty() || s.group_dim < 1) throw ParameterError("field: empty algebra");
                for (const auto& w : s.algebra)
                    if (w.rows() != s.group_dim || w.cols() != s.group_dim)
                        throw ParameterError("field: algebra element has wrong size");
            }
        },
        spec.variant);
}

FieldPtr make_field(const FieldSpec& spec)
{
    validate(spec);
    return std::visit(
        [](const auto& s) -> FieldPtr {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, LinearSpec>)
                return std::make_shared<LinearField>(s);
            else if constexpr (std::is_same_v<T, AffineSpec>)
                return std::make_shared<AffineField>(s);
            else if constexpr (std::is_same_v<T, PolynomialSpec>)
                return std::make_shared<PolynomialField>(s);
            else if constexpr (std::is_same_v<T, RightInvariantSpec>)
                return std::make_shared<RightInvariantField>(s);
            else
                return std::make_shared<CatalogField>(s);
        },
        spec.variant);
}

Mat evaluate(const FieldSpec& spec, const Vec& x)
{
    auto f = make_field(spec);
    check_dim(x, f->state_dim(), "evaluate");
    return f->eval(x);
}

Mat jacobian(const FieldSpec& spec, const Vec& x, int col)
{
    auto f = make_field(spec);
    check_dim(x, f->state_dim(), "jacobian");
    return f->jacobian(x, col);
}

std::optional<std::vector<Mat>> linear_generators(const FieldSpec& spec)
{
    if (const auto* l = std::get_if<LinearSpec>(&spec.variant)) return l->mats;
    if (const auto* r = std::get_if<RightInvariantSpec>(&spec.variant)) {
        std::vector<Mat> out;
        for (const auto& w : r->algebra) {
            const int m = r->group_dim;
            Mat j = Mat::Zero(m * m, m * m);
            for (int b = 0; b < m; ++b) j.block(b * m, b * m, m, m) = w;
            out.push_back(j);
        }
        return out;
    }
    return std::nullopt;
}

std::optional<std::vector<Mat>> affine_generators(const FieldSpec& spec)
{
    const auto* a = std::get_if<AffineSpec>(&spec.variant);
    if (a == nullptr) return std::nullopt;
    std::vector<Mat> out;
    for (std::size_t c = 0; c < a->mats.size(); ++c) {
        const auto n = a->mats[c].rows();
        Mat m = Mat::Zero(n + 1, n + 1);
        m.topLeftCorner(n, n) = a->mats[c];
        m.topRightCorner(n, 1) = a->offsets[c];
        out.push_back(m);
    }
    return out;
}

int jump_substeps(const VectorField& field, const Vec& dz, const Vec& x)
{
    const double lip = field.lipschitz(x, dz);
    double m = std::max(16.0, std::ceil(8.0 * lip));
    if (lip > 0.0) {
        // RK4 global error ~ lip * (lip/m)^4 / 120
        const double acc = lip * std::pow(lip / (120.0 * kJumpTransportTol), 0.25);
        m = std::max(m, std::ceil(acc));
    }
    if (!(m < kMaxSubsteps)) throw ParameterError("ode_flow: jump too large for the substep budget");
    auto out = static_cast<int>(m);
    return out + (out % 2);
}

OdeFlowResult ode_flow_fixed(const VectorField& field, const Vec& dz, const Vec& x0, int substeps)
{
    check_dim(x0, field.state_dim(), "ode_flow");
    if (substeps < 1) throw ParameterError("ode_flow: substeps must be >= 1");
    OdeFlowResult r;
    r.substeps = substeps;
    r.samples.reserve(static_cast<std::size_t>(substeps) + 1);
    r.samples.push_back(x0);
    if (dz.norm() == 0.0) {
        r.samples.assign(static_cast<std::size_t>(substeps) + 1, x0);
        r.endpoint = x0;
        return r;
    }
    const double h = 1.0 / substeps;
    Vec u = x0;
    for (int s = 0; s < substeps; ++s) {
        const Vec k1 = field.apply(u, dz);
        const Vec k2 = field.apply(u + 0.5 * h * k1, dz);
        const Vec k3 = field.apply(u + 0.5 * h * k2, dz);
        const Vec k4 = field.apply(u + h * k3, dz);
        u += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!u.allFinite()) throw JumpTransportError("ode_flow: non-finite state during jump transport", std::nan(""));
        r.samples.push_back(u);
    }
    r.endpoint = u;
    return r;
}

OdeFlowResult ode_flow(const VectorField& field, const Vec& dz, const Vec& x0, int substeps)
{
    check_dim(x0, field.state_dim(), "ode_flow");
    if (dz.norm() == 0.0) {
        OdeFlowResult r;
        r.endpoint = x0;
        r.samples = {x0, x0};
        r.substeps = 1;
        return r;
    }
    int m = jump_substeps(field, dz, x0);
    if (substeps > m) m = substeps + (substeps % 2);
    return ode_flow_fixed(field, dz, x0, m);
}

OdeFlowResult ode_flow(const FieldSpec& spec, const Vec& dz, const Vec& x0, int substeps)
{
    return ode_flow(*make_field(spec), dz, x0, substeps);
}

Vec Diffeo::apply(const Vec& x) const
{
    switch (name) {
    case DiffeoName::identity: return x;
    case DiffeoName::affine: return a * x + b;
    case DiffeoName::cubic_plus_identity: return x + c * x.array().cube().matrix();
    }
    return x;
}

Mat Diffeo::jacobian(const Vec& x) const
{
    switch (name) {
    case DiffeoName::identity: return Mat::Identity(x.size(), x.size());
    case DiffeoName::affine: return a;
    case DiffeoName::cubic_plus_identity:
        return (1.0 + 3.0 * c * x.array().square()).matrix().asDiagonal();
    }
    return Mat::Identity(x.size(), x.size());
}

Vec Diffeo::inverse(const Vec& y) const
{
    switch (name) {
    case DiffeoName::identity: return y;
    case DiffeoName::affine: {
        Eigen::FullPivLU<Mat> lu(a);
        if (!lu.isInvertible()) throw DomainError("diffeo: affine map is singular");
        return lu.solve(y - b);
    }
    case DiffeoName::cubic_plus_identity: {
        if (c < 0.0) throw DomainError("diffeo: cubic coefficient must be >= 0 for invertibility");
        Vec x(y.size());
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            // x + c x^3 = y is monotone; Newton from the cube-root seed
            double t = c > 0.0 ? std::cbrt(y[i] / c) : y[i];
            if (std::abs(t) > std::abs(y[i])) t = y[i];
            for (int it = 0; it < 100; ++it) {
                const double f = t + c * t * t * t - y[i];
                const double d = 1.0 + 3.0 * c * t * t;
                const double step = f / d;
                t -= step;
                if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(t))) break;
            }
            if (!std::isfinite(t)) throw DomainError("diffeo: inverse failed at component " + std::to_string(i));
            x[i] = t;
        }
        return x;
    }
    }
    return y;
}

Mat PushforwardField::eval(const Vec& y) const
{
    const Vec x = f_.inverse(y);
    return f_.jacobian(x) * x_->eval(x);
}

}  // namespace mflow
