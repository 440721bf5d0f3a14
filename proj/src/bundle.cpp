#include "mflow/bundle.hpp"

#include <cmath>

#include "mflow/errors.hpp"

namespace mflow {

namespace {

Mat block_diag(const Mat& a, const Mat& b)
{
    Mat m = Mat::Zero(a.rows() + b.rows(), a.cols() + b.cols());
    m.topLeftCorner(a.rows(), a.cols()) = a;
    m.bottomRightCorner(b.rows(), b.cols()) = b;
    return m;
}

double value0(const DriverPath& z, std::size_t i) { return z.values(0, static_cast<Eigen::Index>(i)); }

Mat project(const std::vector<Mat>& basis, const Mat& w)
{
    // least squares in the Frobenius inner product
    const auto k = static_cast<Eigen::Index>(basis.size());
    Mat gram(k, k);
    Vec rhs(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        rhs[i] = (basis[static_cast<std::size_t>(i)].array() * w.array()).sum();
        for (Eigen::Index j = 0; j < k; ++j)
            gram(i, j) = (basis[static_cast<std::size_t>(i)].array() * basis[static_cast<std::size_t>(j)].array()).sum();
    }
    const Vec c = gram.ldlt().solve(rhs);
    Mat out = Mat::Zero(w.rows(), w.cols());
    for (Eigen::Index i = 0; i < k; ++i) out += c[i] * basis[static_cast<std::size_t>(i)];
    return out;
}

}  // namespace

std::string_view group_name(GroupTag g)
{
    switch (g) {
    case GroupTag::so2: return "SO(2)";
    case GroupTag::so3: return "SO(3)";
    case GroupTag::so2xso2: return "SO(2)xSO(2)";
    }
    return "?";
}

bool in_group(const Mat& g, GroupTag tag, double tol)
{
    const Eigen::Index n = tag == GroupTag::so2 ? 2 : tag == GroupTag::so3 ? 3 : 4;
    if (g.rows() != n || g.cols() != n) return false;
    if ((g.transpose() * g - Mat::Identity(n, n)).norm() > tol) return false;
    if (tag == GroupTag::so2xso2) {
        if (g.topRightCorner(2, 2).norm() > tol || g.bottomLeftCorner(2, 2).norm() > tol) return false;
        return std::abs(g.topLeftCorner(2, 2).determinant() - 1.0) <= tol &&
               std::abs(g.bottomRightCorner(2, 2).determinant() - 1.0) <= tol;
    }
    return std::abs(g.determinant() - 1.0) <= tol;
}

Mat so3_basis(int axis)
{
    Mat e = Mat::Zero(3, 3);
    const int a = (axis + 1) % 3, b = (axis + 2) % 3;
    e(b, a) = 1.0;
    e(a, b) = -1.0;
    return e;
}

TrivialBundleFactors trivial_bundle_decompose(const Mat& a, const Mat& b, const DriverPath& z, const Mat& x0,
                                              const Mat& y0)
{
    if (z.dim != 1) throw ParameterError("trivial_bundle_decompose: scalar driver required");
    if (a.rows() != x0.rows() || b.rows() != y0.rows())
        throw ParameterError("trivial_bundle_decompose: generator and initial point sizes differ");
    if (!(a + a.transpose()).isZero(1e-12) || !(b + b.transpose()).isZero(1e-12))
        throw ParameterError("trivial_bundle_decompose: generators must be skew (orthogonal groups)");
    const Mat y0inv = y0.transpose();
    const Mat ia = Mat::Identity(a.rows(), a.cols()), ib = Mat::Identity(b.rows(), b.cols());
    const Mat ab = block_diag(a, b);
    const Mat start = block_diag(x0, y0);
    TrivialBundleFactors out;
    for (std::size_t i = 0; i < z.points(); ++i) {
        const double zi = value0(z, i);
        const Mat eta = block_diag(expm(a * zi), ib);
        const Mat psi = block_diag(ia, y0inv * expm(b * zi) * y0);
        const Mat comp = eta * start * psi;
        const Mat direct = expm(ab * zi) * start;
        out.eta.times.push_back(z.grid[i]);
        out.eta.mats.push_back(eta);
        out.psi.times.push_back(z.grid[i]);
        out.psi.mats.push_back(psi);
        out.composite.times.push_back(z.grid[i]);
        out.composite.mats.push_back(comp);
        out.direct.times.push_back(z.grid[i]);
        out.direct.mats.push_back(direct);
        out.max_error = std::max(out.max_error, (comp - direct).cwiseAbs().maxCoeff());
    }
    return out;
}

Mat ReductiveSplit::project_vertical(const Mat& w) const { return project(vertical, 0.5 * (w - w.transpose())); }

Mat ReductiveSplit::project_horizontal(const Mat& w) const
{
    return project(horizontal, 0.5 * (w - w.transpose()));
}

double ReductiveSplit::invariance_defect() const
{
    double worst = 0.0;
    for (const auto& v : vertical)
        for (double s : {0.3, 1.1, 2.5, -0.7})
            for (const auto& n : horizontal) {
                const Mat g = expm(v * s);
                worst = std::max(worst, project_vertical(g * n * g.transpose()).norm());
            }
    return worst;
}

ReductiveSplit sphere_split() { return {{so3_basis(2)}, {so3_basis(0), so3_basis(1)}}; }

namespace {

// eta' = eta Ad(psi(u)) H dz on u in [0, 1] with psi(u) = psi0 exp(u V dz).
std::vector<Mat> jump_transport(const Mat& eta0, const Mat& psi0, const Mat& v, const Mat& h, double dz)
{
    const double lip = std::abs(dz) * (v.norm() + h.norm());
    int m = 16;
    if (lip > 0.0) m = std::max(m, static_cast<int>(std::ceil(lip * std::pow(lip / (120.0 * 1e-11), 0.25))));
    m += m % 2;
    const double du = 1.0 / m;
    auto gen = [&](double u) {
        const Mat p = psi0 * expm(v * (u * dz));
        return Mat(p * h * p.transpose() * dz);
    };
    std::vector<Mat> out;
    out.reserve(static_cast<std::size_t>(m) + 1);
    Mat e = eta0;
    out.push_back(e);
    for (int s = 0; s < m; ++s) {
        const double u = s * du;
        const Mat g0 = gen(u), gm = gen(u + 0.5 * du), g1 = gen(u + du);
        const Mat k1 = e * g0;
        const Mat k2 = (e + 0.5 * du * k1) * gm;
        const Mat k3 = (e + 0.5 * du * k2) * gm;
        const Mat k4 = (e + du * k3) * g1;
        e += (du / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        out.push_back(e);
    }
    out.back() = polar_orthonormalize(out.back());
    return out;
}

}  // namespace

ReductiveResult reductive_decompose(const Mat& w, const ReductiveSplit& split, const DriverPath& z, const Mat& g0)
{
    if (z.dim != 1) throw ParameterError("reductive_decompose: scalar driver required");
    if (w.rows() != 3 || w.cols() != 3 || g0.rows() != 3 || g0.cols() != 3)
        throw ParameterError("reductive_decompose: SO(3) only");
    if (!(w + w.transpose()).isZero(1e-12)) throw ParameterError("reductive_decompose: W must be skew");
    if (!in_group(g0, GroupTag::so3, 1e-10)) throw ParameterError("reductive_decompose: g0 is not in SO(3)");

    ReductiveResult r;
    r.vertical_gen = split.project_vertical(w);
    r.horizontal_gen = split.project_horizontal(w);
    const Mat& v = r.vertical_gen;
    const Mat& h = r.horizontal_gen;
    auto psi_at = [&](double zv) { return Mat(expm(v * zv)); };
    auto gen_at = [&](double zv) {
        const Mat p = psi_at(zv);
        return Mat(p * h * p.transpose());
    };

    Mat eta = g0;
    for (std::size_t i = 0; i < z.points(); ++i) {
        const double zi = value0(z, i);
        if (i > 0) {
            const double dzc = z.increments(0, static_cast<Eigen::Index>(i));
            const JumpEvent* j = z.jump(i);
            const double zpre = j ? j->pre[0] : zi;
            if (dzc != 0.0) {
                const double zl = value0(z, i - 1);
                // exponential trapezoid: the step generator stays in n
                eta = polar_orthonormalize(eta * expm(0.5 * (gen_at(zl) + gen_at(zpre)) * dzc));
            }
            if (j) {
                auto samples = jump_transport(eta, psi_at(zpre), v, h, j->size[0]);
                eta = samples.back();
                r.jump_samples.push_back(std::move(samples));
                r.jump_sizes.push_back(j->size[0]);
            }
            if (!eta.allFinite()) {
                r.complete = false;
                r.stop_reason = "non-finite eta at t = " + std::to_string(z.grid[i]);
                break;
            }
        }
        const Mat psi = psi_at(zi);
        const Mat direct = g0 * expm(w * zi);
        r.eta.times.push_back(z.grid[i]);
        r.eta.mats.push_back(eta);
        r.psi.times.push_back(z.grid[i]);
        r.psi.mats.push_back(psi);
        r.direct.times.push_back(z.grid[i]);
        r.direct.mats.push_back(direct);
        r.max_composite_error = std::max(r.max_composite_error, (eta * psi - direct).norm());
    }
    return r;
}

LiftCheck horizontal_lift_check(const ReductiveResult& r, const ReductiveSplit& split, const DriverPath& z)
{
    LiftCheck c;
    Vec north(3);
    north << 0.0, 0.0, 1.0;
    for (std::size_t i = 0; i < r.eta.mats.size(); ++i) {
        const Vec a = r.eta.mats[i] * north;
        const Vec b = r.direct.mats[i] * north;
        const double chord = std::min(2.0, (a - b).norm());
        c.projection = std::max(c.projection, 2.0 * std::asin(0.5 * chord));
    }
    auto connection = [&](const Mat& e0, const Mat& e1, double dz) {
        if (dz == 0.0) return 0.0;
        const Mat inc = e0.transpose() * (e1 - e0);
        return split.project_vertical(inc).norm() / std::abs(dz);
    };
    for (std::size_t i = 1; i < r.eta.mats.size(); ++i) {
        const double dzc = z.increments(0, static_cast<Eigen::Index>(i));
        if (z.jump(i) == nullptr) c.connection = std::max(c.connection, connection(r.eta.mats[i - 1], r.eta.mats[i], dzc));
    }
    for (std::size_t k = 0; k < r.jump_samples.size(); ++k) {
        const auto& s = r.jump_samples[k];
        const double du = r.jump_sizes[k] / static_cast<double>(s.size() - 1);
        for (std::size_t u = 1; u < s.size(); ++u) c.connection = std::max(c.connection, connection(s[u - 1], s[u], du));
    }
    return c;
}

}  // namespace mflow
