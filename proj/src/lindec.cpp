#include "mflow/lindec.hpp"

#include <cmath>

#include "mflow/errors.hpp"
#include "mflow/marcus.hpp"

namespace mflow {

namespace {

void check_split(const Mat& a, int k, const char* who)
{
    if (a.rows() != a.cols()) throw ParameterError(std::string(who) + ": matrix must be square");
    if (k < 1 || k >= a.rows())
        throw ParameterError(std::string(who) + ": block size k must satisfy 1 <= k < n");
}

double det_block(const Mat& f, int k)
{
    const Eigen::Index l = f.rows() - k;
    return f.bottomRightCorner(l, l).partialPivLu().determinant();
}

double scalar_value(const DriverPath& z, std::size_t i) { return z.values(0, static_cast<Eigen::Index>(i)); }

}  // namespace

BlockPartition BlockPartition::of(const Mat& a, int k)
{
    check_split(a, k, "BlockPartition");
    BlockPartition b;
    b.k = k;
    b.l = static_cast<int>(a.rows()) - k;
    b.a1 = a.topLeftCorner(k, k);
    b.a2 = a.topRightCorner(k, b.l);
    b.a3 = a.bottomLeftCorner(b.l, k);
    b.a4 = a.bottomRightCorner(b.l, b.l);
    return b;
}

Mat BlockPartition::assemble() const
{
    Mat a(k + l, k + l);
    a << a1, a2, a3, a4;
    return a;
}

std::pair<Mat, Mat> split_factors(const Mat& f, int k, double eps_det)
{
    const BlockPartition b = BlockPartition::of(f, k);
    Eigen::PartialPivLU<Mat> lu(b.a4);
    if (!(std::abs(lu.determinant()) >= eps_det))
        throw BreakdownError("split_factors: trailing block is singular", std::nan(""));
    // g2 = F2 F4^{-1}  <=>  F4^T g2^T = F2^T
    const Mat g2 = b.a4.transpose().partialPivLu().solve(b.a2.transpose()).transpose();
    const Mat g1 = b.a1 - g2 * b.a3;
    const auto n = f.rows();
    Mat eta = Mat::Identity(n, n);
    eta.topLeftCorner(k, k) = g1;
    eta.topRightCorner(k, b.l) = g2;
    Mat psi = Mat::Identity(n, n);
    psi.bottomLeftCorner(b.l, k) = b.a3;
    psi.bottomRightCorner(b.l, b.l) = b.a4;
    return {eta, psi};
}

FactorPair decompose_linear_algebraic(const Mat& a, const DriverPath& z, int k, double eps_det)
{
    check_split(a, k, "decompose_linear_algebraic");
    if (z.dim != 1) throw ParameterError("decompose_linear_algebraic: scalar driver required");
    if (!(eps_det > 0.0)) throw ParameterError("decompose_linear_algebraic: eps_det must be positive");
    FactorPair out;
    out.route = "algebraic";
    out.k = k;
    const BreakdownResult br = breakdown_time(a, z, k, eps_det);
    out.breakdown = br.time;
    out.crossing = br.crossing;
    out.crossing_time = br.crossing_time;
    for (std::size_t i = 0; i < z.points(); ++i) {
        if (br.time && z.grid[i] >= *br.time) break;
        const Mat f = expm(a * scalar_value(z, i));
        auto [eta, psi] = split_factors(f, k, 0.0);
        out.times.push_back(z.grid[i]);
        out.eta.push_back(std::move(eta));
        out.psi.push_back(std::move(psi));
        out.det_f4.push_back(det_block(f, k));
    }
    return out;
}

ConstituentField::ConstituentField(const Mat& a, int k) : b_(BlockPartition::of(a, k)), n_(static_cast<int>(a.rows())) {}

Vec ConstituentField::pack(const Mat& g1, const Mat& g2, const Mat& g3, const Mat& g4) const
{
    Vec s(n_ * n_);
    s << g1.reshaped(), g2.reshaped(), g3.reshaped(), g4.reshaped();
    return s;
}

void ConstituentField::unpack(const Vec& s, Mat& g1, Mat& g2, Mat& g3, Mat& g4) const
{
    const int k = b_.k, l = b_.l;
    Eigen::Index off = 0;
    auto take = [&](int r, int c) {
        Mat m = s.segment(off, r * c).reshaped(r, c);
        off += r * c;
        return m;
    };
    g1 = take(k, k);
    g2 = take(k, l);
    g3 = take(l, k);
    g4 = take(l, l);
}

Vec ConstituentField::identity_state() const
{
    const int k = b_.k, l = b_.l;
    return pack(Mat::Identity(k, k), Mat::Zero(k, l), Mat::Zero(l, k), Mat::Identity(l, l));
}

Mat ConstituentField::eval(const Vec& s) const
{
    Mat g1, g2, g3, g4;
    unpack(s, g1, g2, g3, g4);
    const Mat a3g1 = b_.a3 * g1;
    const Mat a3g2 = b_.a3 * g2;
    const Mat d1 = b_.a1 * g1 - g2 * a3g1;
    const Mat d2 = b_.a1 * g2 + b_.a2 - g2 * a3g2 - g2 * b_.a4;
    const Mat d3 = a3g1 + a3g2 * g3 + b_.a4 * g3;
    const Mat d4 = a3g2 * g4 + b_.a4 * g4;
    Mat out(n_ * n_, 1);
    out.col(0) = pack(d1, d2, d3, d4);
    return out;
}

FactorPair decompose_linear_sde(const Mat& a, const DriverPath& z, int k, double eps_det)
{
    check_split(a, k, "decompose_linear_sde");
    if (z.dim != 1) throw ParameterError("decompose_linear_sde: scalar driver required");
    if (!(eps_det > 0.0)) throw ParameterError("decompose_linear_sde: eps_det must be positive");
    const ConstituentField field(a, k);
    const StatePath sp = solve_path(field, z, field.identity_state(), SolveOptions{JumpRule::marcus, 0, true});

    FactorPair out;
    out.route = "sde";
    out.k = k;
    const auto n = a.rows();
    const int l = static_cast<int>(n) - k;
    double prev_det = 1.0;
    auto to_factors = [&](const Vec& s, Mat& eta, Mat& psi) {
        Mat g1, g2, g3, g4;
        field.unpack(s, g1, g2, g3, g4);
        eta = Mat::Identity(n, n);
        eta.topLeftCorner(k, k) = g1;
        eta.topRightCorner(k, l) = g2;
        psi = Mat::Identity(n, n);
        psi.bottomLeftCorner(l, k) = g3;
        psi.bottomRightCorner(l, l) = g4;
        return g4.partialPivLu().determinant();
    };
    for (std::size_t i = 0; i < z.points(); ++i) {
        if (!sp.complete() && z.grid[i] >= sp.stop_time) {
            out.scheme_failure = true;
            out.failure_reason = sp.stop_reason;
            break;
        }
        Mat eta, psi;
        if (const JumpRecord* j = sp.jump(i)) {
            Mat e0, p0;
            const double pre = to_factors(j->pre, e0, p0);
            if (std::signbit(pre) != std::signbit(prev_det)) {
                out.breakdown = z.grid[i];
                break;
            }
            prev_det = pre;
            const double post = to_factors(sp.state(i), eta, psi);
            if (std::signbit(post) != std::signbit(pre) && !out.crossing) {
                out.crossing = true;
                out.crossing_time = z.grid[i];
            }
        }
        const double d = to_factors(sp.state(i), eta, psi);
        if (!(std::abs(d) >= eps_det) || (!sp.jump(i) && std::signbit(d) != std::signbit(prev_det))) {
            out.breakdown = z.grid[i];
            break;
        }
        prev_det = d;
        out.times.push_back(z.grid[i]);
        out.eta.push_back(std::move(eta));
        out.psi.push_back(std::move(psi));
        out.det_f4.push_back(d);
    }
    return out;
}

BreakdownResult breakdown_time(const Mat& a, const DriverPath& z, int k, double eps_det)
{
    check_split(a, k, "breakdown_time");
    if (!(eps_det > 0.0)) throw ParameterError("breakdown_time: eps_det must be positive");
    if (z.dim != 1) throw ParameterError("breakdown_time: scalar driver required");
    BreakdownResult r;
    double prev = 1.0;
    for (std::size_t i = 0; i < z.points(); ++i) {
        if (const JumpEvent* j = z.jump(i)) {
            const double pre = det_block(expm(a * j->pre[0]), k);
            if (std::signbit(pre) != std::signbit(prev) || !(std::abs(pre) >= eps_det)) {
                r.time = z.grid[i];
                return r;
            }
            const double post = det_block(expm(a * scalar_value(z, i)), k);
            if (!(std::abs(post) >= eps_det)) {
                r.time = z.grid[i];
                return r;
            }
            if (std::signbit(post) != std::signbit(pre) && !r.crossing) {
                r.crossing = true;
                r.crossing_time = z.grid[i];
            }
            prev = post;
            continue;
        }
        const double d = det_block(expm(a * scalar_value(z, i)), k);
        if (!(std::abs(d) >= eps_det) || std::signbit(d) != std::signbit(prev)) {
            r.time = z.grid[i];
            return r;
        }
        prev = d;
    }
    return r;
}

std::vector<Mat> cascade_factorize(const Mat& f, const std::vector<int>& flag_dims)
{
    if (f.rows() != f.cols()) throw ParameterError("cascade_factorize: matrix must be square");
    if (flag_dims.empty()) throw ParameterError("cascade_factorize: empty flag");
    for (std::size_t i = 0; i < flag_dims.size(); ++i) {
        if (flag_dims[i] < 1 || flag_dims[i] >= f.rows())
            throw ParameterError("cascade_factorize: flag dimensions must lie in [1, n)");
        if (i > 0 && flag_dims[i] <= flag_dims[i - 1])
            throw ParameterError("cascade_factorize: flag dimensions must increase strictly");
    }
    const double scale = std::max(1.0, f.norm());
    std::vector<Mat> rev;
    Mat cur = f;
    for (std::size_t j = flag_dims.size(); j-- > 0;) {
        const int d = flag_dims[j];
        const Eigen::Index l = f.rows() - d;
        const double det = cur.bottomRightCorner(l, l).partialPivLu().determinant();
        if (!(std::abs(det) > 1e-12 * std::pow(scale, static_cast<double>(l))))
            throw CascadeBreakdownError("cascade_factorize: nested trailing minor vanishes at flag level " +
                                            std::to_string(j + 1),
                                        static_cast<int>(j + 1));
        auto [eta, psi] = split_factors(cur, d, 0.0);
        rev.push_back(std::move(psi));
        cur = std::move(eta);
    }
    rev.push_back(std::move(cur));
    return {rev.rbegin(), rev.rend()};
}

}  // namespace mflow
