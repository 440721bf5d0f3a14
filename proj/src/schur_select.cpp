#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <vector>

#include "mflow/errors.hpp"
#include "mflow/lindec.hpp"

namespace mflow {

namespace {

struct Block {
    Eigen::Index start;
    int size;
};

std::vector<int> block_sizes(const Mat& t)
{
    std::vector<int> sizes;
    const auto n = t.rows();
    for (Eigen::Index i = 0; i < n;) {
        const int s = (i + 1 < n && t(i + 1, i) != 0.0) ? 2 : 1;
        sizes.push_back(s);
        i += s;
    }
    return sizes;
}

// Matrix of x -> t11 x - x t22 acting on vec(x), x of size p x q.
Mat sylvester_operator(const Mat& t11, const Mat& t22)
{
    const auto p = t11.rows(), q = t22.rows();
    Mat k = Mat::Zero(p * q, p * q);
    for (Eigen::Index j = 0; j < q; ++j) {
        k.block(j * p, j * p, p, p) += t11;
        for (Eigen::Index i = 0; i < q; ++i) k.block(i * p, j * p, p, p) -= t22(j, i) * Mat::Identity(p, p);
    }
    return k;
}

// Swaps the adjacent diagonal blocks of sizes p and q starting at row pos,
// updating the Schur vectors u.
void swap_blocks(Mat& t, Mat& u, Eigen::Index pos, int p, int q)
{
    const Mat t11 = t.block(pos, pos, p, p);
    const Mat t22 = t.block(pos + p, pos + p, q, q);
    const Mat t12 = t.block(pos, pos + p, p, q);
    const Vec x = sylvester_operator(t11, t22).fullPivLu().solve(t12.reshaped());
    // [-x; I] spans the invariant subspace belonging to t22
    Mat basis(p + q, q);
    basis << -x.reshaped(p, q), Mat::Identity(q, q);
    const Eigen::Index m = p + q;
    Eigen::HouseholderQR<Mat> qr(basis);
    const Mat qmat = qr.householderQ() * Mat::Identity(m, m);

    t.middleRows(pos, m) = (qmat.transpose() * t.middleRows(pos, m)).eval();
    t.middleCols(pos, m) = (t.middleCols(pos, m) * qmat).eval();
    u.middleCols(pos, m) = (u.middleCols(pos, m) * qmat).eval();

    const double scale = std::max(1.0, t.block(pos, pos, m, m).norm());
    auto low = t.block(pos + q, pos, p, q);
    if (low.norm() > 1e-10 * scale) throw Error("schur_foliation_select: block swap lost accuracy");
    low.setZero();
}

}  // namespace

SpectrumCounts spectrum_counts(const Mat& a)
{
    if (a.rows() != a.cols()) throw ParameterError("spectrum_counts: matrix must be square");
    Eigen::RealSchur<Mat> rs(a);
    SpectrumCounts c;
    for (int s : block_sizes(rs.matrixT())) (s == 1 ? c.reals : c.pairs) += 1;
    return c;
}

SchurSelection schur_foliation_select(const Mat& a, int reals, int pairs)
{
    if (a.rows() != a.cols()) throw ParameterError("schur_foliation_select: matrix must be square");
    if (!a.allFinite()) throw ParameterError("schur_foliation_select: non-finite entries");
    const auto n = a.rows();
    Eigen::RealSchur<Mat> rs(a);
    if (rs.info() != Eigen::Success) throw Error("schur_foliation_select: real Schur decomposition failed");
    Mat t = rs.matrixT();
    Mat u = rs.matrixU();
    std::vector<int> sizes = block_sizes(t);
    const auto avail_r = static_cast<int>(std::count(sizes.begin(), sizes.end(), 1));
    const auto avail_p = static_cast<int>(std::count(sizes.begin(), sizes.end(), 2));
    const int k = reals + 2 * pairs;
    if (reals < 0 || pairs < 0 || reals > avail_r || pairs > avail_p || k < 1 || k >= n)
        throw SpectralSelectionError("schur_foliation_select: (a, b) = (" + std::to_string(reals) + ", " +
                                         std::to_string(pairs) + ") infeasible; spectrum has " +
                                         std::to_string(avail_r) + " real eigenvalues and " +
                                         std::to_string(avail_p) + " complex pairs, and 1 <= a + 2b < n is required",
                                     avail_r, avail_p);

    // mark the first `reals` real blocks and first `pairs` complex blocks
    std::vector<bool> chosen(sizes.size(), false);
    int need_r = reals, need_p = pairs;
    for (std::size_t b = 0; b < sizes.size(); ++b) {
        if (sizes[b] == 1 && need_r > 0) {
            chosen[b] = true;
            --need_r;
        } else if (sizes[b] == 2 && need_p > 0) {
            chosen[b] = true;
            --need_p;
        }
    }
    // bubble chosen blocks to the front, keeping their relative order
    std::size_t front = 0;
    for (std::size_t b = 0; b < sizes.size(); ++b) {
        if (!chosen[b]) continue;
        for (std::size_t j = b; j > front; --j) {
            Eigen::Index pos = 0;
            for (std::size_t i = 0; i + 1 < j; ++i) pos += sizes[i];
            swap_blocks(t, u, pos, sizes[j - 1], sizes[j]);
            std::swap(sizes[j - 1], sizes[j]);
            std::swap(chosen[j - 1], chosen[j]);
        }
        ++front;
    }

    SchurSelection sel;
    sel.p = u;
    sel.k = k;
    sel.conjugated = u.transpose() * a * u;
    auto low = sel.conjugated.bottomLeftCorner(n - k, k);
    if (low.norm() > 1e-9 * std::max(1.0, a.norm()))
        throw Error("schur_foliation_select: selected subspace is not invariant to working accuracy");
    low.setZero();
    return sel;
}

}  // namespace mflow
