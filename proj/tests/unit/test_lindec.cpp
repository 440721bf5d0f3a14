#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "mflow/errors.hpp"
#include "mflow/lindec.hpp"

using namespace mflow;

namespace {

Mat random_matrix(std::mt19937_64& rng, int n, double scale = 1.0)
{
    std::normal_distribution<double> nd(0.0, scale);
    Mat m(n, n);
    for (int c = 0; c < n; ++c)
        for (int r = 0; r < n; ++r) m(r, c) = nd(rng);
    return m;
}

Mat rotation_generator()
{
    Mat a(2, 2);
    a << 0.0, -1.0, 1.0, 0.0;
    return a;
}

// Matrix with prescribed real eigenvalues and complex pairs re +- i im.
Mat with_spectrum(std::mt19937_64& rng, const std::vector<double>& reals,
                  const std::vector<std::pair<double, double>>& pairs)
{
    const int n = static_cast<int>(reals.size() + 2 * pairs.size());
    Mat d = Mat::Zero(n, n);
    int i = 0;
    for (double r : reals) d(i, i) = r, ++i;
    for (auto [re, im] : pairs) {
        d(i, i) = re;
        d(i + 1, i + 1) = re;
        d(i, i + 1) = im;
        d(i + 1, i) = -im;
        i += 2;
    }
    Mat q = random_matrix(rng, n) + 3.0 * Mat::Identity(n, n);
    return q * d * q.inverse();
}

}  // namespace

TEST(Lindec, BlockPartitionRoundTrips)
{
    std::mt19937_64 rng(1);
    const Mat a = random_matrix(rng, 5);
    for (int k = 1; k < 5; ++k) {
        const auto b = BlockPartition::of(a, k);
        EXPECT_EQ(b.a1.rows(), k);
        EXPECT_EQ(b.a4.rows(), 5 - k);
        EXPECT_EQ(b.assemble(), a);
    }
}

// Property over random F: the split reproduces F and has the block shape.
TEST(Lindec, SplitFactorsReproduceProduct)
{
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 2 + trial % 4;
        const int k = 1 + trial % (n - 1);
        const Mat f = random_matrix(rng, n) + 2.0 * Mat::Identity(n, n);
        const auto [eta, psi] = split_factors(f, k);
        const int l = n - k;
        EXPECT_LT((eta * psi - f).norm(), 1e-10 * std::max(1.0, f.norm()));
        EXPECT_TRUE(eta.bottomLeftCorner(l, k).isZero(0.0));
        EXPECT_TRUE(eta.bottomRightCorner(l, l).isIdentity(0.0));
        EXPECT_TRUE(psi.topLeftCorner(k, k).isIdentity(0.0));
        EXPECT_TRUE(psi.topRightCorner(k, l).isZero(0.0));
    }
}

TEST(Lindec, SplitThrowsOnSingularMinor)
{
    Mat f(2, 2);
    f << 1.0, 2.0, 3.0, 0.0;
    EXPECT_THROW(split_factors(f, 1), BreakdownError);
}

// F = [[c, -s], [s, c]] splits as eta = [[1/c, -s/c], [0, 1]],
// psi = [[1, 0], [s, c]].
TEST(Lindec, RotationFactorsHaveClosedForm)
{
    const auto z = deterministic_time(1.4, 1e-2);
    const auto fac = decompose_linear_algebraic(rotation_generator(), z, 1);
    ASSERT_EQ(fac.size(), z.points());
    EXPECT_FALSE(fac.breakdown.has_value());
    for (std::size_t i = 0; i < fac.size(); ++i) {
        const double t = fac.times[i], c = std::cos(t), s = std::sin(t);
        EXPECT_NEAR(fac.eta[i](0, 0), 1.0 / c, 1e-12 / (c * c));
        EXPECT_NEAR(fac.eta[i](0, 1), -s / c, 1e-12 / (c * c));
        EXPECT_NEAR(fac.psi[i](1, 0), s, 1e-13);
        EXPECT_NEAR(fac.psi[i](1, 1), c, 1e-13);
        EXPECT_NEAR(fac.det_f4[i], c, 1e-13);
    }
}

TEST(Lindec, SdeRouteAgreesWithAlgebraic)
{
    std::mt19937_64 rng(3);
    const Mat a = random_matrix(rng, 3, 0.5);
    const auto z = brownian_with_jumps(4, 0.5, 1e-4, {0.25}, {Vec::Constant(1, 0.3)});
    const auto alg = decompose_linear_algebraic(a, z, 1);
    const auto sde = decompose_linear_sde(a, z, 1);
    ASSERT_FALSE(sde.scheme_failure) << sde.failure_reason;
    const std::size_t n = std::min(alg.size(), sde.size());
    ASSERT_GT(n, 100u);
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, (alg.product(i) - sde.product(i)).norm());
    EXPECT_LT(worst, 1e-3);
}

TEST(Lindec, ConstituentFieldPacksBlocks)
{
    std::mt19937_64 rng(5);
    const ConstituentField cf(random_matrix(rng, 4), 2);
    EXPECT_EQ(cf.state_dim(), 16);
    const Mat g1 = random_matrix(rng, 2), g2 = random_matrix(rng, 2), g3 = random_matrix(rng, 2),
              g4 = random_matrix(rng, 2);
    Mat h1, h2, h3, h4;
    cf.unpack(cf.pack(g1, g2, g3, g4), h1, h2, h3, h4);
    EXPECT_EQ(h1, g1);
    EXPECT_EQ(h2, g2);
    EXPECT_EQ(h3, g3);
    EXPECT_EQ(h4, g4);
    cf.unpack(cf.identity_state(), h1, h2, h3, h4);
    EXPECT_TRUE(h1.isIdentity(0.0));
    EXPECT_TRUE(h2.isZero(0.0));
    EXPECT_TRUE(h3.isZero(0.0));
    EXPECT_TRUE(h4.isIdentity(0.0));
}

TEST(Lindec, RotationBreaksDownAtQuarterTurn)
{
    const double dt = 1e-3;
    const auto z = deterministic_time(2.0, dt);
    const auto r = breakdown_time(rotation_generator(), z, 1, 1e-9);
    ASSERT_TRUE(r.time.has_value());
    EXPECT_NEAR(*r.time, std::numbers::pi / 2, 1.5 * dt);
    EXPECT_FALSE(r.crossing);
    const auto fac = decompose_linear_algebraic(rotation_generator(), z, 1, 1e-9);
    ASSERT_TRUE(fac.breakdown.has_value());
    EXPECT_LT(fac.times.back(), std::numbers::pi / 2);
}

TEST(Lindec, JumpAcrossSingularityOnlyFlagsCrossing)
{
    // det F4 = cos Z jumps from cos 0.2 > 0 to cos 2.2 < 0
    const auto z = jump_path(1.0, {0.5}, {Vec::Constant(1, 2.0)}, 0.05);
    Vec shift = Vec::Constant(1, 0.2);
    auto shifted = z;
    for (Eigen::Index c = 0; c < shifted.values.cols(); ++c) shifted.values.col(c) += shift;
    for (auto& j : shifted.jumps) j.pre += shift;
    const auto r = breakdown_time(rotation_generator(), shifted, 1);
    EXPECT_TRUE(r.crossing);
    ASSERT_TRUE(r.crossing_time.has_value());
    EXPECT_NEAR(*r.crossing_time, 0.5, 1e-12);
    EXPECT_FALSE(r.time.has_value());
}

TEST(Lindec, SpectrumCounts)
{
    std::mt19937_64 rng(6);
    const Mat a = with_spectrum(rng, {1.0, -2.0, 0.5}, {{0.1, 1.0}});
    const auto c = spectrum_counts(a);
    EXPECT_EQ(c.reals, 3);
    EXPECT_EQ(c.pairs, 1);
}

// Oracle: the selected leading block has exactly the requested eigenvalue
// kinds (checked with Eigen's eigen solver), and its span is invariant.
TEST(Lindec, SchurSelectionGivesInvariantSubspace)
{
    std::mt19937_64 rng(7);
    struct Case {
        std::vector<double> reals;
        std::vector<std::pair<double, double>> pairs;
        int a, b;
    };
    const std::vector<Case> cases{{{1.0, -1.0, 2.0}, {}, 2, 0},
                                  {{0.5}, {{0.2, 1.5}}, 0, 1},
                                  {{0.5, -0.3}, {{0.2, 1.5}, {-1.0, 0.7}}, 1, 1},
                                  {{}, {{0.2, 1.5}, {-1.0, 0.7}}, 0, 1}};
    for (const auto& c : cases) {
        const Mat a = with_spectrum(rng, c.reals, c.pairs);
        const auto sel = schur_foliation_select(a, c.a, c.b);
        const int n = static_cast<int>(a.rows());
        const int k = c.a + 2 * c.b;
        ASSERT_EQ(sel.k, k);
        EXPECT_LT((sel.p.transpose() * sel.p - Mat::Identity(n, n)).norm(), 1e-12);
        const Mat q = sel.p.leftCols(k);
        // A Q = Q (Q^T A Q)
        EXPECT_LT((a * q - q * (q.transpose() * a * q)).norm(), 1e-9 * a.norm());
        EXPECT_TRUE(sel.conjugated.bottomLeftCorner(n - k, k).isZero(0.0));
        const Eigen::EigenSolver<Mat> es(sel.conjugated.topLeftCorner(k, k));
        int reals = 0;
        for (Eigen::Index i = 0; i < k; ++i) reals += std::abs(es.eigenvalues()(i).imag()) < 1e-9 ? 1 : 0;
        EXPECT_EQ(reals, c.a);
    }
}

TEST(Lindec, InfeasibleSelectionThrows)
{
    std::mt19937_64 rng(8);
    const Mat a = with_spectrum(rng, {1.0}, {{0.0, 1.0}});
    EXPECT_THROW(schur_foliation_select(a, 2, 0), SpectralSelectionError);
    EXPECT_THROW(schur_foliation_select(a, 0, 2), SpectralSelectionError);
}

// Property: the cascade reproduces F and factor j moves only its rows.
TEST(Lindec, CascadeFactorsReproduceAndRespectFlag)
{
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        const Mat f = random_matrix(rng, 5, 0.3) + Mat::Identity(5, 5);
        const std::vector<int> dims = trial % 2 ? std::vector<int>{1, 3} : std::vector<int>{2, 3, 4};
        const auto factors = cascade_factorize(f, dims);
        ASSERT_EQ(factors.size(), dims.size() + 1);
        Mat prod = Mat::Identity(5, 5);
        for (const auto& m : factors) prod = prod * m;
        EXPECT_LT((prod - f).norm(), 1e-10);
        for (std::size_t j = 0; j < factors.size(); ++j) {
            const int lo = j == 0 ? 0 : dims[j - 1];
            const int hi = j < dims.size() ? dims[j] : 5;
            for (int r = 0; r < 5; ++r) {
                if (r >= lo && r < hi) continue;
                EXPECT_LT((factors[j].row(r) - Mat::Identity(5, 5).row(r)).norm(), 1e-12) << j << " " << r;
            }
        }
    }
}

TEST(Lindec, CascadeReportsVanishingMinor)
{
    Mat f = Mat::Identity(3, 3);
    f(2, 2) = 0.0;
    f(2, 0) = 1.0;
    f(0, 2) = 1.0;
    try {
        cascade_factorize(f, {1, 2});
        FAIL() << "expected CascadeBreakdownError";
    } catch (const CascadeBreakdownError& e) {
        EXPECT_EQ(e.level, 2);
    }
    EXPECT_THROW(cascade_factorize(f, {2, 1}), ParameterError);
}
