#include <gtest/gtest.h>

#include <random>

#include <unsupported/Eigen/MatrixFunctions>

#include "mflow/linalg.hpp"

using namespace mflow;

namespace {

Mat random_matrix(std::mt19937_64& rng, int n, double scale)
{
    std::normal_distribution<double> nd(0.0, scale);
    Mat m(n, n);
    for (int c = 0; c < n; ++c)
        for (int r = 0; r < n; ++r) m(r, c) = nd(rng);
    return m;
}

}  // namespace

// Eigen's MatrixFunctions module is the independent oracle for expm.
TEST(Expm, MatchesEigenMatrixExponential)
{
    std::mt19937_64 rng(20);
    for (int trial = 0; trial < 60; ++trial) {
        const int n = 1 + trial % 6;
        const double scale = std::pow(10.0, -3.0 + 4.0 * (trial % 7) / 6.0);
        const Mat a = random_matrix(rng, n, scale);
        const Mat oracle = a.exp();
        const double rel = (expm(a) - oracle).norm() / std::max(1.0, oracle.norm());
        EXPECT_LT(rel, 1e-12) << "n=" << n << " scale=" << scale;
    }
}

TEST(Expm, ZeroAndDiagonal)
{
    EXPECT_TRUE(expm(Mat::Zero(3, 3)).isApprox(Mat::Identity(3, 3)));
    Mat d = Mat::Zero(3, 3);
    d.diagonal() << 0.5, -2.0, 3.0;
    const Mat e = expm(d);
    EXPECT_NEAR(e(0, 0), std::exp(0.5), 1e-14);
    EXPECT_NEAR(e(1, 1), std::exp(-2.0), 1e-15);
    EXPECT_NEAR(e(2, 2), std::exp(3.0), 1e-12);
    EXPECT_EQ(e(0, 1), 0.0);
}

TEST(Expm, RotationClosedForm)
{
    Mat a(2, 2);
    a << 0.0, -1.0, 1.0, 0.0;
    for (double t : {0.1, 1.0, 3.0, -7.5, 40.0}) {
        const Mat e = expm(a * t);
        EXPECT_NEAR(e(0, 0), std::cos(t), 1e-13);
        EXPECT_NEAR(e(1, 0), std::sin(t), 1e-13);
    }
}

TEST(Expm, InverseAndSkewProperties)
{
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 2 + trial % 4;
        const Mat a = random_matrix(rng, n, 0.8);
        EXPECT_LT((expm(a) * expm(-a) - Mat::Identity(n, n)).norm(), 1e-12);
        const Mat s = a - a.transpose();
        const Mat q = expm(s);
        EXPECT_LT((q.transpose() * q - Mat::Identity(n, n)).norm(), 1e-12);
        EXPECT_NEAR(q.determinant(), 1.0, 1e-12);
        // det exp(A) = exp(tr A)
        EXPECT_NEAR(expm(a).determinant(), std::exp(a.trace()), 1e-10 * std::exp(std::abs(a.trace())));
    }
}

TEST(Polar, ProjectsOntoOrthogonalMatrices)
{
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 2 + trial % 3;
        const Mat a = random_matrix(rng, n, 1.0);
        const Mat rot = expm(Mat(a - a.transpose()));
        const Mat perturbed = rot + 1e-4 * random_matrix(rng, n, 1.0);
        const Mat p = polar_orthonormalize(perturbed);
        EXPECT_LT((p.transpose() * p - Mat::Identity(n, n)).norm(), 1e-13);
        EXPECT_LT((p - rot).norm(), 1e-3);
        EXPECT_GT(p.determinant(), 0.0);
        // idempotent on the group
        EXPECT_LT((polar_orthonormalize(p) - p).norm(), 1e-13);
    }
}

TEST(Slope, RecoversPowerLaw)
{
    Eigen::ArrayXd h(4), e(4);
    h << 0.1, 0.05, 0.025, 0.0125;
    e = 3.0 * h.pow(1.5);
    EXPECT_NEAR(fitted_log2_slope(h, e), 1.5, 1e-12);
    e[2] = 0.0;  // ignored
    EXPECT_NEAR(fitted_log2_slope(h, e), 1.5, 1e-12);
    Eigen::ArrayXd one(1), err(1);
    one << 1.0;
    err << 1.0;
    EXPECT_TRUE(std::isnan(fitted_log2_slope(one, err)));
}
