#include <gtest/gtest.h>

#include <cmath>

#include "mflow/bundle.hpp"
#include "mflow/errors.hpp"

using namespace mflow;

namespace {

Mat bracket(const Mat& a, const Mat& b) { return a * b - b * a; }

Mat rot2(double t)
{
    Mat r(2, 2);
    r << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
    return r;
}

Mat skew2(double w)
{
    Mat a(2, 2);
    a << 0.0, -w, w, 0.0;
    return a;
}

}  // namespace

TEST(Bundle, So3BasisCommutators)
{
    const Mat e1 = so3_basis(0), e2 = so3_basis(1), e3 = so3_basis(2);
    EXPECT_LT((bracket(e1, e2) - e3).norm(), 1e-15);
    EXPECT_LT((bracket(e2, e3) - e1).norm(), 1e-15);
    EXPECT_LT((bracket(e3, e1) - e2).norm(), 1e-15);
    for (const Mat& e : {e1, e2, e3}) EXPECT_LT((e + e.transpose()).norm(), 1e-15);
    // e3 rotates e1 towards e2
    EXPECT_NEAR((e3 * Eigen::Vector3d::UnitX())(1), 1.0, 1e-15);
}

TEST(Bundle, GroupMembership)
{
    EXPECT_TRUE(in_group(rot2(0.3), GroupTag::so2));
    Mat refl = Mat::Identity(2, 2);
    refl(1, 1) = -1.0;
    EXPECT_FALSE(in_group(refl, GroupTag::so2));
    EXPECT_TRUE(in_group(expm(0.7 * so3_basis(0) + 0.2 * so3_basis(2)), GroupTag::so3));
    Mat block = Mat::Zero(4, 4);
    block.topLeftCorner(2, 2) = rot2(0.4);
    block.bottomRightCorner(2, 2) = rot2(-1.1);
    EXPECT_TRUE(in_group(block, GroupTag::so2xso2));
    block(0, 3) = 0.1;
    EXPECT_FALSE(in_group(block, GroupTag::so2xso2));
}

TEST(Bundle, TrivialFactorsAreExact)
{
    const auto z = brownian_with_jumps(3, 1.0, 1e-2, {0.5}, {Vec::Constant(1, 1.3)});
    const auto f = trivial_bundle_decompose(skew2(1.0), skew2(-0.6), z, rot2(0.2), rot2(1.0));
    ASSERT_EQ(f.composite.mats.size(), z.points());
    EXPECT_LT(f.max_error, 1e-12);
    for (std::size_t i = 0; i < z.points(); i += 11) {
        const double zt = z.value(i)(0);
        EXPECT_LT((f.eta.mats[i].topLeftCorner(2, 2) - rot2(zt)).norm(), 1e-13);
        EXPECT_TRUE(f.eta.mats[i].bottomRightCorner(2, 2).isIdentity(1e-15));
        // SO(2) is abelian, so the conjugation by y0 drops out
        EXPECT_LT((f.psi.mats[i].bottomRightCorner(2, 2) - rot2(-0.6 * zt)).norm(), 1e-13);
        EXPECT_TRUE(in_group(f.composite.mats[i], GroupTag::so2xso2));
    }
}

TEST(Bundle, TrivialRequiresSkewGenerators)
{
    const auto z = deterministic_time(1.0, 0.1);
    EXPECT_THROW(trivial_bundle_decompose(Mat::Identity(2, 2), skew2(1.0), z, rot2(0), rot2(0)), ParameterError);
}

TEST(Bundle, SphereSplitProjections)
{
    const auto split = sphere_split();
    const Mat w = 0.3 * so3_basis(0) - 1.2 * so3_basis(1) + 0.7 * so3_basis(2);
    EXPECT_LT((split.project_vertical(w) - 0.7 * so3_basis(2)).norm(), 1e-14);
    EXPECT_LT((split.project_horizontal(w) - (0.3 * so3_basis(0) - 1.2 * so3_basis(1))).norm(), 1e-14);
    // only the skew part is projected
    EXPECT_LT((split.project_vertical(w + Mat::Identity(3, 3)) - 0.7 * so3_basis(2)).norm(), 1e-14);
}

TEST(Bundle, ReductivityOfTheSplit)
{
    EXPECT_LT(sphere_split().invariance_defect(), 1e-14);
    EXPECT_GT(sphere_split().swapped().invariance_defect(), 0.1);
}

TEST(Bundle, PureVerticalGeneratorLeavesEtaFixed)
{
    const auto z = brownian_with_jumps(1, 1.0, 1e-3, {0.4}, {Vec::Constant(1, 0.9)});
    const auto r = reductive_decompose(so3_basis(2), sphere_split(), z, Mat::Identity(3, 3));
    ASSERT_TRUE(r.complete) << r.stop_reason;
    for (const auto& e : r.eta.mats) EXPECT_LT((e - Mat::Identity(3, 3)).norm(), 1e-14);
    EXPECT_LT(r.max_composite_error, 1e-12);
}

TEST(Bundle, PureHorizontalGeneratorMovesOnlyEta)
{
    const auto z = brownian_with_jumps(2, 1.0, 1e-3, {0.4}, {Vec::Constant(1, 0.9)});
    const auto r = reductive_decompose(so3_basis(0), sphere_split(), z, Mat::Identity(3, 3));
    ASSERT_TRUE(r.complete) << r.stop_reason;
    for (const auto& p : r.psi.mats) EXPECT_LT((p - Mat::Identity(3, 3)).norm(), 1e-14);
    for (std::size_t i = 0; i < z.points(); i += 97)
        EXPECT_LT((r.eta.mats[i] - expm(so3_basis(0) * z.value(i)(0))).norm(), 1e-10);
}

TEST(Bundle, MixedGeneratorIsAHorizontalLift)
{
    const Mat w = 0.8 * so3_basis(0) + 0.5 * so3_basis(1) + 1.1 * so3_basis(2);
    const auto z = brownian_with_jumps(4, 1.0, 1e-4, {0.3, 0.7}, {Vec::Constant(1, 0.6), Vec::Constant(1, -0.4)});
    const auto split = sphere_split();
    const auto r = reductive_decompose(w, split, z, Mat::Identity(3, 3));
    ASSERT_TRUE(r.complete) << r.stop_reason;
    EXPECT_EQ(r.jump_sizes.size(), 2u);
    for (const auto& e : r.eta.mats) ASSERT_TRUE(in_group(e, GroupTag::so3, 1e-9));
    const auto lift = horizontal_lift_check(r, split, z);
    EXPECT_LT(lift.projection, 1e-3);
    EXPECT_LT(lift.connection, 1e-5);
    EXPECT_LT(r.max_composite_error, 1e-2);
}

TEST(Bundle, SwappedSplitIsNotALift)
{
    const Mat w = 0.8 * so3_basis(0) + 0.5 * so3_basis(1) + 1.1 * so3_basis(2);
    const auto z = gen_brownian(5, 1.0, 1e-3);
    const auto split = sphere_split().swapped();
    const auto r = reductive_decompose(w, split, z, Mat::Identity(3, 3));
    const auto lift = horizontal_lift_check(r, split, z);
    EXPECT_GT(lift.connection, 1e-3);
}
