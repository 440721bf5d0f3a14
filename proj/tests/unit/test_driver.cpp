#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mflow/driver.hpp"
#include "mflow/errors.hpp"

using namespace mflow;

TEST(Driver, BrownianIsDeterministicPerSeed)
{
    const auto a = gen_brownian(11, 1.0, 1e-2, 2);
    const auto b = gen_brownian(11, 1.0, 1e-2, 2);
    const auto c = gen_brownian(12, 1.0, 1e-2, 2);
    EXPECT_EQ(a.values, b.values);
    EXPECT_NE(a.values, c.values);
    EXPECT_EQ(a.points(), 101u);
    EXPECT_EQ(a.values.rows(), 2);
    EXPECT_TRUE(a.values.col(0).isZero());
    EXPECT_DOUBLE_EQ(a.grid.back(), 1.0);
}

TEST(Driver, ValuesAreCumulativeIncrements)
{
    const auto p = brownian_with_jumps(5, 1.0, 1e-2, {0.3, 0.71}, {Vec::Constant(1, 0.5), Vec::Constant(1, -1.2)});
    for (std::size_t i = 1; i < p.points(); ++i) {
        Vec expect = p.value(i - 1) + p.increment(i);
        if (const auto* j = p.jump(i)) {
            EXPECT_NEAR((j->pre - (p.value(i - 1) + p.increment(i))).norm(), 0.0, 1e-14);
            expect += j->size;
        }
        EXPECT_NEAR((p.value(i) - expect).norm(), 0.0, 1e-13) << i;
    }
    ASSERT_EQ(p.jumps.size(), 2u);
    EXPECT_NEAR(p.grid[p.jumps[0].index], 0.3, 1e-12);
    EXPECT_NEAR(p.grid[p.jumps[1].index], 0.71, 1e-12);
    EXPECT_NEAR(p.jump_square_sum(), 0.25 + 1.44, 1e-14);
}

TEST(Driver, BrownianQuadraticVariationNearHorizon)
{
    // [W,W]_T concentrates at T; std of the realized QV is T*sqrt(2/N).
    double mean = 0.0;
    const int seeds = 20;
    for (int s = 0; s < seeds; ++s) {
        const auto p = gen_brownian(100 + s, 2.0, 1e-3);
        const auto qv = quadratic_variation(p);
        mean += qv.continuous(0, 0) / seeds;
        EXPECT_TRUE(qv.discrete.isZero());
    }
    EXPECT_NEAR(mean, 2.0, 4.0 * 2.0 * std::sqrt(2.0 / 2000.0) / std::sqrt(seeds));
}

TEST(Driver, DeterministicTimeIsIdentityPath)
{
    const auto p = deterministic_time(1.5, 0.25);
    ASSERT_EQ(p.points(), 7u);
    for (std::size_t i = 0; i < p.points(); ++i) EXPECT_NEAR(p.value(i)(0), p.grid[i], 1e-15);
    EXPECT_TRUE(p.jumps.empty());
    EXPECT_TRUE(p.qv_c.isZero());
}

TEST(Driver, CoarsenRealizesQvFromCoarseIncrements)
{
    const auto fine = gen_brownian(3, 1.0, 1e-3);
    const auto coarse = coarsen(fine, 10);
    ASSERT_EQ(coarse.points(), 101u);
    double qv = 0.0;
    for (std::size_t i = 1; i < coarse.points(); ++i) {
        EXPECT_NEAR((coarse.value(i) - fine.value(10 * i)).norm(), 0.0, 1e-13);
        qv += coarse.increment(i).squaredNorm();
    }
    EXPECT_NEAR(coarse.qv_at(coarse.points() - 1)(0, 0), qv, 1e-12);
    EXPECT_NE(coarse.qv_at(coarse.points() - 1)(0, 0), fine.qv_at(fine.points() - 1)(0, 0));
}

TEST(Driver, CoarsenRejectsJumpsOffTheCoarseGrid)
{
    const auto p = brownian_with_jumps(1, 1.0, 0.1, {0.35}, {Vec::Ones(1)});
    EXPECT_THROW(coarsen(p, 4), Error);
}

TEST(Driver, RemoveSmallJumpsFoldsIntoContinuousPart)
{
    const auto p = jump_path(1.0, {0.2, 0.5, 0.8}, {Vec::Constant(1, 0.05), Vec::Constant(1, 1.0), Vec::Constant(1, -0.02)}, 0.1);
    const auto q = remove_small_jumps(p, 0.1);
    ASSERT_EQ(q.jumps.size(), 1u);
    EXPECT_EQ(q.values, p.values);
    EXPECT_TRUE(is_coupled(p, q));
    EXPECT_FALSE(is_coupled(q, p));
    const auto omitted = omitted_jumps(p, q);
    ASSERT_EQ(omitted.size(), 2u);
    EXPECT_NEAR(omitted[0].size(0), 0.05, 1e-15);
    EXPECT_NEAR(omitted[1].size(0), -0.02, 1e-15);
    // folded jumps appear as continuous increments
    EXPECT_NEAR(q.increment(p.jumps[0].index)(0), 0.05, 1e-15);
}

TEST(Driver, CompoundPoissonCountMatchesRate)
{
    const double rate = 3.0, horizon = 10.0;
    double count = 0.0;
    const int seeds = 200;
    for (int s = 0; s < seeds; ++s) count += gen_compound_poisson(s, horizon, rate, FixedJump{1.0}).jumps.size();
    count /= seeds;
    const double sd = std::sqrt(rate * horizon / seeds);
    EXPECT_NEAR(count, rate * horizon, 4.0 * sd);
}

TEST(Driver, CompoundPoissonIsPiecewiseConstant)
{
    const auto p = gen_compound_poisson(9, 5.0, 2.0, UniformJump{-1.0, 1.0}, 0.05);
    for (std::size_t i = 1; i < p.points(); ++i) EXPECT_TRUE(p.increment(i).isZero());
    for (const auto& j : p.jumps) {
        EXPECT_GE(j.size(0), -1.0);
        EXPECT_LE(j.size(0), 1.0);
    }
}

// Independent oracle: midpoint quadrature of the omitted square mass
// T * int_{|z|<d} z^2 c |z|^{-1-alpha} dz.
TEST(Driver, LevyThresholdMatchesQuadrature)
{
    for (double alpha : {0.5, 1.0, 1.5}) {
        const LevyParams lp{alpha, 0.7, 1.0};
        const double horizon = 2.0, eps = 0.05;
        const double d = levy_threshold(lp, horizon, eps);
        const int n = 200000;
        double mass = 0.0;
        for (int i = 0; i < n; ++i) {
            const double z = (i + 0.5) * d / n;
            mass += 2.0 * lp.scale * std::pow(z, 1.0 - alpha) * d / n;
        }
        EXPECT_NEAR(horizon * mass, eps, 1e-3 * eps) << alpha;
    }
    EXPECT_THROW(levy_threshold({2.5, 1.0, 1.0}, 1.0, 0.1), ParameterError);
    EXPECT_THROW(levy_threshold({1.0, 1.0, 1.0}, 1.0, 0.0), ParameterError);
}

TEST(Driver, LevyThresholdsAreCoupled)
{
    const LevyParams lp{1.0, 1.0, 0.5};
    const auto fine = gen_levy_truncated(4, 1.0, 1e-3, lp, 0.02);
    const auto coarse = gen_levy_truncated(4, 1.0, 1e-3, lp, 0.1);
    EXPECT_LT(fine.threshold, coarse.threshold);
    EXPECT_GE(fine.path.jumps.size(), coarse.path.jumps.size());
    for (const auto& j : fine.path.jumps) EXPECT_GE(std::abs(j.size(0)), fine.threshold);
    // same large jumps
    for (const auto& j : coarse.path.jumps) {
        bool found = false;
        for (const auto& f : fine.path.jumps)
            found = found || (std::abs(f.time - j.time) < 1e-12 && std::abs(f.size(0) - j.size(0)) < 1e-12);
        EXPECT_TRUE(found);
    }
}

TEST(Driver, IndexAtFindsGridPoint)
{
    const auto p = deterministic_time(1.0, 0.1);
    EXPECT_EQ(p.index_at(0.0), 0u);
    EXPECT_EQ(p.index_at(0.3), 3u);
    EXPECT_EQ(p.index_at(0.35), 4u);
    EXPECT_EQ(p.index_at(1.0), 10u);
}

TEST(Driver, RejectsBadParameters)
{
    EXPECT_THROW(gen_brownian(1, -1.0, 0.1), ParameterError);
    EXPECT_THROW(gen_brownian(1, 1.0, 0.0), ParameterError);
    EXPECT_THROW(gen_compound_poisson(1, 1.0, -2.0, FixedJump{}), ParameterError);
}
