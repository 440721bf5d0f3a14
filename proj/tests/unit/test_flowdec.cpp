#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "mflow/errors.hpp"
#include "mflow/flowdec.hpp"

using namespace mflow;

namespace {

Mat rotation_generator()
{
    Mat a(2, 2);
    a << 0.0, -1.0, 1.0, 0.0;
    return a;
}

Vec v2(double a, double b)
{
    Vec v(2);
    v << a, b;
    return v;
}

SamplerPtr rotation_sampler(double horizon, double dt)
{
    return std::make_shared<FlowSampler>(linear_field(rotation_generator()), deterministic_time(horizon, dt));
}

}  // namespace

TEST(FlowSampler, RotationFlowAndVerticalDeterminant)
{
    const auto s = rotation_sampler(2.0, 1e-2);
    EXPECT_TRUE(s->exact());
    const Vec p = v2(0.3, -0.8);
    for (std::size_t i : {10u, 100u, 157u, 200u}) {
        const double t = s->driver().grid[i];
        EXPECT_LT((s->flow(i, p) - expm(rotation_generator() * t) * p).norm(), 1e-13);
        // phi^2 = x sin t + y cos t
        EXPECT_NEAR(s->vertical_det(0, i, p, 1e-5), std::cos(t), 1e-9);
    }
}

// Property: transitions compose along the grid.
TEST(FlowSampler, TransitionsCompose)
{
    const auto s = std::make_shared<FlowSampler>(catalog_field(CatalogName::pendulum, 1.0),
                                                 brownian_with_jumps(3, 1.0, 1e-2, {0.5}, {Vec::Constant(1, 0.6)}));
    const Vec p = v2(0.4, 0.1);
    for (std::size_t mid : {20u, 50u, 70u}) {
        const Vec direct = s->flow(100, p);
        const Vec split = s->transition(mid, 100, s->flow(mid, p));
        EXPECT_LT((direct - split).norm(), 1e-12) << mid;
    }
}

TEST(Flowdec, PointwiseFactorsRecomposeTheFlow)
{
    const auto s = rotation_sampler(1.0, 1e-2);
    const Vec x0 = v2(1.0, 0.0);
    const auto pf = pointwise_decompose(s, 0, 100, x0, Window{x0, 0.5, 0.5}, 7);
    EXPECT_EQ(pf.masked, 0);
    EXPECT_LT(pf.residual, 1e-9);
    const Vec p = v2(1.2, 0.3);
    const Vec psi = pf.psi(p);
    EXPECT_EQ(psi(0), p(0));
    EXPECT_NEAR(psi(1), s->flow(100, p)(1), 1e-13);
    EXPECT_LT((pf.eta(psi) - s->flow(100, p)).norm(), 1e-9);
}

TEST(Flowdec, NonlinearPointwiseResidualIsSmall)
{
    const auto s = std::make_shared<FlowSampler>(catalog_field(CatalogName::pendulum, 1.0), gen_brownian(4, 0.5, 1e-3));
    const Vec x0 = v2(0.5, 0.2);
    const auto pf = pointwise_decompose(s, 0, s->points() - 1, x0, Window{x0, 0.3, 0.3}, 5);
    EXPECT_LT(pf.residual, 1e-8);
}

TEST(Flowdec, SolveBetaInvertsVerticalComponent)
{
    const auto s = rotation_sampler(1.0, 1e-2);
    const double a = 0.7, b = 0.2;
    const auto beta = solve_beta(*s, 0, 50, a, b, 0.0, 1e-5);
    ASSERT_TRUE(beta.has_value());
    EXPECT_NEAR(s->flow(50, v2(a, *beta))(1), b, 1e-10);
}

TEST(Flowdec, BreakdownNearQuarterTurn)
{
    const auto s = rotation_sampler(2.0, 1e-3);
    const auto br = detect_breakdown(*s, v2(1.0, 0.0));
    ASSERT_TRUE(br.time.has_value());
    EXPECT_NEAR(*br.time, std::numbers::pi / 2, 2e-3);
    const auto none = detect_breakdown(*rotation_sampler(1.0, 1e-3), v2(1.0, 0.0));
    EXPECT_FALSE(none.index.has_value());
}

TEST(Flowdec, AlternateRestartsAndRecomposes)
{
    const auto s = rotation_sampler(2.0 * std::numbers::pi, 1e-3);
    const Vec x0 = v2(1.0, 0.0);
    const auto fac = alternate_decompose(s, x0, 2.0 * std::numbers::pi, 1e-6, 0.1);
    EXPECT_FALSE(fac.stalled) << fac.diagnostic;
    EXPECT_GE(fac.restarts(), 2u);
    EXPECT_EQ(fac.last_index(), s->points() - 1);
    const auto times = fac.breakpoint_times();
    EXPECT_TRUE(std::is_sorted(times.begin(), times.end()));
    for (std::size_t i : {std::size_t{500}, std::size_t{2000}, std::size_t{4000}, s->points() - 1}) {
        const Vec p = v2(1.05, -0.05);
        EXPECT_LT((recompose(fac, i, p) - s->flow(i, p)).norm(), 1e-6) << i;
    }
}

TEST(Flowdec, RecomposeOutsideWindowThrows)
{
    const auto s = rotation_sampler(1.0, 1e-2);
    const Vec x0 = v2(1.0, 0.0);
    const auto fac = alternate_decompose(s, x0, 1.0, 1e-6, 0.1, 0.2);
    EXPECT_THROW(recompose(fac, 50, v2(5.0, 5.0)), DomainError);
    EXPECT_THROW(recompose(fac, s->points() + 3, x0), DomainError);
}

TEST(Flowdec, RejectsBadArguments)
{
    const auto s = rotation_sampler(1.0, 1e-2);
    EXPECT_THROW(alternate_decompose(s, v2(1, 0), 1.0, 1e-6, 0.0), ParameterError);
    EXPECT_THROW(alternate_decompose(nullptr, v2(1, 0), 1.0, 1e-6, 0.1), ParameterError);
}
