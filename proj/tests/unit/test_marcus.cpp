#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mflow/errors.hpp"
#include "mflow/marcus.hpp"

using namespace mflow;

namespace {

Mat rotation_generator()
{
    Mat a(2, 2);
    a << 0.0, -1.0, 1.0, 0.0;
    return a;
}

Mat mixed_generator()
{
    Mat a(2, 2);
    a << -0.2, 0.9, -0.6, 0.1;
    return a;
}

Vec v2(double a, double b)
{
    Vec v(2);
    v << a, b;
    return v;
}

}  // namespace

TEST(Marcus, HeunMatchesExactLinearSolution)
{
    const Mat a = mixed_generator();
    const auto spec = linear_field(a);
    const Vec x0 = v2(1.0, 0.5);
    std::vector<double> errs;
    for (double dt : {4e-3, 2e-3, 1e-3}) {
        const auto z = gen_brownian(21, 1.0, dt);
        const auto num = solve_path(spec, z, x0);
        const auto ex = solve_exact(spec, z, x0);
        ASSERT_TRUE(num.complete());
        errs.push_back((num.final_state() - ex.final_state()).norm());
    }
    EXPECT_LT(errs.back(), 1e-3);
    // scalar driver: Heun converges at order >= 1 pathwise
    EXPECT_GT(std::log2(errs[0] / errs[2]) / 2.0, 0.8);
}

TEST(Marcus, JumpIsTimeOneFlow)
{
    const Mat a = rotation_generator();
    const auto z = jump_path(1.0, {0.4}, {Vec::Constant(1, 2.0)}, 0.1);
    const Vec x0 = v2(1.0, 0.0);
    const auto p = solve_path(linear_field(a), z, x0);
    ASSERT_EQ(p.jumps.size(), 1u);
    const auto& j = p.jumps[0];
    EXPECT_LT((j.post - expm(2.0 * a) * x0).norm(), 1e-10);
    // the transport curve stays on the unit circle
    for (const auto& s : j.samples) EXPECT_NEAR(s.norm(), 1.0, 1e-10);
    EXPECT_NEAR(p.final_state().norm(), 1.0, 1e-10);
}

TEST(Marcus, EulerJumpLeavesTheCircle)
{
    const auto z = jump_path(1.0, {0.4}, {Vec::Constant(1, 2.0)}, 0.1);
    SolveOptions opts;
    opts.jump_rule = JumpRule::euler;
    const auto p = solve_path(linear_field(rotation_generator()), z, v2(1.0, 0.0), opts);
    EXPECT_NEAR(p.final_state().norm(), std::sqrt(5.0), 1e-12);
}

TEST(Marcus, ExactSolutionUsesMatrixExponential)
{
    const Mat a = mixed_generator();
    const auto z = brownian_with_jumps(3, 1.0, 1e-2, {0.5}, {Vec::Constant(1, -0.8)});
    const auto flows = solve_linear_exact(a, z);
    ASSERT_EQ(flows.flows.size(), z.points());
    for (std::size_t i = 0; i < z.points(); i += 17)
        EXPECT_LT((flows.flows[i] - expm(a * z.value(i)(0))).norm(), 1e-13);
    EXPECT_TRUE(has_exact_solution(linear_field(a)));
    EXPECT_FALSE(has_exact_solution(catalog_field(CatalogName::pendulum)));
    EXPECT_THROW(solve_exact(catalog_field(CatalogName::pendulum), z, v2(0, 0)), ParameterError);
}

// Property: for dx = X(x) o dZ the extended integral of X itself
// telescopes to x_T - x_0.
TEST(Marcus, IntegralOfOwnFieldTelescopes)
{
    const auto spec = catalog_field(CatalogName::pendulum, 1.0);
    const auto field = make_field(spec);
    const auto z = brownian_with_jumps(8, 1.0, 1e-3, {0.3, 0.6}, {Vec::Constant(1, 0.7), Vec::Constant(1, -1.1)});
    const Vec x0 = v2(0.5, 0.0);
    const auto p = solve_path(*field, z, x0);
    const Vec integral = marcus_integral(*field, *field, p, z);
    EXPECT_LT((integral - (p.final_state() - x0)).norm(), 5e-3);
}

TEST(Marcus, SolveManyMatchesIndividualSolves)
{
    const auto field = make_field(catalog_field(CatalogName::van_der_pol, 0.5));
    const auto z = brownian_with_jumps(2, 0.5, 1e-3, {0.25}, {Vec::Constant(1, 0.4)});
    std::vector<Vec> x0s;
    for (int k = 0; k < 6; ++k) x0s.push_back(v2(0.2 * k - 0.5, 0.1 * k));
    const auto many = solve_many(*field, z, x0s);
    ASSERT_EQ(many.size(), x0s.size());
    for (std::size_t k = 0; k < x0s.size(); ++k)
        EXPECT_EQ(many[k].final_state(), solve_path(*field, z, x0s[k]).final_state());
}

TEST(Marcus, ChangeOfVariablesHolds)
{
    const auto z = brownian_with_jumps(4, 1.0, 5e-4, {0.5}, {Vec::Constant(1, 0.9)});
    Mat a(2, 2);
    a << 1.5, 0.3, -0.2, 1.0;
    const Diffeo aff{DiffeoName::affine, a, v2(0.2, 0.1), 1.0, 2};
    const Diffeo cubic{DiffeoName::cubic_plus_identity, {}, {}, 0.3, 2};
    EXPECT_LT(change_of_variables_check(aff, catalog_field(CatalogName::pendulum), z, v2(0.3, 0.1)), 1e-3);
    EXPECT_LT(change_of_variables_check(cubic, catalog_field(CatalogName::pendulum), z, v2(0.3, 0.1)), 1e-3);
}

TEST(Marcus, SimpsonIsExactForCubics)
{
    std::vector<Vec> s;
    const int n = 8;
    for (int i = 0; i <= n; ++i) {
        const double u = static_cast<double>(i) / n;
        s.push_back(Vec::Constant(1, 4.0 * u * u * u - u + 2.0));
    }
    // int_0^1 (4u^3 - u + 2) du = 1 - 1/2 + 2
    EXPECT_NEAR(simpson_average(s)(0), 2.5, 1e-14);
    // odd interval count falls back to the trapezoid rule
    std::vector<Vec> lin{Vec::Constant(1, 0.0), Vec::Constant(1, 1.0), Vec::Constant(1, 2.0), Vec::Constant(1, 3.0)};
    EXPECT_NEAR(simpson_average(lin)(0), 1.5, 1e-15);
}

TEST(Marcus, GridAndJumpBookkeeping)
{
    const auto z = brownian_with_jumps(6, 1.0, 0.05, {0.2, 0.9}, {Vec::Constant(1, 0.3), Vec::Constant(1, 0.3)});
    const auto p = solve_path(linear_field(mixed_generator()), z, v2(1.0, 1.0));
    EXPECT_EQ(p.grid, z.grid);
    ASSERT_EQ(p.jumps.size(), 2u);
    for (const auto& j : p.jumps) {
        EXPECT_EQ(p.jump(j.index), &j);
        EXPECT_LT((p.state(j.index) - j.post).norm(), 1e-15);
    }
}
