#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include <mco/convex.hpp>
#include <mco/erlang.hpp>

namespace {

mco::SubproblemSpec two_bs(double c1, double c2, double budget, double lambda_rhs)
{
    mco::SubproblemSpec s;
    s.cost = {c1, c2};
    s.constant = 1.0;
    s.loads = {12.0, 16.0};
    s.prices = {1.0, 1.5};
    s.arrival_rates = {11.0, 13.0};
    s.lower = {mco::erlang_b(15, {12.0}), mco::erlang_b(15, {16.0})};
    s.budget_rhs = budget;
    s.lambda_rhs = lambda_rhs;
    return s;
}

// Minimum over a uniform grid of the feasible box.
double grid_minimum(const mco::SubproblemSpec& s, int steps)
{
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= steps; ++i)
        for (int k = 0; k <= steps; ++k) {
            std::vector<double> p = {s.lower[0] + (1.0 - s.lower[0]) * i / steps,
                                     s.lower[1] + (1.0 - s.lower[1]) * k / steps};
            if (mco::is_feasible(s, p, 0.0)) best = std::min(best, mco::objective_value(s, p));
        }
    return best;
}

TEST(Convex, MatchesGridScan)
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> cost(0.1, 5.0), budget(5.0, 60.0), lam(0.0, 24.0);
    const int steps = 1500;
    int solved = 0;
    for (int trial = 0; trial < 25; ++trial) {
        auto s = two_bs(cost(rng), cost(rng), budget(rng), lam(rng));
        auto sol = mco::solve(s);
        double grid = grid_minimum(s, steps);
        if (!sol) {
            EXPECT_TRUE(std::isinf(grid)) << "trial " << trial;
            continue;
        }
        ++solved;
        ASSERT_TRUE(mco::is_feasible(s, sol->blocking, 1e-9));
        // The grid point is feasible, so the solver must not be worse; the
        // grid can only be one cell better.
        double lipschitz = std::abs(s.cost[0]) + std::abs(s.cost[1]);
        EXPECT_LE(sol->objective, grid + 1e-6 * lipschitz) << "trial " << trial;
        EXPECT_GE(sol->objective, grid - 2.0 * lipschitz / steps) << "trial " << trial;
        EXPECT_LE(sol->kkt_residual, 1e-6);
    }
    EXPECT_GT(solved, 15);
}

TEST(Convex, InfeasibleBudget)
{
    // P = 1 on both costs 2.5 at the cheapest, so 2 is infeasible.
    auto s = two_bs(1.0, 1.0, 2.0, 10.0);
    EXPECT_FALSE(mco::solve(s).has_value());
    s.budget_rhs = -1.0;
    EXPECT_FALSE(mco::solve(s).has_value());
}

TEST(Convex, NoOffloadingRoomPinsToOne)
{
    auto s = two_bs(3.0, 2.0, 50.0, 0.0);
    auto sol = mco::solve(s);
    ASSERT_TRUE(sol);
    EXPECT_EQ(sol->blocking, (std::vector<double>{1.0, 1.0}));
    EXPECT_DOUBLE_EQ(sol->objective, 6.0);
}

TEST(Convex, BudgetAtExactMinimumPinsToOne)
{
    auto s = two_bs(3.0, 2.0, 0.0, 20.0);
    s.budget_rhs = mco::budget_lhs(s, {1.0, 1.0});
    auto sol = mco::solve(s);
    ASSERT_TRUE(sol);
    EXPECT_EQ(sol->blocking, (std::vector<double>{1.0, 1.0}));
}

TEST(Convex, NegativeCostStaysLocal)
{
    // Offloading costs more than local execution at both stations.
    auto s = two_bs(-1.0, -2.0, 100.0, 24.0);
    auto sol = mco::solve(s);
    ASSERT_TRUE(sol);
    EXPECT_NEAR(sol->blocking[0], 1.0, 1e-6);
    EXPECT_NEAR(sol->blocking[1], 1.0, 1e-6);
}

TEST(Convex, LambdaBindsWithLooseBudget)
{
    // Only the rate cap binds: all offloading goes to the larger saving per
    // task, station 2 (2.0 / 13 > 1.0 / 11).
    auto s = two_bs(1.0, 2.0, 1e6, 10.0);
    auto sol = mco::solve(s);
    ASSERT_TRUE(sol);
    EXPECT_NEAR(mco::lambda_lhs(s, sol->blocking), 10.0, 1e-6);
    EXPECT_NEAR(sol->blocking[0], 1.0, 1e-6);
    EXPECT_NEAR(sol->blocking[1], 1.0 - 10.0 / 13.0, 1e-6);
}

TEST(Convex, LowerBoundActive)
{
    auto s = two_bs(1.0, 2.0, 1e6, 1e6);
    auto sol = mco::solve(s);
    ASSERT_TRUE(sol);
    EXPECT_NEAR(sol->blocking[0], s.lower[0], 1e-7);
    EXPECT_NEAR(sol->blocking[1], s.lower[1], 1e-7);
}

TEST(Convex, FreePricesIgnoreBudget)
{
    auto s = two_bs(1.0, 1.0, 0.0, 1e6);
    s.prices = {0.0, 0.0};
    auto sol = mco::solve(s);
    ASSERT_TRUE(sol);
    EXPECT_NEAR(sol->blocking[0], s.lower[0], 1e-7);
}

TEST(Convex, ThreeStationsRandomFeasibleAndStationary)
{
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 40; ++trial) {
        mco::SubproblemSpec s;
        for (int n = 0; n < 3; ++n) {
            double a = 2.0 + 20.0 * u(rng);
            int k = 5 + static_cast<int>(20 * u(rng));
            s.cost.push_back(0.1 + 10.0 * u(rng));
            s.loads.push_back(a);
            s.prices.push_back(0.5 + u(rng));
            s.arrival_rates.push_back(a);
            s.lower.push_back(mco::erlang_b(k, {a}));
        }
        s.budget_rhs = mco::budget_lhs(s, {1.0, 1.0, 1.0}) + 60.0 * u(rng);
        s.lambda_rhs = 40.0 * u(rng);
        auto sol = mco::solve(s);
        ASSERT_TRUE(sol) << "trial " << trial;
        EXPECT_TRUE(mco::is_feasible(s, sol->blocking, 1e-9));
        // No random feasible point may beat it.
        for (int probe = 0; probe < 2000; ++probe) {
            std::vector<double> p(3);
            for (int n = 0; n < 3; ++n) p[n] = s.lower[n] + (1.0 - s.lower[n]) * u(rng);
            if (mco::is_feasible(s, p, 0.0)) ASSERT_GE(mco::objective_value(s, p), sol->objective - 1e-6);
        }
    }
}

}  // namespace
