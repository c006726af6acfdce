#include <gtest/gtest.h>

#include <random>

#include <mco/planner.hpp>

namespace {

const std::string kDir = MCO_SCENARIO_DIR;

mco::PlannerConfig coarse()
{
    mco::PlannerConfig cfg;
    cfg.y_steps = 20;
    cfg.lambda_steps = 20;
    return cfg;
}

void expect_all_local(const mco::PlanResult& p, double power)
{
    EXPECT_TRUE(p.all_local());
    for (int x : p.allocation.channels) EXPECT_EQ(x, 0);
    EXPECT_EQ(p.allocation.es_fraction, 0.0);
    EXPECT_NEAR(p.predicted_power, power, 1e-9);
}

TEST(Planner, ZeroBudgetIsAllLocal)
{
    auto sc = mco::load_scenario(kDir + "/set1.cfg");
    sc.budget = 0.0;
    expect_all_local(mco::plan(sc, mco::DeadlineMode::soft, coarse()), 29.25);
    expect_all_local(mco::plan(sc, mco::DeadlineMode::hard, coarse()), 29.25);
}

TEST(Planner, TightEpsilonIsAllLocal)
{
    auto sc = mco::load_scenario(kDir + "/set1.cfg");
    sc.classes[0].max_violation = 0.01;
    expect_all_local(mco::plan(sc, mco::DeadlineMode::soft, coarse()), 29.25);
}

TEST(Planner, ExpensiveUploadIsAllLocal)
{
    auto sc = mco::load_scenario(kDir + "/set1.cfg");
    sc.tx_power = 10.0;   // 10 W per upload slot beats 0.75 J of local work
    expect_all_local(mco::plan(sc, mco::DeadlineMode::soft, coarse()), 29.25);
    expect_all_local(mco::plan(sc, mco::DeadlineMode::hard, coarse()), 29.25);
}

TEST(Planner, OffloadingSavesPowerOnSetOne)
{
    auto sc = mco::load_scenario(kDir + "/set1.cfg");
    auto soft = mco::plan(sc, mco::DeadlineMode::soft);
    auto hard = mco::plan(sc, mco::DeadlineMode::hard, coarse());
    EXPECT_LT(soft.predicted_power, 0.5 * 29.25);
    EXPECT_LT(hard.predicted_power, 29.25);
    // Hard deadlines add overlap and overrun energy on top of the soft plan.
    EXPECT_GE(hard.predicted_power, soft.predicted_power);
}

TEST(Planner, ReportedPowerMatchesReevaluation)
{
    for (const char* file : {"/set1.cfg", "/set2.cfg"}) {
        auto sc = mco::load_scenario(kDir + file);
        mco::PlanContext ctx(sc);
        auto soft = mco::plan(sc, mco::DeadlineMode::soft, coarse());
        auto again = mco::evaluate_allocation(sc, ctx, soft.allocation, mco::DeadlineMode::soft);
        EXPECT_NEAR(soft.predicted_power, again.predicted_power, 1e-9 * again.predicted_power);

        // Hard plans are costed at the grid rate, which is never below the
        // achieved rate, so re-evaluation at the achieved rate is no worse.
        auto hard = mco::plan(sc, mco::DeadlineMode::hard, coarse());
        auto hard_again = mco::evaluate_allocation(sc, ctx, hard.allocation, mco::DeadlineMode::hard);
        EXPECT_LE(hard_again.predicted_power, hard.predicted_power + 1e-9);
        EXPECT_LE(hard.lambda_achieved, hard.lambda_target + 1e-9);
    }
}

TEST(Planner, WorkerCountDoesNotChangeResult)
{
    auto sc = mco::load_scenario(kDir + "/set2.cfg");
    auto cfg = coarse();
    auto one = mco::plan(sc, mco::DeadlineMode::hard, cfg);
    cfg.workers = 4;
    auto four = mco::plan(sc, mco::DeadlineMode::hard, cfg);
    EXPECT_EQ(one.allocation, four.allocation);
    EXPECT_EQ(one.predicted_power, four.predicted_power);
}

TEST(Planner, FuzzedPlansAreSound)
{
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 12; ++trial) {
        auto sc = mco::load_scenario(kDir + (trial % 2 ? "/set2.cfg" : "/set1.cfg"));
        sc.budget = 150.0 * u(rng);
        for (auto& bs : sc.base_stations) bs.arrival_rate *= 0.5 + u(rng);
        auto mode = trial % 3 == 0 ? mco::DeadlineMode::hard : mco::DeadlineMode::soft;
        auto p = mco::plan(sc, mode, coarse());
        SCOPED_TRACE("trial " + std::to_string(trial));
        EXPECT_NO_THROW(mco::validate(p.allocation, sc));
        EXPECT_LE(p.cost, sc.budget + 1e-9);
        EXPECT_LE(p.predicted_power, mco::total_arrival_rate(sc) * sc.local_power * mco::mean_local_slots(sc) + 1e-9);
        if (p.all_local()) continue;
        mco::PlanContext ctx(sc);
        auto svc = mco::es_service_model(sc, p.allocation.es_fraction);
        EXPECT_LT(p.lambda_achieved, svc.rate());
        if (mode == mco::DeadlineMode::soft) {
            EXPECT_LE(p.lambda_achieved, p.lambda_target + 1e-9);
            EXPECT_TRUE(mco::detail::deadlines_met(sc, ctx.uploads, svc, p.lambda_achieved,
                                                   mco::InversionTier::standard));
        }
    }
}

TEST(Planner, RoundingRespectsBudget)
{
    auto sc = mco::load_scenario(kDir + "/set1.cfg");
    mco::PlanContext ctx(sc);
    sc.budget = 30.0;
    auto a = mco::round_allocation(sc, ctx, {0.01, 0.01, 0.01}, 0.5);
    ASSERT_TRUE(a);
    EXPECT_LE(mco::allocation_cost(sc, *a), 30.0);
    EXPECT_FALSE(mco::round_allocation(sc, ctx, {0.5, 0.5, 0.5}, 1.5).has_value());
}

TEST(Planner, RoundingSnapsTargetsJustAboveTableEntries)
{
    auto sc = mco::load_scenario(kDir + "/set1.cfg");
    mco::PlanContext ctx(sc);
    // A barrier solution sits a hair above an active lower bound E(K, a).
    std::vector<double> near_floor;
    for (double p : ctx.min_blocking) near_floor.push_back(p * (1.0 + 1e-9));
    auto a = mco::round_allocation(sc, ctx, near_floor, 1.0);
    ASSERT_TRUE(a);
    for (std::size_t n = 0; n < sc.num_bs(); ++n) EXPECT_EQ(a->channels[n], sc.base_stations[n].max_channels);

    // A rate cap below the snapped plan's offloaded rate forces strict rounding.
    double snapped_rate = mco::offloaded_rate(sc, mco::blocking_of(sc, ctx, *a));
    auto strict = mco::round_allocation(sc, ctx, near_floor, 1.0, snapped_rate * (1.0 - 1e-12));
    ASSERT_TRUE(strict);
    for (std::size_t n = 0; n < sc.num_bs(); ++n) EXPECT_EQ(strict->channels[n], sc.base_stations[n].max_channels - 1);
    EXPECT_LE(mco::offloaded_rate(sc, mco::blocking_of(sc, ctx, *strict)), snapped_rate);
}

TEST(Planner, RejectsBadGrid)
{
    auto sc = mco::load_scenario(kDir + "/set1.cfg");
    mco::PlannerConfig cfg;
    cfg.y_steps = 0;
    EXPECT_THROW(mco::plan(sc, mco::DeadlineMode::soft, cfg), mco::ValidationError);
    auto hard = mco::load_scenario(kDir + "/set1.cfg");
    hard.classes[0].cycles = 5e6;
    hard.classes[0].local_slots = 5;
    EXPECT_THROW(mco::plan(hard, mco::DeadlineMode::hard), mco::ValidationError);
}

}  // namespace
