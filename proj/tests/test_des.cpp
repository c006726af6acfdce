#include <gtest/gtest.h>

#include <sstream>

#include <mco/des.hpp>
#include <mco/stats.hpp>

namespace {

const std::string kDir = MCO_SCENARIO_DIR;

mco::DesConfig small(std::size_t tasks = 50000, std::uint64_t seed = 3)
{
    mco::DesConfig cfg;
    cfg.n_tasks = tasks;
    cfg.seed = seed;
    return cfg;
}

// One BS with K channels, one class, one channel model.
mco::Scenario single_bs(int k)
{
    auto sc = mco::load_scenario(kDir + "/set1.cfg");
    sc.base_stations.resize(1);
    sc.base_stations[0].max_channels = k;
    sc.base_stations[0].arrival_rate = 5.0;
    sc.budget = 30.0;
    return sc;
}

TEST(Des, SameSeedSameRun)
{
    auto sc = mco::load_scenario(kDir + "/set1.cfg");
    mco::Allocation a{{10, 10, 6}, 0.5};
    auto s1 = mco::simulate(sc, a, mco::DeadlineMode::soft, small());
    auto s2 = mco::simulate(sc, a, mco::DeadlineMode::soft, small());
    EXPECT_EQ(s1.energy_total, s2.energy_total);
    EXPECT_EQ(s1.blocked, s2.blocked);
    EXPECT_EQ(s1.wait_samples, s2.wait_samples);
    auto s3 = mco::simulate(sc, a, mco::DeadlineMode::soft, small(50000, 4));
    EXPECT_NE(s1.energy_total, s3.energy_total);
}

TEST(Des, AllLocalPower)
{
    auto sc = mco::load_scenario(kDir + "/set1.cfg");
    auto st = mco::simulate(sc, {{0, 0, 0}, 0.0}, mco::DeadlineMode::soft, small());
    EXPECT_EQ(st.offloaded, 0u);
    for (std::size_t n = 0; n < 3; ++n) EXPECT_EQ(st.blocking(n), 1.0);
    // Each task costs exactly 0.75 J, so the estimate is exact.
    EXPECT_NEAR(st.mean_power(), 29.25, 0.01 * 29.25);
    EXPECT_NEAR(st.mean_power(), 29.25, 1e-9);
    EXPECT_EQ(st.local_late, 0u);
}

TEST(Des, BlockingMatchesErlangB)
{
    auto sc = mco::load_scenario(kDir + "/set2.cfg");
    mco::Allocation a{{6, 9, 3}, 0.8};
    auto st = mco::simulate(sc, a, mco::DeadlineMode::soft, small(300000));
    auto prof = mco::upload_profiles(sc);
    for (std::size_t n = 0; n < sc.num_bs(); ++n) {
        auto load = mco::offered_load(sc.base_stations[n].arrival_rate, prof[n].mean, sc.slot);
        double e = mco::erlang_b(a.channels[n], load);
        double sigma = mco::binomial_sigma(e, static_cast<double>(st.arrivals[n]));
        EXPECT_NEAR(st.blocking(n), e, 3 * sigma) << "bs " << n;
    }
}

TEST(Des, HardModeNeverViolates)
{
    for (const char* file : {"/set1.cfg", "/set2.cfg"}) {
        auto sc = mco::load_scenario(kDir + file);
        // A slow ES makes overruns frequent.
        mco::Allocation a{{15, 15, 0}, 0.1};
        if (sc.num_classes() > 1) a.es_fraction = 0.3;
        auto st = mco::simulate(sc, a, mco::DeadlineMode::hard, small(30000));
        EXPECT_EQ(st.violations, 0u);
        EXPECT_GT(st.offloaded, 0u);
        std::size_t beyond_tasks = 0;
        for (const auto& e : st.energy) beyond_tasks += e.beyond > 0.0;
        EXPECT_GT(beyond_tasks, 0u) << file;
    }
}

TEST(Des, EnergyConservation)
{
    auto sc = mco::load_scenario(kDir + "/set2.cfg");
    auto st = mco::simulate(sc, {{8, 8, 2}, 0.6}, mco::DeadlineMode::hard, small());
    double sum = 0.0;
    for (const auto& e : st.energy) sum += e.total();
    EXPECT_NEAR(sum, st.energy_total, 1e-9 * st.energy_total);
    EXPECT_EQ(st.offloaded + st.local_tasks, st.tasks());
    std::size_t path_total = 0;
    for (const auto& per_bs : st.paths)
        for (const auto& per_cls : per_bs)
            for (const auto& pc : per_cls) path_total += pc.offloaded;
    EXPECT_EQ(path_total, st.offloaded);
}

TEST(Des, StandaloneQueueMatchesMd1)
{
    const double lambda = 20.0, mu = 25.0;
    auto waits = mco::simulate_queue_waits(
        lambda, [&](std::mt19937_64&) { return 1.0 / mu; }, 300000, 9);
    double ks = mco::ks_statistic(
        waits, [&](double t) { return mco::md1_wait_cdf(lambda, mu, t); },
        [&](double t) { return t <= 0.0 ? 0.0 : mco::md1_wait_cdf(lambda, mu, t); });
    EXPECT_LT(ks, 0.01);
}

TEST(Des, ReplicationsPoolInSeedOrder)
{
    auto sc = mco::load_scenario(kDir + "/set1.cfg");
    mco::Allocation a{{5, 5, 5}, 0.4};
    auto pooled = mco::simulate_replications(sc, a, mco::DeadlineMode::soft, small(20000, 10), 3, 2);
    auto manual = mco::simulate(sc, a, mco::DeadlineMode::soft, small(20000, 10));
    manual.merge(mco::simulate(sc, a, mco::DeadlineMode::soft, small(20000, 11)));
    manual.merge(mco::simulate(sc, a, mco::DeadlineMode::soft, small(20000, 12)));
    EXPECT_EQ(pooled.energy_total, manual.energy_total);
    EXPECT_EQ(pooled.wait_samples, manual.wait_samples);
}

TEST(Des, TraceHasOneRowPerMeasuredTask)
{
    auto sc = mco::load_scenario(kDir + "/set1.cfg");
    std::ostringstream out;
    auto cfg = small(2000);
    cfg.trace = &out;
    auto st = mco::simulate(sc, {{3, 3, 3}, 0.5}, mco::DeadlineMode::soft, cfg);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "arrival_s,bs,class,path,upload_slots,wait_s,sojourn_s,energy_J");
    std::size_t rows = 0, offload = 0;
    while (std::getline(in, line)) {
        ++rows;
        if (line.find(",offload,") != std::string::npos) ++offload;
    }
    EXPECT_EQ(rows, st.tasks());
    EXPECT_EQ(offload, st.offloaded);
}

TEST(Des, UnstableAllocationHitsQueueCap)
{
    auto sc = mco::load_scenario(kDir + "/set1.cfg");
    auto cfg = small(100000);
    cfg.queue_cap = 1000;
    // y = 0.01 serves 0.25 tasks/s against ~35 tasks/s offered.
    EXPECT_THROW(mco::simulate(sc, {{15, 15, 20}, 0.01}, mco::DeadlineMode::soft, cfg), mco::NumericError);
}

TEST(Des, RejectsChannelsWithoutServer)
{
    auto sc = mco::load_scenario(kDir + "/set1.cfg");
    EXPECT_THROW(mco::simulate(sc, {{1, 0, 0}, 0.0}, mco::DeadlineMode::soft, small(100)), mco::ValidationError);
}

TEST(Opt, NoChannelsMeansAllLocal)
{
    auto sc = single_bs(0);
    mco::OptConfig cfg;
    cfg.des = small(5000);
    auto r = mco::opt_exhaustive(sc, mco::DeadlineMode::soft, cfg);
    EXPECT_EQ(r.combinations, 1u);
    EXPECT_EQ(r.feasible, 1u);
    EXPECT_EQ(r.plan.allocation.channels, std::vector<int>{0});
    EXPECT_NEAR(r.plan.predicted_power, 5.0 * 0.75, 1e-9);
}

TEST(Opt, MatchesManualEnumeration)
{
    for (auto mode : {mco::DeadlineMode::soft, mco::DeadlineMode::hard}) {
        auto sc = single_bs(2);
        mco::OptConfig cfg;
        cfg.des = small(20000);
        auto r = mco::opt_exhaustive(sc, mode, cfg);
        EXPECT_EQ(r.combinations, 3u);

        double best = 1e300;
        std::vector<int> best_x;
        for (int x = 0; x <= 2; ++x) {
            double y = x == 0 ? 0.0 : std::min(1.0, (sc.budget - x) / (sc.es_price * sc.es_speed));
            auto st = mco::simulate(sc, {{x}, y}, mode, cfg.des);
            bool ok = true;
            if (mode == mco::DeadlineMode::soft)
                for (const auto& pc : st.paths[0][0])
                    if (pc.offloaded && double(pc.violations) / double(pc.offloaded) > 0.03) ok = false;
            if (ok && st.mean_power() < best) {
                best = st.mean_power();
                best_x = {x};
            }
        }
        EXPECT_EQ(r.plan.allocation.channels, best_x);
        EXPECT_NEAR(r.plan.predicted_power, best, 1e-9 * best);
        EXPECT_LE(r.plan.cost, sc.budget);
    }
}

TEST(Opt, ResidualFractionStaysInBudget)
{
    auto sc = mco::load_scenario(kDir + "/set1.cfg");
    for (double b : {10.1, 33.3, 55.55, 200.0}) {
        sc.budget = b;
        std::vector<int> x{3, 3, 3};
        double y = mco::residual_es_fraction(sc, x);
        EXPECT_LE(mco::allocation_cost(sc, {x, y}), b);
        EXPECT_LE(y, 1.0);
        if (b < 31.0) EXPECT_NEAR(y, (b - 9.0) / 22.5, 1e-12);
    }
}

TEST(Opt, RefusesOversizedInstances)
{
    auto sc = mco::load_scenario(kDir + "/set1.cfg");
    mco::OptConfig cfg;
    cfg.max_combinations = 1000;
    EXPECT_THROW(mco::opt_exhaustive(sc, mco::DeadlineMode::soft, cfg), mco::ValidationError);
}

}  // namespace
