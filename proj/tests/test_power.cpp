#include <gtest/gtest.h>

#include <mco/es_delay.hpp>
#include <mco/markov_channel.hpp>
#include <mco/power.hpp>

namespace {

const std::string kDir = MCO_SCENARIO_DIR;

// Expected local energy per offloaded task by walking every (upload l,
// sojourn b) pair: completion in slot l + b. Before the latest local start
// nothing is spent; up to the deadline the device runs locally in parallel;
// later the whole local run is wasted. Truncated tails count as late.
double brute_force_energy(const mco::TaskClass& cls, const mco::Pmf& up, const mco::Pmf& soj, const mco::Scenario& sc)
{
    const long start = mco::latest_local_start(cls);
    const long deadline = cls.deadline_slots;
    const double full = sc.local_power * cls.local_slots * sc.slot;
    double acc = up.tail_mass * full;
    for (long l = 0; l < static_cast<long>(up.size()); ++l) {
        double pl = up.probs[l];
        acc += pl * soj.tail_mass * full;
        for (long b = 0; b < static_cast<long>(soj.size()); ++b) {
            double p = pl * soj.probs[b];
            long done = l + b;
            if (done < start) continue;
            if (done <= deadline)
                acc += p * sc.local_power * (done - start + 1) * sc.slot;
            else
                acc += p * full;
        }
    }
    return acc;
}

TEST(Power, AllLocalSetOne)
{
    auto sc = mco::load_scenario(kDir + "/set1.cfg");
    double total = 0.0;
    for (const auto& bs : sc.base_stations) total += mco::local_power(1.0, bs, sc);
    EXPECT_NEAR(total, 39 * 0.25 * 3, 1e-12);
}

TEST(Power, AffineInBlocking)
{
    auto sc = mco::load_scenario(kDir + "/set2.cfg");
    const auto& bs = sc.base_stations[0];
    double l0 = mco::local_power(0.0, bs, sc), l1 = mco::local_power(1.0, bs, sc);
    EXPECT_EQ(l0, 0.0);
    EXPECT_NEAR(mco::local_power(0.3, bs, sc), 0.3 * l1, 1e-12);
    double mean_slots = mco::mean_local_slots(sc);
    EXPECT_NEAR(l1, bs.arrival_rate * sc.local_power * mean_slots * sc.slot, 1e-12);
    EXPECT_NEAR(mco::upload_power(0.25, bs, sc, 1.5), 0.75 * bs.arrival_rate * sc.tx_power * 1.5 * sc.slot, 1e-15);
}

TEST(Power, HardModeEnergiesMatchEnumeration)
{
    for (const char* file : {"/set1.cfg", "/set2.cfg"}) {
        auto sc = mco::load_scenario(kDir + file);
        auto prof = mco::upload_profiles(sc);
        for (double y : {0.2, 0.5, 1.0}) {
            auto svc = mco::es_service_model(sc, y);
            for (double rho : {0.3, 0.9}) {
                mco::DelayModel delays(rho * svc.rate(), svc);
                for (std::size_t j = 0; j < sc.num_classes(); ++j) {
                    auto soj = mco::discretize_sojourn(delays, j, sc.slot);
                    for (std::size_t n = 0; n < sc.num_bs(); ++n)
                        for (const auto& up : prof[n].pmfs[j]) {
                            double e = mco::overlap_energy(sc.classes[j], up, soj, sc, y) +
                                       mco::beyond_energy(sc.classes[j], up, soj, sc);
                            EXPECT_NEAR(e, brute_force_energy(sc.classes[j], up, soj, sc), 1e-12)
                                << file << " y=" << y << " rho=" << rho;
                        }
                }
            }
        }
    }
}

TEST(Power, HandWorkedOverlapCase)
{
    auto sc = mco::load_scenario(kDir + "/set1.cfg");
    const auto& cls = sc.classes[0];   // t^L = 2, deadline 4, 3 local slots
    mco::Pmf up{{0.0, 0.5, 0.5}, 0.0};
    mco::Pmf soj{{0.0, 0.6, 0.2, 0.2}, 0.0};
    // done: 2 (0.30), 3 (0.40), 4 (0.20), 5 (0.10)
    double overlap = 0.25 * (0.30 * 1 + 0.40 * 2 + 0.20 * 3);
    double beyond = 0.10 * 0.25 * 3;
    EXPECT_NEAR(mco::overlap_energy(cls, up, soj, sc, 1.0), overlap, 1e-15);
    EXPECT_NEAR(mco::beyond_energy(cls, up, soj, sc), beyond, 1e-15);
    EXPECT_NEAR(mco::overrun_probability(cls, up, soj), 0.10, 1e-15);
}

TEST(Power, TailsCountAsLate)
{
    auto sc = mco::load_scenario(kDir + "/set1.cfg");
    const auto& cls = sc.classes[0];
    mco::Pmf up{{0.0, 0.9}, 0.1};
    mco::Pmf soj{{0.0, 0.95}, 0.05};
    EXPECT_NEAR(mco::overrun_probability(cls, up, soj), 0.1 + 0.9 * 0.05, 1e-15);
}

TEST(Power, NoLocalFallbackRejected)
{
    auto sc = mco::load_scenario(kDir + "/set1.cfg");
    auto cls = sc.classes[0];
    cls.local_slots = 5;
    mco::Pmf p{{0.0, 1.0}, 0.0};
    EXPECT_THROW(mco::overlap_energy(cls, p, p, sc, 1.0), mco::ValidationError);
}

}  // namespace
