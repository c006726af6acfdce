#pragma once

// Grid decomposition of the allocation problem. The ES fraction y (and, for
// hard deadlines, the aggregate ES rate) is fixed on a grid; each grid point
// becomes a convex program in the blocking probabilities, whose solution is
// rounded to integer channel counts. The cheapest rounded plan wins; the
// all-local plan (x = 0, y = 0) is always a candidate.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <future>
#include <limits>
#include <optional>
#include <thread>
#include <vector>

#include "convex.hpp"
#include "erlang.hpp"
#include "es_delay.hpp"
#include "markov_channel.hpp"
#include "power.hpp"
#include "scenario.hpp"

namespace mco {

struct PlannerConfig {
    int y_steps = 100;        // Y
    int lambda_steps = 100;   // Lambda (hard mode)
    LambdaSearchOptions lambda_search;
    ConvexOptions convex;
    InversionTier tier = InversionTier::standard;
    unsigned workers = 1;
};

struct PlanResult {
    Allocation allocation;
    DeadlineMode mode = DeadlineMode::soft;
    double predicted_power = 0.0;
    PowerBreakdown breakdown;
    std::vector<double> blocking;
    double lambda_target = 0.0;     // lambda* (soft) or the grid value lambda^(i) (hard)
    double lambda_achieved = 0.0;   // sum_n (1 - P_B,n) lambda_n at the rounded plan
    double cost = 0.0;
    std::size_t subproblems_solved = 0;

    bool all_local() const
    {
        return std::all_of(allocation.channels.begin(), allocation.channels.end(), [](int x) { return x == 0; });
    }
};

/// Quantities shared by every grid point.
struct PlanContext {
    std::vector<BsUploadProfile> uploads;
    std::vector<OfferedLoad> loads;
    std::vector<double> min_blocking;

    explicit PlanContext(const Scenario& sc) : uploads(upload_profiles(sc))
    {
        for (std::size_t n = 0; n < sc.num_bs(); ++n) {
            const auto& bs = sc.base_stations[n];
            loads.push_back(offered_load(bs.arrival_rate, uploads[n].mean, sc.slot));
            min_blocking.push_back(mco::min_blocking(bs.max_channels, loads[n]));
        }
    }
};

inline std::vector<double> blocking_of(const Scenario& sc, const PlanContext& ctx, const Allocation& a)
{
    std::vector<double> p;
    for (std::size_t n = 0; n < sc.num_bs(); ++n) p.push_back(erlang_b(a.channels[n], ctx.loads[n]));
    return p;
}

inline double offloaded_rate(const Scenario& sc, const std::vector<double>& blocking)
{
    double acc = 0.0;
    for (std::size_t n = 0; n < sc.num_bs(); ++n) acc += (1.0 - blocking[n]) * sc.base_stations[n].arrival_rate;
    return acc;
}

/// Discretized ES sojourn PMFs per class, computed only as far as the
/// deadline; everything later is kept as tail mass.
inline std::vector<Pmf> sojourn_pmfs(const Scenario& sc, const DelayModel& delays)
{
    std::vector<Pmf> out;
    for (std::size_t j = 0; j < sc.num_classes(); ++j)
        out.push_back(discretize_sojourn(delays, j, sc.slot, kTailThreshold, sc.classes[j].deadline_slots));
    return out;
}

inline PowerBreakdown breakdown_for(const Scenario& sc, const std::vector<double>& blocking,
                                    const std::vector<OffloadEnergy>& energy)
{
    PowerBreakdown b;
    for (std::size_t n = 0; n < sc.num_bs(); ++n)
        b.per_bs.push_back(bs_power(blocking[n], sc.base_stations[n], sc, energy[n]));
    return b;
}

/// Analytic power of a given allocation. Hard mode evaluates the ES at the
/// allocation's own offloaded rate.
inline PlanResult evaluate_allocation(const Scenario& sc, const PlanContext& ctx, const Allocation& a,
                                      DeadlineMode mode, InversionTier tier = InversionTier::standard)
{
    PlanResult r;
    r.allocation = a;
    r.mode = mode;
    r.blocking = blocking_of(sc, ctx, a);
    r.lambda_achieved = offloaded_rate(sc, r.blocking);
    r.lambda_target = r.lambda_achieved;
    r.cost = allocation_cost(sc, a);

    std::vector<OffloadEnergy> energy;
    bool offloads = r.lambda_achieved > 0.0;
    if (offloads && !(a.es_fraction > 0.0)) throw ValidationError("allocation offloads tasks but leases no ES capacity");
    std::vector<Pmf> sojourn;
    if (mode == DeadlineMode::hard && offloads) {
        DelayModel delays(r.lambda_achieved, es_service_model(sc, a.es_fraction), tier);
        sojourn = sojourn_pmfs(sc, delays);
    }
    for (std::size_t n = 0; n < sc.num_bs(); ++n)
        energy.push_back(offload_energy(sc.base_stations[n], ctx.uploads[n], sc,
                                        (mode == DeadlineMode::hard && offloads) ? &sojourn : nullptr, a.es_fraction));
    r.breakdown = breakdown_for(sc, r.blocking, energy);
    r.predicted_power = r.breakdown.total();
    return r;
}

inline PlanResult all_local_plan(const Scenario& sc, const PlanContext& ctx, DeadlineMode mode)
{
    Allocation a{std::vector<int>(sc.num_bs(), 0), 0.0};
    return evaluate_allocation(sc, ctx, a, mode);
}

// Interior-point solutions approach an active bound from inside, so a target
// this close (relative) to a table entry is rounded onto that entry.
inline constexpr double kRoundingSnap = 1e-6;

/// Largest integer channel counts whose blocking stays >= the fractional
/// solution, then the true budget: drop channels at the priciest BS until
/// sum alpha x + beta f^C y <= B^max. Targets within kRoundingSnap of a table
/// entry round onto it when the offloaded rate stays within lambda_cap;
/// otherwise rounding is strict. Returns nullopt if even x = 0 overruns.
inline std::optional<Allocation> round_allocation(const Scenario& sc, const PlanContext& ctx,
                                                  const std::vector<double>& blocking, double es_fraction,
                                                  double lambda_cap = std::numeric_limits<double>::infinity())
{
    Allocation a;
    a.es_fraction = es_fraction;
    std::vector<int> strict;
    for (std::size_t n = 0; n < sc.num_bs(); ++n) {
        int k = sc.base_stations[n].max_channels;
        strict.push_back(invert_to_channels(blocking[n], ctx.loads[n], k));
        a.channels.push_back(invert_to_channels(blocking[n] * (1.0 - kRoundingSnap), ctx.loads[n], k));
    }
    if (a.channels != strict && offloaded_rate(sc, blocking_of(sc, ctx, a)) > lambda_cap) a.channels = strict;
    while (allocation_cost(sc, a) > sc.budget) {
        std::optional<std::size_t> pick;
        for (std::size_t n = 0; n < sc.num_bs(); ++n) {
            if (a.channels[n] == 0) continue;
            if (!pick || sc.base_stations[n].channel_price > sc.base_stations[*pick].channel_price) pick = n;
        }
        if (!pick) return std::nullopt;
        --a.channels[*pick];
    }
    return a;
}

namespace detail {

struct Candidate {
    PlanResult plan;
    bool valid = false;
};

// Runs fn(i) for i in [0, count) on up to `workers` threads; results keep index order.
template <class Fn>
std::vector<Candidate> map_grid(std::size_t count, unsigned workers, Fn fn)
{
    std::vector<Candidate> out(count);
    if (workers <= 1 || count < 2) {
        for (std::size_t i = 0; i < count; ++i) out[i] = fn(i);
        return out;
    }
    std::vector<std::future<void>> jobs;
    for (unsigned w = 0; w < workers; ++w) {
        jobs.push_back(std::async(std::launch::async, [&, w] {
            for (std::size_t i = w; i < count; i += workers) out[i] = fn(i);
        }));
    }
    for (auto& j : jobs) j.get();
    return out;
}

// Minimum power; earlier grid points win ties.
inline PlanResult pick_best(PlanResult best, const std::vector<Candidate>& cands)
{
    for (const auto& c : cands) {
        if (!c.valid) continue;
        if (c.plan.predicted_power < best.predicted_power - 1e-12 * std::max(1.0, best.predicted_power)) best = c.plan;
    }
    return best;
}

inline SubproblemSpec base_spec(const Scenario& sc, const PlanContext& ctx, double es_fraction, double lambda_rhs)
{
    SubproblemSpec s;
    s.budget_rhs = sc.budget - sc.es_price * sc.es_speed * es_fraction;
    s.lambda_rhs = lambda_rhs;
    for (std::size_t n = 0; n < sc.num_bs(); ++n) {
        const auto& bs = sc.base_stations[n];
        s.loads.push_back(ctx.loads[n].erlangs);
        s.prices.push_back(bs.channel_price);
        s.arrival_rates.push_back(bs.arrival_rate);
        s.lower.push_back(ctx.min_blocking[n]);
    }
    return s;
}

// Linear objective: P lambda p^L Lbar + (1 - P) lambda e_n.
inline void set_objective(SubproblemSpec& s, const Scenario& sc, const std::vector<OffloadEnergy>& energy)
{
    double local = sc.local_power * mean_local_slots(sc) * sc.slot;
    s.cost.clear();
    s.constant = 0.0;
    for (std::size_t n = 0; n < sc.num_bs(); ++n) {
        double lam = sc.base_stations[n].arrival_rate;
        s.cost.push_back(lam * (local - energy[n].total()));
        s.constant += lam * energy[n].total();
    }
}

inline double grid_fraction(int a, int steps) { return static_cast<double>(a) / static_cast<double>(steps); }

}  // namespace detail

/// Soft deadlines: for each y = a / Y find lambda*, solve the convex
/// surrogate, round, re-check the budget, keep the cheapest.
inline PlanResult gcasd(const Scenario& sc, const PlannerConfig& cfg = {})
{
    validate_for_mode(sc, DeadlineMode::soft);
    if (cfg.y_steps < 1) throw ValidationError("planner: Y must be >= 1");
    PlanContext ctx(sc);
    PlanResult best = all_local_plan(sc, ctx, DeadlineMode::soft);

    std::vector<OffloadEnergy> energy;
    for (std::size_t n = 0; n < sc.num_bs(); ++n)
        energy.push_back(offload_energy(sc.base_stations[n], ctx.uploads[n], sc, nullptr, 0.0));

    auto eval = [&](std::size_t idx) {
        detail::Candidate c;
        double y = detail::grid_fraction(static_cast<int>(idx) + 1, cfg.y_steps);
        double lambda_star = feasible_lambda_star(sc, y, ctx.uploads, cfg.lambda_search, cfg.tier);
        if (lambda_star <= 0.0) return c;
        SubproblemSpec spec = detail::base_spec(sc, ctx, y, lambda_star);
        detail::set_objective(spec, sc, energy);
        auto sol = solve(spec, cfg.convex);
        if (!sol) return c;
        auto alloc = round_allocation(sc, ctx, sol->blocking, y, lambda_star);
        if (!alloc) return c;
        PlanResult r;
        r.allocation = *alloc;
        r.mode = DeadlineMode::soft;
        r.blocking = blocking_of(sc, ctx, *alloc);
        r.lambda_target = lambda_star;
        r.lambda_achieved = offloaded_rate(sc, r.blocking);
        r.cost = allocation_cost(sc, *alloc);
        r.breakdown = breakdown_for(sc, r.blocking, energy);
        r.predicted_power = r.breakdown.total();
        c.plan = std::move(r);
        c.valid = true;
        return c;
    };
    auto cands = detail::map_grid(static_cast<std::size_t>(cfg.y_steps), cfg.workers, eval);
    best = detail::pick_best(std::move(best), cands);
    best.subproblems_solved = cands.size();
    if (best.all_local()) best.allocation.es_fraction = 0.0;
    return best;
}

/// Hard deadlines with concurrent local execution: grid over y and over the
/// aggregate ES rate lambda^(i) = i mu^C / Lambda, with sojourn PMFs built at
/// lambda^(i).
inline PlanResult gcahd(const Scenario& sc, const PlannerConfig& cfg = {})
{
    validate_for_mode(sc, DeadlineMode::hard);
    if (cfg.y_steps < 1 || cfg.lambda_steps < 1) throw ValidationError("planner: Y and Lambda must be >= 1");
    PlanContext ctx(sc);
    PlanResult best = all_local_plan(sc, ctx, DeadlineMode::hard);

    // lambda^(0) = 0 forces every P_B to 1 (the all-local plan) and
    // lambda^(Lambda) = mu^C is an unstable queue, so only interior points run.
    const int inner = cfg.lambda_steps - 1;
    const std::size_t count = static_cast<std::size_t>(cfg.y_steps) * static_cast<std::size_t>(std::max(inner, 0));

    auto eval = [&](std::size_t idx) {
        detail::Candidate c;
        int a = static_cast<int>(idx / static_cast<std::size_t>(inner)) + 1;
        int i = static_cast<int>(idx % static_cast<std::size_t>(inner)) + 1;
        double y = detail::grid_fraction(a, cfg.y_steps);
        if (sc.budget - sc.es_price * sc.es_speed * y < 0.0) return c;
        EsServiceModel service = es_service_model(sc, y);
        double lambda = detail::grid_fraction(i, cfg.lambda_steps) * service.rate();
        DelayModel delays(lambda, service, cfg.tier);
        auto sojourn = sojourn_pmfs(sc, delays);
        std::vector<OffloadEnergy> energy;
        for (std::size_t n = 0; n < sc.num_bs(); ++n)
            energy.push_back(offload_energy(sc.base_stations[n], ctx.uploads[n], sc, &sojourn, y));

        SubproblemSpec spec = detail::base_spec(sc, ctx, y, lambda);
        detail::set_objective(spec, sc, energy);
        auto sol = solve(spec, cfg.convex);
        if (!sol) return c;
        auto alloc = round_allocation(sc, ctx, sol->blocking, y, lambda);
        if (!alloc) return c;
        PlanResult r;
        r.allocation = *alloc;
        r.mode = DeadlineMode::hard;
        r.blocking = blocking_of(sc, ctx, *alloc);
        r.lambda_target = lambda;
        r.lambda_achieved = offloaded_rate(sc, r.blocking);
        r.cost = allocation_cost(sc, *alloc);
        r.breakdown = breakdown_for(sc, r.blocking, energy);
        r.predicted_power = r.breakdown.total();
        c.plan = std::move(r);
        c.valid = true;
        return c;
    };
    auto cands = detail::map_grid(count, cfg.workers, eval);
    best = detail::pick_best(std::move(best), cands);
    best.subproblems_solved = cands.size();
    if (best.all_local()) best.allocation.es_fraction = 0.0;
    return best;
}

inline PlanResult plan(const Scenario& sc, DeadlineMode mode, const PlannerConfig& cfg = {})
{
    return mode == DeadlineMode::soft ? gcasd(sc, cfg) : gcahd(sc, cfg);
}

}  // namespace mco
