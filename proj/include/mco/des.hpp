#pragma once

// Discrete-event simulation of the whole system: Poisson arrivals per base
// station, admission by channel availability (blocked tasks run locally),
// slot-by-slot Gilbert-Elliot uploads, one FIFO edge server, and concurrent
// local execution in hard mode. Each task's slot clock starts at its arrival.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <future>
#include <limits>
#include <ostream>
#include <queue>
#include <random>
#include <string>
#include <vector>

#include "erlang.hpp"
#include "es_delay.hpp"
#include "markov_channel.hpp"
#include "planner.hpp"
#include "power.hpp"
#include "scenario.hpp"

namespace mco {

inline constexpr std::size_t kEsQueueCap = 1000000;

// --- random streams ----------------------------------------------------------

enum class Stream : std::uint32_t { arrivals = 1, task_class = 2, channel_model = 3, channel_walk = 4, es_queue = 5 };

/// mt19937_64 seeded from (seed, base station, purpose), so each stream is
/// independent of how often the others are drawn.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::size_t bs, Stream purpose)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(bs), static_cast<std::uint32_t>(purpose)};
    return std::mt19937_64(seq);
}

/// Uniform on [0, 1) with 53 random bits.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double exponential(std::mt19937_64& rng, double rate) { return -std::log1p(-uniform01(rng)) / rate; }

template <class Weights>
std::size_t pick_index(std::mt19937_64& rng, const Weights& weights)
{
    double u = uniform01(rng);
    double acc = 0.0;
    std::size_t last = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] <= 0.0) continue;
        acc += weights[i];
        last = i;
        if (u < acc) return i;
    }
    return last;
}

/// Slots needed to upload `bits`, walking the channel from a stationary start.
/// Uses the same bit arithmetic as upload_pmf_general.
inline long sample_upload_slots(const GilbertElliotModel& m, double bits, std::mt19937_64& rng)
{
    if (bits <= m.b_bad || bits <= 0.0) return 1;
    bool good = uniform01(rng) < stationary(m).good;
    long g = 0;
    for (long l = 1; l <= kMaxUploadSlots; ++l) {
        if (good) ++g;
        double sent = static_cast<double>(g) * m.b_good + static_cast<double>(l - g) * m.b_bad;
        if (sent >= bits) return l;
        good = good ? uniform01(rng) < m.p_gg : uniform01(rng) >= m.p_bb;
    }
    throw NumericError("sample_upload_slots: upload longer than " + std::to_string(kMaxUploadSlots) + " slots");
}

// --- full-system simulation ----------------------------------------------------

struct DesConfig {
    std::uint64_t seed = 1;
    std::size_t n_tasks = 100000;
    double warmup_fraction = 0.1;
    std::size_t queue_cap = kEsQueueCap;
    bool keep_samples = true;
    std::ostream* trace = nullptr;   // per-task CSV rows when set
};

/// Counters for one (BS, class, channel model) path.
struct PathCounts {
    std::size_t offloaded = 0;
    std::size_t violations = 0;
};

struct DesStats {
    std::uint64_t seed = 0;
    DeadlineMode mode = DeadlineMode::soft;
    std::vector<double> arrival_rates;
    std::vector<std::size_t> arrivals;      // measured tasks per BS
    std::vector<std::size_t> blocked;       // per BS
    std::vector<PowerComponents> energy;    // J summed per BS over measured tasks
    double energy_total = 0.0;              // J, accumulated task by task
    std::size_t offloaded = 0;
    std::size_t violations = 0;             // offloaded tasks that missed d_j
    std::size_t local_tasks = 0;
    std::size_t local_late = 0;             // blocked tasks whose local run exceeds d_j
    std::vector<std::vector<std::vector<PathCounts>>> paths;   // [n][j][k]
    std::vector<double> wait_samples;       // ES waiting time, s
    std::vector<std::vector<double>> sojourn_samples;   // per class, wait + service, s
    std::vector<double> total_delay_samples;            // upload + ES sojourn, s

    std::size_t tasks() const
    {
        std::size_t acc = 0;
        for (auto a : arrivals) acc += a;
        return acc;
    }

    double blocking(std::size_t n) const
    {
        return arrivals[n] ? static_cast<double>(blocked[n]) / static_cast<double>(arrivals[n]) : 0.0;
    }

    double violation_rate() const
    {
        return offloaded ? static_cast<double>(violations) / static_cast<double>(offloaded) : 0.0;
    }

    double local_late_rate() const
    {
        return local_tasks ? static_cast<double>(local_late) / static_cast<double>(local_tasks) : 0.0;
    }

    /// lambda_n times the mean energy per measured task at BS n.
    PowerBreakdown power() const
    {
        PowerBreakdown b;
        for (std::size_t n = 0; n < arrivals.size(); ++n) {
            PowerComponents p;
            if (arrivals[n]) {
                double scale = arrival_rates[n] / static_cast<double>(arrivals[n]);
                p.local = energy[n].local * scale;
                p.tx = energy[n].tx * scale;
                p.overlap = energy[n].overlap * scale;
                p.beyond = energy[n].beyond * scale;
            }
            b.per_bs.push_back(p);
        }
        return b;
    }

    double mean_power() const { return power().total(); }

    /// Pooled statistics of two replications of the same system: counts and
    /// energies add, samples concatenate, and power is recomputed from the
    /// pooled per-BS means.
    void merge(const DesStats& o)
    {
        for (std::size_t n = 0; n < arrivals.size(); ++n) {
            arrivals[n] += o.arrivals[n];
            blocked[n] += o.blocked[n];
            energy[n] += o.energy[n];
            for (std::size_t j = 0; j < paths[n].size(); ++j)
                for (std::size_t k = 0; k < paths[n][j].size(); ++k) {
                    paths[n][j][k].offloaded += o.paths[n][j][k].offloaded;
                    paths[n][j][k].violations += o.paths[n][j][k].violations;
                }
        }
        energy_total += o.energy_total;
        offloaded += o.offloaded;
        violations += o.violations;
        local_tasks += o.local_tasks;
        local_late += o.local_late;
        wait_samples.insert(wait_samples.end(), o.wait_samples.begin(), o.wait_samples.end());
        for (std::size_t j = 0; j < sojourn_samples.size(); ++j)
            sojourn_samples[j].insert(sojourn_samples[j].end(), o.sojourn_samples[j].begin(), o.sojourn_samples[j].end());
        total_delay_samples.insert(total_delay_samples.end(), o.total_delay_samples.begin(), o.total_delay_samples.end());
    }
};

namespace detail {

struct PendingUpload {
    double done_at;        // upload completion time, s
    std::size_t order;     // arrival index, breaks ties FIFO
    std::size_t bs;
    std::size_t cls;
    std::size_t model;
    double arrived_at;
    long upload_slots;
    bool measured;

    bool operator>(const PendingUpload& o) const
    {
        return done_at != o.done_at ? done_at > o.done_at : order > o.order;
    }
};

struct BsState {
    std::mt19937_64 arrivals, task_class, channel_model, channel_walk;
    double next_arrival = 0.0;
    std::priority_queue<double, std::vector<double>, std::greater<>> busy_until;
};

}  // namespace detail

inline void write_trace_header(std::ostream& out)
{
    out << "arrival_s,bs,class,path,upload_slots,wait_s,sojourn_s,energy_J\n";
}

/// Runs one replication. Throws ValidationError on a bad allocation and
/// NumericError when the ES backlog exceeds the queue cap.
inline DesStats simulate(const Scenario& sc, const Allocation& alloc, DeadlineMode mode, const DesConfig& cfg = {})
{
    validate(alloc, sc);
    if (cfg.n_tasks < 1) throw ValidationError("simulate: n_tasks must be >= 1");
    if (mode == DeadlineMode::hard) validate_for_mode(sc, mode);
    bool any_channels = std::any_of(alloc.channels.begin(), alloc.channels.end(), [](int x) { return x > 0; });
    if (any_channels && !(alloc.es_fraction > 0.0))
        throw ValidationError("simulate: channels leased but y = 0 leaves no ES capacity");

    const std::size_t nb = sc.num_bs();
    const std::size_t nc = sc.num_classes();
    const double tau = sc.slot;
    const auto warmup = static_cast<std::size_t>(std::floor(cfg.warmup_fraction * static_cast<double>(cfg.n_tasks)));

    DesStats st;
    st.seed = cfg.seed;
    st.mode = mode;
    st.arrivals.assign(nb, 0);
    st.blocked.assign(nb, 0);
    st.energy.assign(nb, {});
    st.sojourn_samples.assign(nc, {});
    st.paths.resize(nb);
    for (std::size_t n = 0; n < nb; ++n) {
        st.arrival_rates.push_back(sc.base_stations[n].arrival_rate);
        st.paths[n].resize(nc);
        for (std::size_t j = 0; j < nc; ++j) st.paths[n][j].resize(sc.base_stations[n].channel_mix[j].size());
    }

    std::vector<double> class_weights;
    for (const auto& c : sc.classes) class_weights.push_back(c.probability);
    std::vector<double> service(nc, 0.0);
    if (alloc.es_fraction > 0.0)
        for (std::size_t j = 0; j < nc; ++j) service[j] = sc.classes[j].cycles / (alloc.es_fraction * sc.es_speed);

    std::vector<detail::BsState> bs(nb);
    for (std::size_t n = 0; n < nb; ++n) {
        bs[n].arrivals = make_stream(cfg.seed, n, Stream::arrivals);
        bs[n].task_class = make_stream(cfg.seed, n, Stream::task_class);
        bs[n].channel_model = make_stream(cfg.seed, n, Stream::channel_model);
        bs[n].channel_walk = make_stream(cfg.seed, n, Stream::channel_walk);
        bs[n].next_arrival = exponential(bs[n].arrivals, sc.base_stations[n].arrival_rate);
    }

    std::priority_queue<detail::PendingUpload, std::vector<detail::PendingUpload>, std::greater<>> uploads;
    std::deque<double> es_departures;   // completion times of tasks still at the ES
    double es_free_at = 0.0;

    if (cfg.trace) write_trace_header(*cfg.trace);
    auto trace = [&](double at, std::size_t n, std::size_t j, const char* path, long slots, double wait, double soj,
                     double energy) {
        if (!cfg.trace) return;
        *cfg.trace << at << ',' << n + 1 << ',' << sc.classes[j].name << ',' << path << ',' << slots << ',' << wait
                   << ',' << soj << ',' << energy << '\n';
    };

    // An upload finishing at u joins the ES queue; with FIFO and known service
    // times its completion is fixed on entry.
    auto finish_upload = [&](const detail::PendingUpload& up) {
        const auto& cls = sc.classes[up.cls];
        while (!es_departures.empty() && es_departures.front() <= up.done_at) es_departures.pop_front();
        double start = std::max(up.done_at, es_free_at);
        double wait = start - up.done_at;
        es_free_at = start + service[up.cls];
        es_departures.push_back(es_free_at);
        if (es_departures.size() > cfg.queue_cap)
            throw NumericError("simulate: ES queue exceeded " + std::to_string(cfg.queue_cap) +
                               " tasks; the allocation is unstable (rho >= 1)");
        if (!up.measured) return;

        double sojourn = wait + service[up.cls];
        double total = static_cast<double>(up.upload_slots) * tau + sojourn;
        PowerComponents e;
        e.tx = sc.tx_power * static_cast<double>(up.upload_slots) * tau;
        bool violated;
        if (mode == DeadlineMode::soft) {
            violated = total > cls.deadline + kSlotSnap * tau;
        } else {
            long done_slot = static_cast<long>(std::ceil(total / tau - kSlotSnap));
            long start_slot = latest_local_start(cls);
            double finish = total;
            if (done_slot > cls.deadline_slots) {
                e.beyond = sc.local_power * cls.local_slots * tau;
                finish = cls.deadline_slots * tau;
            } else if (done_slot >= start_slot) {
                e.overlap = sc.local_power * static_cast<double>(done_slot - start_slot + 1) * tau;
            }
            violated = finish > cls.deadline + kSlotSnap * tau;
        }
        st.energy[up.bs] += e;
        st.energy_total += e.total();
        ++st.offloaded;
        auto& pc = st.paths[up.bs][up.cls][up.model];
        ++pc.offloaded;
        if (violated) {
            ++st.violations;
            ++pc.violations;
        }
        if (cfg.keep_samples) {
            st.wait_samples.push_back(wait);
            st.sojourn_samples[up.cls].push_back(sojourn);
            st.total_delay_samples.push_back(total);
        }
        trace(up.arrived_at, up.bs, up.cls, "offload", up.upload_slots, wait, sojourn, e.total());
    };

    for (std::size_t i = 0; i < cfg.n_tasks; ++i) {
        std::size_t n = 0;
        for (std::size_t m = 1; m < nb; ++m)
            if (bs[m].next_arrival < bs[n].next_arrival) n = m;
        const double now = bs[n].next_arrival;
        bs[n].next_arrival = now + exponential(bs[n].arrivals, sc.base_stations[n].arrival_rate);

        while (!uploads.empty() && uploads.top().done_at <= now) {
            finish_upload(uploads.top());
            uploads.pop();
        }

        auto& station = bs[n];
        while (!station.busy_until.empty() && station.busy_until.top() <= now) station.busy_until.pop();

        const bool measured = i >= warmup;
        const std::size_t j = pick_index(station.task_class, class_weights);
        const auto& mix = sc.base_stations[n].channel_mix[j];
        std::vector<double> model_weights;
        for (const auto& ch : mix) model_weights.push_back(ch.probability);
        const std::size_t k = pick_index(station.channel_model, model_weights);

        if (measured) ++st.arrivals[n];
        if (station.busy_until.size() < static_cast<std::size_t>(alloc.channels[n])) {
            long slots = sample_upload_slots(mix[k].model, sc.classes[j].data_bits, station.channel_walk);
            double done = now + static_cast<double>(slots) * tau;
            station.busy_until.push(done);
            uploads.push({done, i, n, j, k, now, slots, measured});
        } else if (measured) {
            const auto& cls = sc.classes[j];
            PowerComponents e;
            e.local = sc.local_power * cls.local_slots * tau;
            st.energy[n] += e;
            st.energy_total += e.local;
            ++st.blocked[n];
            ++st.local_tasks;
            if (cls.local_slots * tau > cls.deadline + kSlotSnap * tau) ++st.local_late;
            trace(now, n, j, "local", 0, 0.0, 0.0, e.local);
        }
    }
    while (!uploads.empty()) {
        finish_upload(uploads.top());
        uploads.pop();
    }
    return st;
}

/// Independent replications with seeds seed, seed+1, ..., pooled in seed order.
inline DesStats simulate_replications(const Scenario& sc, const Allocation& alloc, DeadlineMode mode, DesConfig cfg,
                                      std::size_t replications, unsigned workers = 1)
{
    if (replications < 1) throw ValidationError("simulate_replications: need >= 1 replication");
    cfg.trace = nullptr;
    std::vector<DesStats> runs(replications);
    auto run = [&](std::size_t r) {
        DesConfig c = cfg;
        c.seed = cfg.seed + r;
        runs[r] = simulate(sc, alloc, mode, c);
    };
    if (workers <= 1) {
        for (std::size_t r = 0; r < replications; ++r) run(r);
    } else {
        std::vector<std::future<void>> jobs;
        for (unsigned w = 0; w < workers; ++w)
            jobs.push_back(std::async(std::launch::async, [&, w] {
                for (std::size_t r = w; r < replications; r += workers) run(r);
            }));
        for (auto& f : jobs) f.get();
    }
    DesStats pooled = std::move(runs[0]);
    for (std::size_t r = 1; r < replications; ++r) pooled.merge(runs[r]);
    return pooled;
}

// --- standalone ES queue -------------------------------------------------------

/// Waiting times of an M/G/1 FIFO queue with Poisson(lambda) arrivals and
/// service drawn by `draw_service`, via the Lindley recursion.
template <class ServiceDraw>
std::vector<double> simulate_queue_waits(double lambda, ServiceDraw&& draw_service, std::size_t n_tasks,
                                         std::uint64_t seed, double warmup_fraction = 0.1)
{
    auto arrivals = make_stream(seed, 0, Stream::arrivals);
    auto services = make_stream(seed, 0, Stream::es_queue);
    const auto warmup = static_cast<std::size_t>(std::floor(warmup_fraction * static_cast<double>(n_tasks)));
    std::vector<double> waits;
    waits.reserve(n_tasks - std::min(warmup, n_tasks));
    double wait = 0.0;
    double prev_service = 0.0;
    for (std::size_t i = 0; i < n_tasks; ++i) {
        double gap = exponential(arrivals, lambda);
        wait = i == 0 ? 0.0 : std::max(0.0, wait + prev_service - gap);
        prev_service = draw_service(services);
        if (i >= warmup) waits.push_back(wait);
    }
    return waits;
}

/// Waiting times for the mixed deterministic service of an EsServiceModel.
inline std::vector<double> simulate_es_waits(double lambda, const EsServiceModel& model, std::size_t n_tasks,
                                             std::uint64_t seed, double warmup_fraction = 0.1)
{
    return simulate_queue_waits(
        lambda, [&](std::mt19937_64& rng) { return model.times[pick_index(rng, model.weights)]; }, n_tasks, seed,
        warmup_fraction);
}

// --- exhaustive DES baseline -----------------------------------------------------

struct OptConfig {
    DesConfig des;
    std::size_t max_combinations = 100000;
};

struct OptResult {
    PlanResult plan;   // predicted_power holds the DES-measured power
    DesStats stats;
    std::size_t combinations = 0;
    std::size_t feasible = 0;
};

/// ES fraction bought with the budget left after leasing channels, capped at 1.
inline double residual_es_fraction(const Scenario& sc, const std::vector<int>& channels)
{
    double spent = 0.0;
    for (std::size_t n = 0; n < sc.num_bs(); ++n) spent += sc.base_stations[n].channel_price * channels[n];
    double y = std::min(1.0, (sc.budget - spent) / (sc.es_price * sc.es_speed));
    // Keep spent + beta f^C y <= B^max exactly despite rounding.
    while (y > 0.0 && spent + sc.es_price * sc.es_speed * y > sc.budget) y = std::nextafter(y, 0.0);
    return y;
}

namespace detail {

inline bool soft_constraints_met(const Scenario& sc, const DesStats& st)
{
    for (std::size_t n = 0; n < st.paths.size(); ++n)
        for (std::size_t j = 0; j < st.paths[n].size(); ++j)
            for (const auto& pc : st.paths[n][j]) {
                if (pc.offloaded == 0) continue;
                double rate = static_cast<double>(pc.violations) / static_cast<double>(pc.offloaded);
                if (rate > sc.classes[j].max_violation.value_or(1.0)) return false;
            }
    return true;
}

}  // namespace detail

/// Enumerates every channel vector x with 0 <= x_n <= K_n, spends the rest of
/// the budget on the ES, and keeps the feasible plan with the lowest
/// DES-measured power. The same seed is used for every combination.
inline OptResult opt_exhaustive(const Scenario& sc, DeadlineMode mode, const OptConfig& cfg = {})
{
    validate_for_mode(sc, mode);
    double combos = 1.0;
    for (const auto& bs : sc.base_stations) combos *= static_cast<double>(bs.max_channels + 1);
    if (combos > static_cast<double>(cfg.max_combinations))
        throw ValidationError("opt_exhaustive: " + std::to_string(static_cast<long long>(combos)) +
                              " channel combinations exceed the limit of " + std::to_string(cfg.max_combinations) +
                              "; use a reduced instance");

    PlanContext ctx(sc);
    DesConfig des = cfg.des;
    des.trace = nullptr;
    OptResult best;
    bool have = false;
    std::vector<int> x(sc.num_bs(), 0);
    for (;;) {
        ++best.combinations;
        bool all_local = std::all_of(x.begin(), x.end(), [](int v) { return v == 0; });
        double y = all_local ? 0.0 : residual_es_fraction(sc, x);
        bool candidate = all_local || y > 0.0;
        if (candidate && !all_local) {
            Allocation probe{x, y};
            double lambda = offloaded_rate(sc, blocking_of(sc, ctx, probe));
            candidate = lambda < es_service_model(sc, y).rate();
        }
        if (candidate) {
            Allocation a{x, y};
            DesStats st = simulate(sc, a, mode, des);
            bool ok = mode == DeadlineMode::hard || detail::soft_constraints_met(sc, st);
            if (ok) {
                ++best.feasible;
                double power = st.mean_power();
                if (!have || power < best.plan.predicted_power) {
                    have = true;
                    best.plan.allocation = a;
                    best.plan.mode = mode;
                    best.plan.predicted_power = power;
                    best.plan.breakdown = st.power();
                    best.plan.blocking.clear();
                    for (std::size_t n = 0; n < sc.num_bs(); ++n) best.plan.blocking.push_back(st.blocking(n));
                    best.plan.cost = allocation_cost(sc, a);
                    best.stats = std::move(st);
                }
            }
        }
        std::size_t n = 0;
        while (n < x.size() && x[n] == sc.base_stations[n].max_channels) x[n++] = 0;
        if (n == x.size()) break;
        ++x[n];
    }
    return best;
}

}  // namespace mco
