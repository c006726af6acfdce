#pragma once

// Expected mobile-device power. Every term is (1 - P_B) lambda_n or
// P_B lambda_n times a per-task energy, so each is affine in P_B.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "markov_channel.hpp"
#include "pmf.hpp"
#include "scenario.hpp"

namespace mco {

struct PowerComponents {
    double local = 0.0;
    double tx = 0.0;
    double overlap = 0.0;
    double beyond = 0.0;

    double total() const { return local + tx + overlap + beyond; }

    PowerComponents& operator+=(const PowerComponents& o)
    {
        local += o.local;
        tx += o.tx;
        overlap += o.overlap;
        beyond += o.beyond;
        return *this;
    }
};

struct PowerBreakdown {
    std::vector<PowerComponents> per_bs;

    PowerComponents sum() const
    {
        PowerComponents s;
        for (const auto& p : per_bs) s += p;
        return s;
    }

    double total() const { return sum().total(); }
};

/// E^L_n = P_B lambda_n p^L Lbar (Lbar in seconds).
inline double local_power(double p_b, const BaseStation& bs, const Scenario& sc)
{
    return p_b * bs.arrival_rate * sc.local_power * mean_local_slots(sc) * sc.slot;
}

/// E^T_n = (1 - P_B) lambda_n p^T tbar^W_n.
inline double upload_power(double p_b, const BaseStation& bs, const Scenario& sc, double mean_upload_slots)
{
    return (1.0 - p_b) * bs.arrival_rate * sc.tx_power * mean_upload_slots * sc.slot;
}

namespace detail {

inline void require_local_fallback(const TaskClass& cls)
{
    if (latest_local_start(cls) < 1)
        throw ValidationError("class '" + cls.name + "': local execution cannot meet the deadline (t^L < 1)");
}

inline long min_es_slots(const TaskClass& cls, const Scenario& sc, double es_fraction)
{
    return static_cast<long>(std::ceil(cls.cycles / (es_fraction * sc.es_speed * sc.slot) - kSlotSnap));
}

}  // namespace detail

/// Local energy (J) spent per offloaded task while local execution runs
/// concurrently with a late offload, t = t^L .. d~.
inline double overlap_energy(const TaskClass& cls, const Pmf& upload, const Pmf& sojourn, const Scenario& sc,
                             double es_fraction)
{
    detail::require_local_fallback(cls);
    const long start = latest_local_start(cls);
    const long deadline = cls.deadline_slots;
    const long min_es = detail::min_es_slots(cls, sc, es_fraction);
    double acc = 0.0;
    for (long t = start; t <= deadline; ++t) {
        double completes_at_t = 0.0;
        for (long l = 1; l <= t - min_es; ++l) completes_at_t += upload.at(l) * sojourn.at(t - l);
        acc += completes_at_t * sc.local_power * static_cast<double>(t - start + 1) * sc.slot;
    }
    return acc;
}

/// Probability that the offloaded result arrives after slot d~. Truncated
/// tails count as late.
inline double overrun_probability(const TaskClass& cls, const Pmf& upload, const Pmf& sojourn)
{
    const long deadline = cls.deadline_slots;
    double acc = upload.tail_mass;
    for (long l = 1; l < static_cast<long>(upload.size()); ++l) {
        double pw = upload.probs[l];
        if (pw == 0.0) continue;
        double late = sojourn.tail_mass;
        for (long b = std::max(0L, deadline - l + 1); b < static_cast<long>(sojourn.size()); ++b) late += sojourn.probs[b];
        acc += pw * late;
    }
    return acc;
}

/// Energy (J) per offloaded task wasted on a full local run when the
/// offload overruns the deadline.
inline double beyond_energy(const TaskClass& cls, const Pmf& upload, const Pmf& sojourn, const Scenario& sc)
{
    detail::require_local_fallback(cls);
    return overrun_probability(cls, upload, sojourn) * sc.local_power * cls.local_slots * sc.slot;
}

/// E^O_{n,j,k}.
inline double overlap_power(double p_b, const BaseStation& bs, const TaskClass& cls, const Pmf& upload,
                            const Pmf& sojourn, const Scenario& sc, double es_fraction)
{
    return (1.0 - p_b) * bs.arrival_rate * overlap_energy(cls, upload, sojourn, sc, es_fraction);
}

/// E^B_{n,j,k}.
inline double beyond_power(double p_b, const BaseStation& bs, const TaskClass& cls, const Pmf& upload,
                           const Pmf& sojourn, const Scenario& sc)
{
    return (1.0 - p_b) * bs.arrival_rate * beyond_energy(cls, upload, sojourn, sc);
}

/// Expected energy per offloaded task at one base station.
struct OffloadEnergy {
    double tx = 0.0;
    double overlap = 0.0;
    double beyond = 0.0;

    double total() const { return tx + overlap + beyond; }
};

/// Per-task offload energy. `sojourn` holds one discretized ES sojourn PMF
/// per class (hard mode); pass nullptr for soft mode (upload energy only).
inline OffloadEnergy offload_energy(const BaseStation& bs, const BsUploadProfile& uploads, const Scenario& sc,
                                    const std::vector<Pmf>* sojourn, double es_fraction)
{
    OffloadEnergy e;
    e.tx = sc.tx_power * uploads.mean * sc.slot;
    if (!sojourn) return e;
    for (std::size_t j = 0; j < sc.num_classes(); ++j) {
        const auto& cls = sc.classes[j];
        for (std::size_t k = 0; k < bs.channel_mix[j].size(); ++k) {
            double w = cls.probability * bs.channel_mix[j][k].probability;
            if (w == 0.0) continue;
            const Pmf& up = uploads.pmfs[j][k];
            e.overlap += w * overlap_energy(cls, up, (*sojourn)[j], sc, es_fraction);
            e.beyond += w * beyond_energy(cls, up, (*sojourn)[j], sc);
        }
    }
    return e;
}

/// Power at one base station for blocking p_b.
inline PowerComponents bs_power(double p_b, const BaseStation& bs, const Scenario& sc, const OffloadEnergy& e)
{
    PowerComponents p;
    double offloaded = (1.0 - p_b) * bs.arrival_rate;
    p.local = local_power(p_b, bs, sc);
    p.tx = offloaded * e.tx;
    p.overlap = offloaded * e.overlap;
    p.beyond = offloaded * e.beyond;
    return p;
}

/// E^C_n = E^T_n + sum_j sum_k P_j P^G_{n,j,k} (E^O + E^B).
inline double offload_power_total(double p_b, const BaseStation& bs, const BsUploadProfile& uploads,
                                  const Scenario& sc, const std::vector<Pmf>& sojourn, double es_fraction)
{
    auto e = offload_energy(bs, uploads, sc, &sojourn, es_fraction);
    return (1.0 - p_b) * bs.arrival_rate * e.total();
}

}  // namespace mco
