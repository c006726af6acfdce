#pragma once

// Upload-time distributions over Gilbert-Elliot channels. An upload starts in
// a state drawn from the stationary distribution (Poisson arrivals see time
// averages) and sends b_good / b_bad bits in each Good / Bad slot.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "pmf.hpp"
#include "scenario.hpp"

namespace mco {

inline constexpr int kMaxUploadSlots = 100000;

struct StationaryDist {
    double good = 0.0;
    double bad = 0.0;
};

inline StationaryDist stationary(const GilbertElliotModel& m)
{
    double gb = m.p_gb();
    double bg = m.p_bg();
    if (gb == 0.0 && bg == 0.0) throw ValidationError("stationary: degenerate chain (P^GB = P^BG = 0)");
    double good = bg / (gb + bg);
    return {good, 1.0 - good};
}

/// One Good slot uploads the whole task and a Bad slot sends nothing.
inline Pmf upload_pmf_onebit(const GilbertElliotModel& m, double tail = kTailThreshold)
{
    StationaryDist pi = stationary(m);
    Pmf pmf;
    pmf.probs = {0.0, pi.good};
    double remaining = pi.bad;
    double geometric = pi.bad;   // pi_B * P_BB^(l-2)
    for (int l = 2; remaining > tail; ++l) {
        if (l > kMaxUploadSlots)
            throw NumericError("upload_pmf_onebit: tail not reached within " + std::to_string(kMaxUploadSlots) +
                               " slots (near-absorbing Bad state)");
        double p = geometric * m.p_bg();
        pmf.probs.push_back(p);
        remaining -= p;
        geometric *= m.p_bb;
    }
    pmf.tail_mass = std::max(remaining, 0.0);
    return pmf;
}

/// Slots needed to push `bits` through the channel. Dynamic program over
/// (channel state, number of Good slots so far); together with the slot index
/// that pair fixes the bits already sent.
inline Pmf upload_pmf_general(const GilbertElliotModel& m, double bits, double tail = kTailThreshold)
{
    Pmf pmf;
    if (bits <= m.b_bad || bits <= 0.0) {
        pmf.probs = {0.0, 1.0};
        return pmf;
    }
    if (m.b_good <= 0.0) throw ValidationError("upload_pmf_general: b_good = 0 never completes an upload");

    StationaryDist pi = stationary(m);
    auto need = static_cast<std::size_t>(std::ceil(bits / m.b_good));
    std::vector<double> good(need + 1, 0.0), bad(need + 1, 0.0);
    good[0] = pi.good;
    bad[0] = pi.bad;
    pmf.probs.push_back(0.0);

    auto sent = [&](std::size_t good_slots, int l) {
        return static_cast<double>(good_slots) * m.b_good + static_cast<double>(l - static_cast<int>(good_slots)) * m.b_bad;
    };

    for (int l = 1;; ++l) {
        if (l > kMaxUploadSlots)
            throw NumericError("upload_pmf_general: tail not reached within " + std::to_string(kMaxUploadSlots) +
                               " slots (near-degenerate channel)");
        std::vector<double> next_good(need + 1, 0.0), next_bad(need + 1, 0.0);
        double done = 0.0;
        double remaining = 0.0;
        for (std::size_t i = 0; i <= need; ++i) {
            if (good[i] > 0.0) {
                std::size_t g = i + 1;
                if (sent(g, l) >= bits) {
                    done += good[i];
                } else {
                    next_good[g] += good[i] * m.p_gg;
                    next_bad[g] += good[i] * m.p_gb();
                }
            }
            if (bad[i] > 0.0) {
                if (sent(i, l) >= bits) {
                    done += bad[i];
                } else {
                    next_good[i] += bad[i] * m.p_bg();
                    next_bad[i] += bad[i] * m.p_bb;
                }
            }
        }
        pmf.probs.push_back(done);
        for (std::size_t i = 0; i <= need; ++i) remaining += next_good[i] + next_bad[i];
        if (remaining <= tail) {
            pmf.tail_mass = remaining;
            return pmf;
        }
        good.swap(next_good);
        bad.swap(next_bad);
    }
}

/// Closed-form mean of upload_pmf_onebit.
inline double mean_upload(const GilbertElliotModel& m)
{
    double gb = m.p_gb();
    double bg = m.p_bg();
    if (gb == 0.0) return 1.0;
    if (bg == 0.0) throw ValidationError("mean_upload: Bad state is absorbing");
    return 1.0 + gb / (bg * bg + gb * bg);
}

inline bool is_onebit_regime(const GilbertElliotModel& m, double bits) { return m.b_bad == 0.0 && bits <= m.b_good; }

/// Upload statistics for one base station.
struct BsUploadProfile {
    // Indexed [class j][channel model k].
    std::vector<std::vector<Pmf>> pmfs;
    std::vector<std::vector<double>> mean_slots;
    // Per-class mixture over channel models.
    std::vector<Pmf> class_mixture;
    // sum_j sum_k P_j P^G_{n,j,k} mean_{n,j,k}
    double mean = 0.0;
};

inline BsUploadProfile bs_mixture(const BaseStation& bs, const std::vector<TaskClass>& classes)
{
    BsUploadProfile prof;
    prof.pmfs.resize(classes.size());
    prof.mean_slots.resize(classes.size());
    for (std::size_t j = 0; j < classes.size(); ++j) {
        std::vector<const Pmf*> parts;
        std::vector<double> weights;
        for (const auto& ch : bs.channel_mix[j]) {
            double bits = classes[j].data_bits;
            Pmf p = upload_pmf_general(ch.model, bits);
            double mean = is_onebit_regime(ch.model, bits) ? mean_upload(ch.model) : p.mean();
            prof.pmfs[j].push_back(std::move(p));
            prof.mean_slots[j].push_back(mean);
            prof.mean += classes[j].probability * ch.probability * mean;
        }
        for (std::size_t k = 0; k < bs.channel_mix[j].size(); ++k) {
            parts.push_back(&prof.pmfs[j][k]);
            weights.push_back(bs.channel_mix[j][k].probability);
        }
        prof.class_mixture.push_back(mix(parts, weights));
    }
    return prof;
}

inline std::vector<BsUploadProfile> upload_profiles(const Scenario& sc)
{
    std::vector<BsUploadProfile> out;
    out.reserve(sc.num_bs());
    for (const auto& bs : sc.base_stations) out.push_back(bs_mixture(bs, sc.classes));
    return out;
}

}  // namespace mco
