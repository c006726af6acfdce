#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <vector>

namespace mco {

inline constexpr double kTailThreshold = 1e-9;

/// Distribution over nonnegative integer slots. probs[i] = Pr[X = i]; mass
/// beyond the last explicit entry is kept in tail_mass.
struct Pmf {
    std::vector<double> probs;
    double tail_mass = 0.0;

    std::size_t size() const { return probs.size(); }

    double at(std::size_t i) const { return i < probs.size() ? probs[i] : 0.0; }

    double explicit_mass() const { return std::accumulate(probs.begin(), probs.end(), 0.0); }

    double total_mass() const { return explicit_mass() + tail_mass; }

    /// Pr[X <= k] over explicit entries.
    double cdf(std::size_t k) const
    {
        double acc = 0.0;
        for (std::size_t i = 0; i < probs.size() && i <= k; ++i) acc += probs[i];
        return acc;
    }

    /// Mean over explicit entries; the tail is placed one slot past the end,
    /// which is a lower bound on its contribution.
    double mean() const
    {
        double acc = 0.0;
        for (std::size_t i = 0; i < probs.size(); ++i) acc += static_cast<double>(i) * probs[i];
        return acc + tail_mass * static_cast<double>(probs.size());
    }
};

/// Weighted mixture of PMFs; tails mix with the same weights.
inline Pmf mix(const std::vector<const Pmf*>& parts, const std::vector<double>& weights)
{
    Pmf out;
    std::size_t len = 0;
    for (const Pmf* p : parts) len = std::max(len, p->size());
    out.probs.assign(len, 0.0);
    for (std::size_t i = 0; i < parts.size(); ++i) {
        for (std::size_t l = 0; l < parts[i]->size(); ++l) out.probs[l] += weights[i] * parts[i]->probs[l];
        out.tail_mass += weights[i] * parts[i]->tail_mass;
    }
    return out;
}

}  // namespace mco
