#pragma once

// Erlang-B loss probabilities for the channel pools at each base station.

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "scenario.hpp"

namespace mco {

/// Offered load in erlangs: arrival rate times mean channel holding time.
struct OfferedLoad {
    double erlangs = 0.0;
};

/// lambda (tasks/s) times the mean upload time (slots * tau seconds).
inline OfferedLoad offered_load(double arrival_rate, double mean_upload_slots, double slot)
{
    return {arrival_rate * mean_upload_slots * slot};
}

/// Blocking probability with x channels. E_0 = 1, E_x = a E_{x-1} / (x + a E_{x-1}).
inline double erlang_b(int x, OfferedLoad a)
{
    if (x < 0) throw std::invalid_argument("erlang_b: negative channel count");
    double e = 1.0;
    for (int i = 1; i <= x; ++i) e = a.erlangs * e / (i + a.erlangs * e);
    return e;
}

/// Blocking probabilities for 0..k channels.
inline std::vector<double> erlang_b_table(int k, OfferedLoad a)
{
    std::vector<double> t(static_cast<std::size_t>(std::max(k, 0)) + 1);
    t[0] = 1.0;
    for (int i = 1; i <= k; ++i) t[i] = a.erlangs * t[i - 1] / (i + a.erlangs * t[i - 1]);
    return t;
}

/// Lowest achievable blocking, i.e. with every leasable channel.
inline double min_blocking(int k, OfferedLoad a) { return erlang_b(k, a); }

/// Largest x in [0, k] whose blocking is still >= target. Targets below
/// min_blocking clamp to k.
inline int invert_to_channels(double target, OfferedLoad a, int k)
{
    auto table = erlang_b_table(k, a);
    // table is nonincreasing: find the first entry below target.
    auto it = std::partition_point(table.begin(), table.end(), [&](double e) { return e >= target; });
    if (it == table.begin()) return 0;
    return static_cast<int>(it - table.begin()) - 1;
}

/// Convex upper bound on the channel count needed for blocking p:
/// a (1 - p) + 1 / p.
inline double inversion_bound(double p, OfferedLoad a)
{
    if (!(p > 0.0)) throw std::domain_error("inversion_bound: blocking probability must be > 0");
    return a.erlangs * (1.0 - p) + 1.0 / p;
}

}  // namespace mco
