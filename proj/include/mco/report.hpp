#pragma once

// Side-by-side comparison of the analytic model and the simulator for one
// allocation.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "des.hpp"
#include "planner.hpp"
#include "stats.hpp"

namespace mco {

inline constexpr double kPowerRelTol = 0.01;
inline constexpr double kKsTol = 0.02;
inline constexpr double kSigmas = 3.0;

struct ReportLine {
    std::string name;
    double analytic = 0.0;
    double measured = 0.0;
    double tolerance = 0.0;
    bool pass = true;
};

struct ValidationReport {
    PlanResult analytic;
    DesStats des;
    std::vector<ReportLine> lines;

    bool pass() const
    {
        return std::all_of(lines.begin(), lines.end(), [](const ReportLine& l) { return l.pass; });
    }
};

/// Empirical ES waiting times against the analytic waiting-time CDF (which
/// has an atom 1 - rho at 0).
inline double wait_ks(const DelayModel& delays, const std::vector<double>& waits)
{
    return ks_statistic(
        waits, [&](double t) { return delays.wait_cdf(t); },
        [&](double t) { return t <= 0.0 ? 0.0 : delays.wait_cdf(t); });
}

inline ValidationReport validate_allocation(const Scenario& sc, const Allocation& alloc, DeadlineMode mode,
                                            const DesConfig& des_cfg = {},
                                            InversionTier tier = InversionTier::standard)
{
    validate(alloc, sc);
    ValidationReport rep;
    PlanContext ctx(sc);
    rep.analytic = evaluate_allocation(sc, ctx, alloc, mode, tier);
    DesConfig cfg = des_cfg;
    cfg.keep_samples = true;
    rep.des = simulate(sc, alloc, mode, cfg);

    for (std::size_t n = 0; n < sc.num_bs(); ++n) {
        double e = rep.analytic.blocking[n];
        double m = rep.des.blocking(n);
        double tol = kSigmas * binomial_sigma(e, static_cast<double>(rep.des.arrivals[n]));
        rep.lines.push_back({"blocking_bs" + std::to_string(n + 1), e, m, tol, std::abs(m - e) <= tol + 1e-12});
    }

    double pa = rep.analytic.predicted_power;
    double pm = rep.des.mean_power();
    rep.lines.push_back({"power_W", pa, pm, kPowerRelTol * pa, std::abs(pm - pa) <= kPowerRelTol * pa + 1e-12});

    if (rep.analytic.lambda_achieved > 0.0 && !rep.des.wait_samples.empty()) {
        DelayModel delays(rep.analytic.lambda_achieved, es_service_model(sc, alloc.es_fraction), tier);
        double ks = wait_ks(delays, rep.des.wait_samples);
        rep.lines.push_back({"es_wait_ks", 0.0, ks, kKsTol, ks <= kKsTol});
    }

    if (mode == DeadlineMode::hard) {
        rep.lines.push_back({"violations", 0.0, static_cast<double>(rep.des.violations), 0.0, rep.des.violations == 0});
    } else {
        for (std::size_t j = 0; j < sc.num_classes(); ++j) {
            std::size_t off = 0, viol = 0;
            for (const auto& per_bs : rep.des.paths)
                for (const auto& pc : per_bs[j]) {
                    off += pc.offloaded;
                    viol += pc.violations;
                }
            if (off == 0) continue;
            double eps = sc.classes[j].max_violation.value_or(1.0);
            double rate = static_cast<double>(viol) / static_cast<double>(off);
            double tol = eps + kSigmas * binomial_sigma(eps, static_cast<double>(off));
            rep.lines.push_back({"violation_rate_" + sc.classes[j].name, eps, rate, tol, rate <= tol});
        }
    }
    return rep;
}

inline void print_report(std::ostream& out, const ValidationReport& rep)
{
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-28s %14s %14s %12s  %s\n", "check", "analytic", "des", "tolerance", "result");
    out << buf;
    for (const auto& l : rep.lines) {
        std::snprintf(buf, sizeof buf, "%-28s %14.6g %14.6g %12.4g  %s\n", l.name.c_str(), l.analytic, l.measured,
                      l.tolerance, l.pass ? "pass" : "FAIL");
        out << buf;
    }
}

}  // namespace mco
