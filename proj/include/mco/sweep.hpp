#pragma once

// Parameter sweeps and the CSV rows they produce (schema in docs/csv.md).

#include <cstdint>
#include <cstdio>
#include <future>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "des.hpp"
#include "planner.hpp"
#include "scenario.hpp"

namespace mco {

inline constexpr int kCsvSchemaVersion = 1;

enum class SweepParam { budget, lambda_scale, f_es, epsilon };

inline const char* to_string(SweepParam p)
{
    switch (p) {
    case SweepParam::budget: return "budget";
    case SweepParam::lambda_scale: return "lambda_scale";
    case SweepParam::f_es: return "f_es";
    case SweepParam::epsilon: return "epsilon";
    }
    return "?";
}

inline SweepParam parse_sweep_param(const std::string& s)
{
    if (s == "budget") return SweepParam::budget;
    if (s == "lambda_scale") return SweepParam::lambda_scale;
    if (s == "f_es") return SweepParam::f_es;
    if (s == "epsilon") return SweepParam::epsilon;
    throw ConfigError("unknown sweep parameter '" + s + "' (expected budget|lambda_scale|f_es|epsilon)");
}

/// Copy of `base` with one parameter set. lambda_scale multiplies every
/// arrival rate; epsilon overrides every class's eps.
inline Scenario apply_sweep(const Scenario& base, SweepParam p, double value)
{
    Scenario sc = base;
    switch (p) {
    case SweepParam::budget: sc.budget = value; break;
    case SweepParam::lambda_scale:
        for (auto& bs : sc.base_stations) bs.arrival_rate *= value;
        break;
    case SweepParam::f_es: sc.es_speed = value; break;
    case SweepParam::epsilon:
        for (auto& c : sc.classes) c.max_violation = value;
        break;
    }
    validate(sc);
    finalize(sc);
    return sc;
}

struct SweepSpec {
    SweepParam param = SweepParam::budget;
    std::vector<double> values;
    DeadlineMode mode = DeadlineMode::soft;
    std::vector<std::uint64_t> seeds;   // one DES row per seed; empty = analytic rows only
    bool with_opt = false;
    PlannerConfig planner;
    DesConfig des;
    OptConfig opt;
};

struct CsvRow {
    std::string param;
    std::string value;
    DeadlineMode mode = DeadlineMode::soft;
    std::string method;
    double power = 0.0;
    double cost = 0.0;
    double es_fraction = 0.0;
    std::vector<int> channels;
    std::optional<double> violation_rate;
    std::optional<std::uint64_t> seed;
};

inline std::string format_number(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline void write_csv_header(std::ostream& out, std::size_t num_bs)
{
    out << "param,value,mode,method,power_W,cost,y";
    for (std::size_t n = 1; n <= num_bs; ++n) out << ",x_" << n;
    out << ",violation_rate,seed\n";
}

inline void write_csv_row(std::ostream& out, const CsvRow& r)
{
    out << r.param << ',' << r.value << ',' << to_string(r.mode) << ',' << r.method << ',' << format_number(r.power)
        << ',' << format_number(r.cost) << ',' << format_number(r.es_fraction);
    for (int x : r.channels) out << ',' << x;
    out << ',' << (r.violation_rate ? format_number(*r.violation_rate) : "") << ','
        << (r.seed ? std::to_string(*r.seed) : "") << '\n';
}

inline const char* planner_name(DeadlineMode m) { return m == DeadlineMode::soft ? "GCASD" : "GCAHD"; }

inline CsvRow plan_row(const std::string& param, const std::string& value, const PlanResult& p)
{
    return {param, value, p.mode, planner_name(p.mode), p.predicted_power, p.cost, p.allocation.es_fraction,
            p.allocation.channels, std::nullopt, std::nullopt};
}

inline CsvRow des_row(const std::string& param, const std::string& value, const std::string& method,
                      const Scenario& sc, const Allocation& a, const DesStats& st)
{
    return {param, value, st.mode, method, st.mean_power(), allocation_cost(sc, a), a.es_fraction, a.channels,
            st.violation_rate(), st.seed};
}

/// Rows for one sweep value: the planner's analytic row, a DES row per seed
/// at the planned allocation, and optionally the exhaustive DES baseline.
inline std::vector<CsvRow> sweep_point(const Scenario& base, const SweepSpec& spec, double value)
{
    Scenario sc = apply_sweep(base, spec.param, value);
    std::string param = to_string(spec.param);
    std::string val = format_number(value);
    std::vector<CsvRow> rows;
    PlanResult p = plan(sc, spec.mode, spec.planner);
    rows.push_back(plan_row(param, val, p));
    for (auto seed : spec.seeds) {
        DesConfig d = spec.des;
        d.seed = seed;
        d.trace = nullptr;
        d.keep_samples = false;
        DesStats st = simulate(sc, p.allocation, spec.mode, d);
        rows.push_back(des_row(param, val, std::string(planner_name(spec.mode)) + "+DES", sc, p.allocation, st));
    }
    if (spec.with_opt) {
        for (auto seed : spec.seeds.empty() ? std::vector<std::uint64_t>{spec.des.seed} : spec.seeds) {
            OptConfig o = spec.opt;
            o.des = spec.des;
            o.des.seed = seed;
            o.des.keep_samples = false;
            OptResult r = opt_exhaustive(sc, spec.mode, o);
            rows.push_back(des_row(param, val, "DES-OPT", sc, r.plan.allocation, r.stats));
        }
    }
    return rows;
}

/// Runs every sweep value on up to `workers` threads; rows come back in
/// sweep-index order regardless of scheduling.
inline std::vector<CsvRow> run_sweep(const Scenario& base, const SweepSpec& spec, unsigned workers = 1)
{
    if (spec.values.empty()) throw ValidationError("sweep: no values given");
    std::vector<std::vector<CsvRow>> parts(spec.values.size());
    if (workers <= 1) {
        for (std::size_t i = 0; i < spec.values.size(); ++i) parts[i] = sweep_point(base, spec, spec.values[i]);
    } else {
        std::vector<std::future<void>> jobs;
        for (unsigned w = 0; w < workers; ++w)
            jobs.push_back(std::async(std::launch::async, [&, w] {
                for (std::size_t i = w; i < spec.values.size(); i += workers)
                    parts[i] = sweep_point(base, spec, spec.values[i]);
            }));
        for (auto& j : jobs) j.get();
    }
    std::vector<CsvRow> rows;
    for (auto& p : parts) rows.insert(rows.end(), p.begin(), p.end());
    return rows;
}

}  // namespace mco
