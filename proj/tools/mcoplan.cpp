// mcoplan: plan, validate, sweep and exhaustive-baseline runs on a scenario file.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include <mco/mco.hpp>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;

struct Common {
    std::string scenario;
    std::string mode = "soft";
    std::optional<double> eps;
    std::optional<double> budget;
    int y_steps = 100;
    int lambda_steps = 100;
    std::string tier = "standard";
    unsigned workers = 0;
    std::string csv;
};

unsigned default_workers()
{
    if (const char* env = std::getenv("MCOPLAN_WORKERS")) {
        try {
            int v = std::stoi(env);
            if (v >= 1) return static_cast<unsigned>(v);
        } catch (const std::exception&) {
        }
        throw mco::ConfigError(std::string("MCOPLAN_WORKERS must be a positive integer, got '") + env + "'");
    }
    return 1;
}

void add_common(CLI::App* cmd, Common& c)
{
    cmd->add_option("scenario", c.scenario, "Scenario file (JSON, see docs/config.md)")->required();
    cmd->add_option("--mode", c.mode, "Deadline mode")->check(CLI::IsMember({"soft", "hard"}));
    cmd->add_option("--eps", c.eps, "Override every class's violation bound (soft mode)")->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--budget", c.budget, "Override the cost budget")->check(CLI::NonNegativeNumber);
    cmd->add_option("-Y,--y-steps", c.y_steps, "ES-fraction grid size")->check(CLI::PositiveNumber);
    cmd->add_option("--lambda-steps", c.lambda_steps, "ES-rate grid size (hard mode)")->check(CLI::PositiveNumber);
    cmd->add_option("--tier", c.tier, "Laplace-inversion accuracy tier")->check(CLI::IsMember({"standard", "high"}));
    cmd->add_option("--workers", c.workers, "Worker threads (default: $MCOPLAN_WORKERS or 1)");
    cmd->add_option("--csv", c.csv, "Write CSV rows to this file");
}

mco::Scenario load(const Common& c)
{
    mco::Scenario sc = mco::load_scenario(c.scenario);
    if (c.eps) sc = mco::apply_sweep(sc, mco::SweepParam::epsilon, *c.eps);
    if (c.budget) sc = mco::apply_sweep(sc, mco::SweepParam::budget, *c.budget);
    return sc;
}

mco::PlannerConfig planner_config(const Common& c, unsigned workers)
{
    mco::PlannerConfig cfg;
    cfg.y_steps = c.y_steps;
    cfg.lambda_steps = c.lambda_steps;
    cfg.tier = c.tier == "high" ? mco::InversionTier::high : mco::InversionTier::standard;
    cfg.workers = workers;
    return cfg;
}

unsigned workers_of(const Common& c) { return c.workers ? c.workers : default_workers(); }

void print_plan(std::ostream& out, const mco::Scenario& sc, const mco::PlanResult& p, const char* method = nullptr)
{
    out << "method          " << (method ? method : mco::planner_name(p.mode)) << " (" << mco::to_string(p.mode)
        << " deadlines)\n";
    out << "channels        ";
    for (std::size_t n = 0; n < p.allocation.channels.size(); ++n)
        out << (n ? " " : "") << p.allocation.channels[n] << "/" << sc.base_stations[n].max_channels;
    out << "\nes_fraction     " << mco::format_number(p.allocation.es_fraction) << "\n";
    out << "cost            " << mco::format_number(p.cost) << " of " << mco::format_number(sc.budget) << "\n";
    out << "power_W         " << mco::format_number(p.predicted_power) << "\n";
    auto s = p.breakdown.sum();
    out << "  local         " << mco::format_number(s.local) << "\n";
    out << "  upload        " << mco::format_number(s.tx) << "\n";
    if (p.mode == mco::DeadlineMode::hard) {
        out << "  overlap       " << mco::format_number(s.overlap) << "\n";
        out << "  overrun       " << mco::format_number(s.beyond) << "\n";
    }
    out << "blocking        ";
    for (std::size_t n = 0; n < p.blocking.size(); ++n) out << (n ? " " : "") << mco::format_number(p.blocking[n]);
    out << "\n";
    if (method) return;
    out << (p.mode == mco::DeadlineMode::soft ? "lambda_star     " : "lambda_grid     ")
        << mco::format_number(p.lambda_target) << "\n";
    out << "lambda_offload  " << mco::format_number(p.lambda_achieved) << "\n";
}

void write_rows(const std::string& path, std::size_t num_bs, const std::vector<mco::CsvRow>& rows)
{
    auto emit = [&](std::ostream& out) {
        mco::write_csv_header(out, num_bs);
        for (const auto& r : rows) mco::write_csv_row(out, r);
    };
    if (path.empty() || path == "-") {
        emit(std::cout);
        return;
    }
    std::ofstream out(path);
    if (!out) throw mco::ConfigError("cannot write '" + path + "'");
    emit(out);
}

std::vector<double> parse_values(const std::string& list)
{
    std::vector<double> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw mco::ConfigError("bad number '" + item + "' in value list");
        }
    }
    if (out.empty()) throw mco::ConfigError("empty value list");
    return out;
}

std::optional<mco::Allocation> allocation_from_flags(const mco::Scenario& sc, const std::string& x, std::optional<double> y)
{
    if (x.empty() && !y) return std::nullopt;
    if (x.empty() || !y) throw mco::ConfigError("--x and --y must be given together");
    mco::Allocation a;
    for (double v : parse_values(x)) {
        if (v != static_cast<int>(v)) throw mco::ConfigError("--x entries must be integers");
        a.channels.push_back(static_cast<int>(v));
    }
    a.es_fraction = *y;
    mco::validate(a, sc);
    return a;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Channel and edge-server leasing planner for mobile computation offloading"};
    app.require_subcommand(1);

    Common plan_opts, val_opts, sweep_opts, opt_opts;

    auto* plan_cmd = app.add_subcommand("plan", "Plan an allocation with the grid/convex heuristic");
    add_common(plan_cmd, plan_opts);

    auto* val_cmd = app.add_subcommand("validate", "Compare analytic predictions with the simulator");
    add_common(val_cmd, val_opts);
    std::string val_x;
    std::optional<double> val_y;
    std::uint64_t val_seed = 1;
    std::size_t val_tasks = 200000;
    std::string val_trace;
    val_cmd->add_option("--x", val_x, "Channels per base station, comma separated (default: plan first)");
    val_cmd->add_option("--y", val_y, "ES fraction")->check(CLI::Range(0.0, 1.0));
    val_cmd->add_option("--seed", val_seed, "Simulation seed");
    val_cmd->add_option("--tasks", val_tasks, "Simulated tasks")->check(CLI::PositiveNumber);
    val_cmd->add_option("--trace", val_trace, "Write a per-task CSV trace to this file");

    auto* sweep_cmd = app.add_subcommand("sweep", "Sweep one parameter and write CSV rows");
    add_common(sweep_cmd, sweep_opts);
    std::string sweep_param, sweep_values, sweep_seeds;
    bool sweep_opt = false;
    std::size_t sweep_tasks = 100000;
    sweep_cmd->add_option("--param", sweep_param, "budget | lambda_scale | f_es | epsilon")->required();
    sweep_cmd->add_option("--values", sweep_values, "Comma-separated values")->required();
    sweep_cmd->add_option("--seeds", sweep_seeds, "Comma-separated DES seeds (adds simulated rows)");
    sweep_cmd->add_flag("--opt", sweep_opt, "Add exhaustive DES baseline rows (reduced instances only)");
    sweep_cmd->add_option("--tasks", sweep_tasks, "Simulated tasks per DES run")->check(CLI::PositiveNumber);

    auto* opt_cmd = app.add_subcommand("opt", "Exhaustive DES-evaluated baseline (reduced instances)");
    add_common(opt_cmd, opt_opts);
    std::uint64_t opt_seed = 1;
    std::size_t opt_tasks = 100000;
    std::size_t opt_limit = 100000;
    opt_cmd->add_option("--seed", opt_seed, "Simulation seed");
    opt_cmd->add_option("--tasks", opt_tasks, "Simulated tasks per combination")->check(CLI::PositiveNumber);
    opt_cmd->add_option("--max-combinations", opt_limit, "Refuse larger search spaces");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*plan_cmd) {
            auto sc = load(plan_opts);
            auto mode = mco::parse_mode(plan_opts.mode);
            for (const auto& w : mco::validate_for_mode(sc, mode)) std::cerr << "warning: " << w << "\n";
            auto p = mco::plan(sc, mode, planner_config(plan_opts, workers_of(plan_opts)));
            print_plan(std::cout, sc, p);
            if (!plan_opts.csv.empty()) write_rows(plan_opts.csv, sc.num_bs(), {mco::plan_row("plan", "", p)});
        } else if (*val_cmd) {
            auto sc = load(val_opts);
            auto mode = mco::parse_mode(val_opts.mode);
            for (const auto& w : mco::validate_for_mode(sc, mode)) std::cerr << "warning: " << w << "\n";
            auto alloc = allocation_from_flags(sc, val_x, val_y);
            if (!alloc) {
                auto p = mco::plan(sc, mode, planner_config(val_opts, workers_of(val_opts)));
                alloc = p.allocation;
                print_plan(std::cout, sc, p);
                std::cout << "\n";
            }
            mco::DesConfig des;
            des.seed = val_seed;
            des.n_tasks = val_tasks;
            std::unique_ptr<std::ofstream> trace;
            if (!val_trace.empty()) {
                trace = std::make_unique<std::ofstream>(val_trace);
                if (!*trace) throw mco::ConfigError("cannot write '" + val_trace + "'");
                des.trace = trace.get();
            }
            auto tier = val_opts.tier == "high" ? mco::InversionTier::high : mco::InversionTier::standard;
            auto rep = mco::validate_allocation(sc, *alloc, mode, des, tier);
            mco::print_report(std::cout, rep);
            std::cout << (rep.pass() ? "overall pass\n" : "overall FAIL\n");
            if (!val_opts.csv.empty()) {
                std::vector<mco::CsvRow> rows{mco::plan_row("validate", "", rep.analytic),
                                              mco::des_row("validate", "", "DES", sc, *alloc, rep.des)};
                rows[0].method = "analytic";
                write_rows(val_opts.csv, sc.num_bs(), rows);
            }
        } else if (*sweep_cmd) {
            auto sc = load(sweep_opts);
            mco::SweepSpec spec;
            spec.param = mco::parse_sweep_param(sweep_param);
            spec.values = parse_values(sweep_values);
            spec.mode = mco::parse_mode(sweep_opts.mode);
            if (!sweep_seeds.empty())
                for (double s : parse_values(sweep_seeds)) spec.seeds.push_back(static_cast<std::uint64_t>(s));
            spec.with_opt = sweep_opt;
            spec.planner = planner_config(sweep_opts, 1);
            spec.des.n_tasks = sweep_tasks;
            auto rows = mco::run_sweep(sc, spec, workers_of(sweep_opts));
            write_rows(sweep_opts.csv, sc.num_bs(), rows);
        } else if (*opt_cmd) {
            auto sc = load(opt_opts);
            auto mode = mco::parse_mode(opt_opts.mode);
            mco::OptConfig cfg;
            cfg.des.seed = opt_seed;
            cfg.des.n_tasks = opt_tasks;
            cfg.des.keep_samples = false;
            cfg.max_combinations = opt_limit;
            auto r = mco::opt_exhaustive(sc, mode, cfg);
            std::cout << "combinations    " << r.combinations << " (" << r.feasible << " feasible)\n";
            print_plan(std::cout, sc, r.plan, "DES-OPT");
            std::cout << "violation_rate  " << mco::format_number(r.stats.violation_rate()) << "\n";
            if (!opt_opts.csv.empty())
                write_rows(opt_opts.csv, sc.num_bs(), {mco::des_row("opt", "", "DES-OPT", sc, r.plan.allocation, r.stats)});
        }
    } catch (const mco::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const mco::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitOk;
}
