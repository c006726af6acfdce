#pragma once

// Small convex program over blocking probabilities P_n:
//
//   min  c . P + c0
//   s.t. sum_n alpha_n (a_n (1 - P_n) + 1 / P_n) <= budget_rhs
//        sum_n lambda_n (1 - P_n)               <= lambda_rhs
//        lower_n <= P_n <= 1
//
// Solved with a log-barrier interior-point method (damped Newton steps on the
// barrier, then a KKT certificate built from the barrier multipliers).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <string>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "scenario.hpp"

namespace mco {

struct SubproblemSpec {
    std::vector<double> cost;           // c_n, W per unit P_n
    double constant = 0.0;              // c0
    double budget_rhs = 0.0;            // $ left after the ES lease
    std::vector<double> loads;          // a_n, erlangs
    std::vector<double> prices;         // alpha_n
    std::vector<double> arrival_rates;  // lambda_n
    double lambda_rhs = 0.0;            // tasks/s
    std::vector<double> lower;          // P^min_n; the upper bound is 1

    std::size_t size() const { return cost.size(); }
};

struct SubproblemSolution {
    std::vector<double> blocking;
    double objective = 0.0;
    double kkt_residual = 0.0;
    int newton_steps = 0;
};

struct ConvexOptions {
    double feasibility_tol = 1e-9;
    double gap_tol = 1e-8;
    double kkt_tol = 1e-6;
    int max_newton = 200;
};

inline double budget_lhs(const SubproblemSpec& s, const std::vector<double>& p)
{
    double acc = 0.0;
    for (std::size_t n = 0; n < s.size(); ++n)
        if (s.prices[n] != 0.0) acc += s.prices[n] * (s.loads[n] * (1.0 - p[n]) + 1.0 / p[n]);
    return acc;
}

inline double lambda_lhs(const SubproblemSpec& s, const std::vector<double>& p)
{
    double acc = 0.0;
    for (std::size_t n = 0; n < s.size(); ++n) acc += s.arrival_rates[n] * (1.0 - p[n]);
    return acc;
}

inline double objective_value(const SubproblemSpec& s, const std::vector<double>& p)
{
    double acc = s.constant;
    for (std::size_t n = 0; n < s.size(); ++n) acc += s.cost[n] * p[n];
    return acc;
}

/// Independent constraint check of a candidate point.
inline bool is_feasible(const SubproblemSpec& s, const std::vector<double>& p, double tol = 1e-9)
{
    for (std::size_t n = 0; n < s.size(); ++n)
        if (p[n] < s.lower[n] - tol || p[n] > 1.0 + tol || !(p[n] > 0.0)) return false;
    return budget_lhs(s, p) <= s.budget_rhs + tol * std::max(1.0, std::abs(s.budget_rhs)) &&
           lambda_lhs(s, p) <= s.lambda_rhs + tol * std::max(1.0, std::abs(s.lambda_rhs));
}

namespace detail {

// Barrier problem restricted to the free coordinates.
class BarrierProblem {
public:
    BarrierProblem(const SubproblemSpec& s, std::vector<std::size_t> free_idx, std::vector<double> fixed,
                   bool with_budget, bool with_lambda)
        : s_(s), idx_(std::move(free_idx)), point_(std::move(fixed)), budget_(with_budget), lambda_(with_lambda)
    {
    }

    std::size_t dim() const { return idx_.size(); }
    std::size_t num_constraints() const { return 2 * idx_.size() + (budget_ ? 1 : 0) + (lambda_ ? 1 : 0); }

    std::vector<double> expand(const Eigen::VectorXd& x) const
    {
        std::vector<double> p = point_;
        for (std::size_t i = 0; i < idx_.size(); ++i) p[idx_[i]] = x[static_cast<Eigen::Index>(i)];
        return p;
    }

    double budget_slack(const std::vector<double>& p) const { return s_.budget_rhs - budget_lhs(s_, p); }
    double lambda_slack(const std::vector<double>& p) const { return s_.lambda_rhs - lambda_lhs(s_, p); }

    bool strictly_feasible(const Eigen::VectorXd& x) const
    {
        for (std::size_t i = 0; i < idx_.size(); ++i) {
            double v = x[static_cast<Eigen::Index>(i)];
            if (!(v > s_.lower[idx_[i]] && v < 1.0)) return false;
        }
        auto p = expand(x);
        if (budget_ && !(budget_slack(p) > 0.0)) return false;
        if (lambda_ && !(lambda_slack(p) > 0.0)) return false;
        return true;
    }

    // t * c.x - sum log(slacks). The constant c0 is left out: t * c0 would
    // swamp the line-search comparisons at large t.
    double value(const Eigen::VectorXd& x, double t) const
    {
        auto p = expand(x);
        double v = 0.0;
        for (std::size_t i = 0; i < idx_.size(); ++i) v += t * s_.cost[idx_[i]] * x[static_cast<Eigen::Index>(i)];
        for (std::size_t i = 0; i < idx_.size(); ++i) {
            double xi = x[static_cast<Eigen::Index>(i)];
            v -= std::log(xi - s_.lower[idx_[i]]) + std::log(1.0 - xi);
        }
        if (budget_) v -= std::log(budget_slack(p));
        if (lambda_) v -= std::log(lambda_slack(p));
        return v;
    }

    // value(y) - value(x), computed from slack differences so the result
    // stays accurate when both values are large and nearly equal.
    double value_change(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double t) const
    {
        double change = 0.0;
        double budget_delta = 0.0;
        double lambda_delta = 0.0;
        for (std::size_t i = 0; i < idx_.size(); ++i) {
            std::size_t n = idx_[i];
            auto k = static_cast<Eigen::Index>(i);
            double d = y[k] - x[k];
            change += t * s_.cost[n] * d;
            change -= std::log1p(d / (x[k] - s_.lower[n])) + std::log1p(-d / (1.0 - x[k]));
            if (s_.prices[n] != 0.0) budget_delta += s_.prices[n] * (s_.loads[n] * d + d / (x[k] * y[k]));
            lambda_delta += s_.arrival_rates[n] * d;
        }
        auto p = expand(x);
        if (budget_) change -= std::log1p(budget_delta / budget_slack(p));
        if (lambda_) change -= std::log1p(lambda_delta / lambda_slack(p));
        return change;
    }

    void derivatives(const Eigen::VectorXd& x, double t, Eigen::VectorXd& grad, Eigen::MatrixXd& hess) const
    {
        const auto m = static_cast<Eigen::Index>(idx_.size());
        auto p = expand(x);
        grad = Eigen::VectorXd::Zero(m);
        hess = Eigen::MatrixXd::Zero(m, m);
        Eigen::VectorXd gb(m), gl(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            std::size_t n = idx_[static_cast<std::size_t>(i)];
            double xi = x[i];
            double lo = xi - s_.lower[n];
            double hi = 1.0 - xi;
            grad[i] = t * s_.cost[n] - 1.0 / lo + 1.0 / hi;
            hess(i, i) = 1.0 / (lo * lo) + 1.0 / (hi * hi);
            gb[i] = s_.prices[n] * (-s_.loads[n] - 1.0 / (xi * xi));
            gl[i] = -s_.arrival_rates[n];
        }
        if (budget_) {
            double sl = budget_slack(p);
            grad += gb / sl;
            hess += gb * gb.transpose() / (sl * sl);
            for (Eigen::Index i = 0; i < m; ++i) {
                std::size_t n = idx_[static_cast<std::size_t>(i)];
                hess(i, i) += s_.prices[n] * 2.0 / (x[i] * x[i] * x[i]) / sl;
            }
        }
        if (lambda_) {
            double sl = lambda_slack(p);
            grad += gl / sl;
            hess += gl * gl.transpose() / (sl * sl);
        }
    }

    // KKT residual of the original problem at x. Box multipliers are the
    // barrier ones, 1 / (t gap), which are exact for the stored x. Constraint
    // multipliers are refit by least squares (the barrier estimate
    // 1 / (t slack) loses digits to cancellation when the slack is tiny) and
    // clamped at 0. Returns the worst scaled dual residual or complementarity.
    double kkt_residual(const Eigen::VectorXd& x, double t, double active_tol) const
    {
        const std::size_t m = idx_.size();
        auto p = expand(x);
        double sb = budget_ ? budget_slack(p) : 0.0;
        double sl = lambda_ ? lambda_slack(p) : 0.0;
        double ub = budget_ ? 1.0 / (t * sb) : 0.0;
        double ul = lambda_ ? 1.0 / (t * sl) : 0.0;

        std::vector<double> budget_grad(m), lambda_grad(m), box(m), scale(m);
        double cost_scale = 1.0;
        for (std::size_t i = 0; i < m; ++i) {
            std::size_t n = idx_[i];
            double xi = x[static_cast<Eigen::Index>(i)];
            budget_grad[i] = s_.prices[n] * (-s_.loads[n] - 1.0 / (xi * xi));
            lambda_grad[i] = -s_.arrival_rates[n];
            box[i] = 1.0 / (t * (1.0 - xi)) - 1.0 / (t * (xi - s_.lower[n]));
            scale[i] = std::max({1.0, std::abs(s_.cost[n]), std::abs(ub * budget_grad[i]), std::abs(ul * lambda_grad[i])});
            cost_scale = std::max(cost_scale, std::abs(s_.cost[n]));
        }

        // Only multipliers of nearly tight constraints are refit; elsewhere the
        // barrier value is accurate.
        std::vector<int> cols;
        if (budget_ && std::abs(sb) <= active_tol * std::max(1.0, std::abs(s_.budget_rhs))) cols.push_back(0);
        if (lambda_ && std::abs(sl) <= active_tol * std::max(1.0, std::abs(s_.lambda_rhs))) cols.push_back(1);
        if (!cols.empty()) {
            Eigen::MatrixXd a(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(cols.size()));
            Eigen::VectorXd rhs(static_cast<Eigen::Index>(m));
            for (std::size_t i = 0; i < m; ++i) {
                double w = 1.0 / scale[i];
                for (std::size_t c = 0; c < cols.size(); ++c)
                    a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
                        w * (cols[c] == 0 ? budget_grad[i] : lambda_grad[i]);
                rhs[static_cast<Eigen::Index>(i)] = -w * (s_.cost[idx_[i]] + box[i]);
                for (int c = 0; c < 2; ++c)
                    if (std::find(cols.begin(), cols.end(), c) == cols.end())
                        rhs[static_cast<Eigen::Index>(i)] -= w * (c == 0 ? ub * budget_grad[i] : ul * lambda_grad[i]);
            }
            Eigen::VectorXd u = a.colPivHouseholderQr().solve(rhs);
            for (std::size_t c = 0; c < cols.size(); ++c) (cols[c] == 0 ? ub : ul) = std::max(0.0, u[static_cast<Eigen::Index>(c)]);
        }

        double worst = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            double r = s_.cost[idx_[i]] + ub * budget_grad[i] + ul * lambda_grad[i] + box[i];
            worst = std::max(worst, std::abs(r) / scale[i]);
        }
        worst = std::max(worst, ub * std::abs(sb) / cost_scale);
        worst = std::max(worst, ul * std::abs(sl) / cost_scale);
        return worst;
    }

private:
    const SubproblemSpec& s_;
    std::vector<std::size_t> idx_;
    std::vector<double> point_;
    bool budget_;
    bool lambda_;
};

}  // namespace detail

/// Solves the subproblem, or returns nullopt when it is provably infeasible.
/// P = 1 everywhere minimizes the budget term (F(1) = 1) and maximizes the
/// lambda slack at once, so the problem is feasible iff it is feasible there.
inline std::optional<SubproblemSolution> solve(const SubproblemSpec& spec, const ConvexOptions& opt = {})
{
    const std::size_t n = spec.size();
    std::vector<double> ones(n, 1.0);
    const double budget_scale = std::max(1.0, std::abs(spec.budget_rhs));
    const double lambda_scale = std::max(1.0, std::abs(spec.lambda_rhs));

    double budget_at_one = spec.budget_rhs - budget_lhs(spec, ones);
    if (budget_at_one < -opt.feasibility_tol * budget_scale || spec.lambda_rhs < -opt.feasibility_tol * lambda_scale)
        return std::nullopt;

    // Coordinates pinned to 1: empty boxes, a budget with no slack at P = 1,
    // or no room for any offloaded traffic.
    const bool budget_tight = budget_at_one <= 1e-12 * budget_scale;
    const bool lambda_tight = spec.lambda_rhs <= 1e-12 * lambda_scale;
    std::vector<std::size_t> free_idx;
    std::vector<double> point(n, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        bool pinned = spec.lower[i] >= 1.0 - 1e-12 || (budget_tight && spec.prices[i] != 0.0) ||
                      (lambda_tight && spec.arrival_rates[i] != 0.0);
        if (!pinned) free_idx.push_back(i);
    }

    SubproblemSolution sol;
    if (free_idx.empty()) {
        sol.blocking = point;
        sol.objective = objective_value(spec, point);
        return sol;
    }

    bool with_budget = !budget_tight;
    bool with_lambda = !lambda_tight;
    // Budget rows without any free priced coordinate are constant.
    if (with_budget && std::none_of(free_idx.begin(), free_idx.end(), [&](std::size_t i) { return spec.prices[i] != 0.0; }))
        with_budget = false;
    detail::BarrierProblem prob(spec, free_idx, point, with_budget, with_lambda);

    // Start at the box midpoint; walk toward P = 1 until strictly feasible.
    const auto m = static_cast<Eigen::Index>(free_idx.size());
    Eigen::VectorXd x(m);
    double theta = 0.5;
    for (;;) {
        for (Eigen::Index i = 0; i < m; ++i) {
            double lo = spec.lower[free_idx[static_cast<std::size_t>(i)]];
            x[i] = 1.0 - theta * (1.0 - lo);
        }
        if (prob.strictly_feasible(x)) break;
        theta *= 0.5;
        if (theta < 1e-14) {
            // Feasible set has (numerically) empty interior: P = 1 is the only point.
            sol.blocking = ones;
            sol.objective = objective_value(spec, ones);
            return sol;
        }
    }

    double abs_cost = 0.0;
    for (double c : spec.cost) abs_cost += std::abs(c);
    const double gap_target = opt.gap_tol * std::max(1.0, abs_cost);
    const double constraints = static_cast<double>(prob.num_constraints());

    double t = 1.0;
    Eigen::VectorXd grad;
    Eigen::MatrixXd hess;
    for (;;) {
        // Centering by damped Newton.
        for (int it = 0; it < opt.max_newton; ++it) {
            prob.derivatives(x, t, grad, hess);
            Eigen::VectorXd step = hess.ldlt().solve(-grad);
            double decrement = -grad.dot(step);
            if (!(decrement > 1e-14)) break;
            double alpha = 1.0;
            for (;;) {
                Eigen::VectorXd trial = x + alpha * step;
                if (prob.strictly_feasible(trial) && prob.value_change(x, trial, t) <= -0.25 * alpha * decrement) {
                    x = trial;
                    break;
                }
                alpha *= 0.5;
                if (alpha < 1e-16) break;
            }
            ++sol.newton_steps;
            if (alpha < 1e-16) break;
        }
        if (constraints / t <= gap_target) break;
        t *= 10.0;
    }

    sol.blocking = prob.expand(x);
    sol.objective = objective_value(spec, sol.blocking);
    sol.kkt_residual = prob.kkt_residual(x, t, opt.kkt_tol);
    if (sol.kkt_residual > opt.kkt_tol || !is_feasible(spec, sol.blocking, opt.feasibility_tol))
    {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.3g", sol.kkt_residual);
        throw NumericError(std::string("convex solve: KKT certificate failed (residual ") + buf + ")");
    }
    return sol;
}

}  // namespace mco
