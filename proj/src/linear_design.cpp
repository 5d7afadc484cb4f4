#include "chainopt/linear_design.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace chainopt {

namespace {

constexpr double kResidualTol = 1e-12; // relative residual target for the multiplier
constexpr int kMaxBisection = 200;

double budget_excess(const LinearSubproblem& p, double lambda)
{
    double sum = 0.0;
    for (std::size_t k = 0; k < p.a.size(); ++k)
        sum += std::sqrt(p.b[k] / (p.a[k] + lambda));
    return sum - p.c;
}

} // namespace

LinearSubproblem build_subproblem(const ChainSpec& spec, const std::vector<FunctionProfile>& profiles)
{
    LinearSubproblem p;
    p.c = spec.e2e_deadline;
    for (std::size_t i = 0; i < spec.size(); ++i) {
        const FunctionProfile& prof = profiles[i];
        if (prof.residual_rate == 0.0)
            continue;
        const FunctionSpec& fn = spec.functions[i];
        if (fn.queue_cost_rate <= 0.0)
            throw std::invalid_argument(
                "queue_cost must be > 0 for cycling function " + std::to_string(i)
                + " under the linear design");
        p.active.push_back(i);
        p.a.push_back(fn.queue_cost_rate * spec.input_rate);
        p.b.push_back(fn.compute_cost_rate * fn.switch_delay
                      * (fn.nominal_speed / spec.input_rate)
                      * prof.residual_rate * (1.0 - prof.residual_rate));
    }
    if (p.active.empty())
        throw std::invalid_argument("no function cycles a machine; nothing to optimize");
    return p;
}

std::vector<double> solve_unconstrained(const LinearSubproblem& p)
{
    std::vector<double> x;
    x.reserve(p.a.size());
    for (std::size_t k = 0; k < p.a.size(); ++k)
        x.push_back(std::sqrt(p.b[k] / p.a[k]));
    return x;
}

double solve_lambda(const LinearSubproblem& p)
{
    if (budget_excess(p, 0.0) <= 0.0)
        throw std::invalid_argument("budget not exceeded; the unconstrained solution applies");

    double lo = 0.0;
    double hi = 0.0;
    for (double a : p.a)
        hi = std::max(hi, a);
    hi = std::max(hi, 1.0);
    while (budget_excess(p, hi) >= 0.0)
        hi *= 2.0;

    // The excess is strictly decreasing in lambda, so plain bisection.
    const double tol = kResidualTol * p.c;
    double mid = 0.5 * (lo + hi);
    for (int it = 0; it < kMaxBisection; ++it) {
        mid = 0.5 * (lo + hi);
        const double g = budget_excess(p, mid);
        if (std::abs(g) <= tol)
            return mid;
        if (g > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return mid;
}

LinearSolution solve(const ChainSpec& spec)
{
    validate(spec);
    const std::size_t n = spec.size();
    const std::vector<FunctionProfile> profiles = derive_profiles(spec);

    LinearSolution sol;
    sol.x.assign(n, 0.0);
    sol.periods.assign(n, 0.0);
    sol.qmax.assign(n, 0.0);
    sol.always_on.assign(n, true);
    sol.cost.lower_bound = lower_bound_cost(spec);

    bool any_active = false;
    for (const FunctionProfile& p : profiles)
        any_active |= p.residual_rate > 0.0;

    if (any_active) {
        const LinearSubproblem p = build_subproblem(spec, profiles);
        std::vector<double> x = solve_unconstrained(p);
        double xsum = 0.0;
        for (double v : x)
            xsum += v;
        if (xsum > p.c) {
            sol.constrained = true;
            sol.lambda = solve_lambda(p);
            for (std::size_t k = 0; k < x.size(); ++k)
                x[k] = std::sqrt(p.b[k] / (p.a[k] + sol.lambda));
        }
        for (std::size_t k = 0; k < p.active.size(); ++k) {
            const std::size_t i = p.active[k];
            const FunctionProfile& prof = profiles[i];
            const FunctionSpec& fn = spec.functions[i];
            const double shape = fn.nominal_speed * prof.residual_rate * (1.0 - prof.residual_rate);
            sol.x[i] = x[k];
            sol.degenerate |= p.b[k] == 0.0;
            sol.periods[i] = spec.input_rate * x[k] / shape;
            sol.qmax[i] = shape * sol.periods[i];
            sol.always_on[i] = sol.periods[i] < prof.threshold_period || sol.periods[i] == 0.0;
            sol.e2e_bound += x[k];
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
        sol.cost.compute_cost += periodic_compute_cost(profiles[i], spec.functions[i], sol.periods[i]);
        sol.cost.queue_cost += queue_cost(spec.functions[i], sol.qmax[i]);
    }
    sol.cost.total = sol.cost.compute_cost + sol.cost.queue_cost;
    return sol;
}

} // namespace chainopt
