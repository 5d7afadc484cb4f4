#pragma once

#include <cstddef>
#include <vector>

#include "chainopt/chain.hpp"

namespace chainopt {

// The per-stage delay trade-off after substituting the worst local delay x_i
// for the period: minimize sum(a_i x_i + b_i / x_i) subject to sum(x_i) <= c
// over the stages that actually cycle a machine.
struct LinearSubproblem {
    std::vector<double> a; // queue cost per unit of local delay
    std::vector<double> b; // switching-overhead weight
    double c = 0.0;        // end-to-end delay budget
    std::vector<std::size_t> active; // original indices of stages with residual work
};

struct LinearSolution {
    std::vector<double> x;       // worst local delay per stage (0 for idle stages)
    double lambda = 0.0;         // budget multiplier, 0 when the budget is slack
    std::vector<double> periods; // recovered switching period per stage (0 when degenerate/idle)
    std::vector<double> qmax;    // reserved queue per stage
    std::vector<bool> always_on; // period fell below the cycling threshold, or stage is idle
    bool constrained = false;
    bool degenerate = false;     // some cycling stage has zero switching cost
    double e2e_bound = 0.0;      // sum of x
    CostBreakdown cost;
};

// Throws std::invalid_argument when a cycling stage has zero queue cost (the
// trade-off is unbounded then) or when no stage cycles at all.
LinearSubproblem build_subproblem(const ChainSpec& spec, const std::vector<FunctionProfile>& profiles);

// x_i = sqrt(b_i / a_i), valid while the budget is slack.
std::vector<double> solve_unconstrained(const LinearSubproblem& p);

// The positive multiplier making sum(sqrt(b_i / (a_i + lambda))) hit the
// budget exactly. Requires the unconstrained solution to overshoot it.
double solve_lambda(const LinearSubproblem& p);

// Full pipeline: subproblem, unconstrained attempt, multiplier fallback,
// period and queue recovery, threshold correction, cost assembly.
LinearSolution solve(const ChainSpec& spec);

} // namespace chainopt
