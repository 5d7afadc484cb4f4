#pragma once

#include <cstddef>
#include <vector>

#include "chainopt/chain.hpp"

namespace chainopt {

struct LinearSolution;
struct PeriodDesign;

enum class PlanMethod { linear, common_period };
const char* to_string(PlanMethod m);

// Executable switching schedule of one function: the extra machine is on
// while the phase (t - onset) mod period falls inside [0, on_duration).
struct FunctionSchedule {
    double period = 0.0;
    double on_duration = 0.0;
    double onset = 0.0;     // absolute on-instant, normalized into [0, period)
    bool always_on = false; // extra machine pinned on (period below threshold), or never needed (rho = 0)
    int base_machines = 0;
    double nominal_speed = 0.0;
    double residual_rate = 0.0;
    double qmax = 0.0;      // reserved queue capacity, what the queue cost is charged on
    double sim_bound = 0.0; // bound the coupled chain simulation must respect
};

struct SwitchingPlan {
    PlanMethod method = PlanMethod::common_period;
    std::vector<FunctionSchedule> functions;
    double e2e_bound = 0.0;
    CostBreakdown cost;

    double off_instant(std::size_t i) const
    {
        return functions[i].onset + functions[i].on_duration;
    }
};

// An impulse of extra requests landing in one queue.
struct DisturbanceEvent {
    std::size_t function_index = 0;
    double time = 0.0;
    double mass = 0.0;
};

// How a schedule absorbs an impulse: one prolonged on-stretch starting at the
// next scheduled on-instant, then back to the normal grid.
struct DisturbanceResponse {
    double extended_on = 0.0;  // on-duration of the recovery stretch
    int recovery_periods = 0;  // periods from the stretch start until the schedule is normal again
    double enlarged_qmax = 0.0;
};

// On-instant of every stage relative to its predecessor for a common period T,
// chosen so that each queue peaks exactly at its analytic bound and no higher.
std::vector<double> onset_offsets(const ChainSpec& spec, double T);

SwitchingPlan build(const ChainSpec& spec, const LinearSolution& sol);
SwitchingPlan build(const ChainSpec& spec, const PeriodDesign& design);

// Throws std::invalid_argument if the function never switches (no off-time to
// recover in).
DisturbanceResponse disturbance_response(const SwitchingPlan& plan, const DisturbanceEvent& event);

} // namespace chainopt
