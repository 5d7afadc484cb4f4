#include "chainopt/schedule.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "chainopt/linear_design.hpp"
#include "chainopt/period_design.hpp"

namespace chainopt {

namespace {

double normalize_phase(double t, double period)
{
    if (period <= 0.0)
        return 0.0;
    double ph = std::fmod(t, period);
    if (ph < 0.0)
        ph += period;
    if (ph == period) // fmod can land exactly on the period for tiny negatives
        ph = 0.0;
    return ph;
}

// Queue bounds for the coupled simulation. While every stage upstream of and
// including stage i cycles exactly as scheduled (or never needs to), the pair
// analysis is tight and the pair bound applies. A pinned stage (extra machine
// held on) serves no worse than its schedule, so it still obeys its own pair
// bound, but it forwards bursts instead of shaping them: every stage after it
// falls back to burst accumulation, incoming burst plus the stage's own worst
// accumulation against the mean rate.
void fill_sim_bounds(SwitchingPlan& plan, const ChainSpec& spec,
                     const std::vector<double>* pair_bounds)
{
    double burst = 0.0;
    bool degraded = pair_bounds == nullptr;
    for (std::size_t i = 0; i < plan.functions.size(); ++i) {
        FunctionSchedule& f = plan.functions[i];
        const bool cycles = !f.always_on && f.residual_rate > 0.0;
        const double own = cycles
            ? spec.functions[i].nominal_speed * f.period * f.residual_rate * (1.0 - f.residual_rate)
            : 0.0;
        f.sim_bound = degraded ? burst + own : (*pair_bounds)[i];
        if (f.always_on && f.residual_rate > 0.0)
            degraded = true;
        burst = f.sim_bound;
    }
}

} // namespace

const char* to_string(PlanMethod m)
{
    return m == PlanMethod::linear ? "linear" : "common-period";
}

std::vector<double> onset_offsets(const ChainSpec& spec, double T)
{
    std::vector<double> offsets;
    offsets.reserve(spec.size());
    for (std::size_t i = 0; i < spec.size(); ++i) {
        const double s = spec.functions[i].nominal_speed;
        const double rho = derive_profile(spec, i).residual_rate;
        const double su = i == 0 ? spec.input_rate : spec.functions[i - 1].nominal_speed;
        const double rhou = i == 0 ? 0.0 : derive_profile(spec, i - 1).residual_rate;
        double off = 0.0;
        switch (classify(spec, i)) {
        case PairCase::c1a:
            // Start late enough that the queue built while only the upstream
            // extra runs is drained exactly by our own on-stretch.
            off = T * rho * (s * (1.0 - rho) - su * (1.0 - rhou))
                / (su * (1.0 - rhou) + s * rho);
            break;
        case PairCase::c1b:
            // Both extras must start together or the faster upstream floods us.
            off = 0.0;
            break;
        case PairCase::c2a:
            // Align the off-instants so the queue is empty when we stop.
            off = T * (rhou - rho);
            break;
        case PairCase::c2b: {
            // Start early enough that the backlog accumulated over our own
            // off-time is gone precisely when the upstream extra starts.
            const double q_on = T * (1.0 - rho) * (s * rho - su * rhou);
            off = -q_on / (s * (1.0 - rho) + su * rhou);
            break;
        }
        }
        offsets.push_back(off);
    }
    return offsets;
}

SwitchingPlan build(const ChainSpec& spec, const LinearSolution& sol)
{
    validate(spec);
    SwitchingPlan plan;
    plan.method = PlanMethod::linear;
    plan.e2e_bound = sol.e2e_bound;
    plan.cost = sol.cost;
    for (std::size_t i = 0; i < spec.size(); ++i) {
        const FunctionProfile p = derive_profile(spec, i);
        FunctionSchedule f;
        f.period = sol.periods[i];
        f.on_duration = f.period * p.residual_rate;
        f.onset = 0.0; // the per-stage bounds hold for any phase; zero is the simplest
        f.always_on = sol.always_on[i];
        f.base_machines = p.always_on_machines;
        f.nominal_speed = spec.functions[i].nominal_speed;
        f.residual_rate = p.residual_rate;
        f.qmax = sol.qmax[i];
        plan.functions.push_back(f);
    }
    // Per-stage periods differ, so only burst accumulation bounds the coupled
    // chain; the reserved qmax alone is provably exceeded between stages.
    fill_sim_bounds(plan, spec, nullptr);
    return plan;
}

SwitchingPlan build(const ChainSpec& spec, const PeriodDesign& design)
{
    validate(spec);
    SwitchingPlan plan;
    plan.method = PlanMethod::common_period;
    plan.e2e_bound = design.e2e_bound;
    plan.cost = design.cost;
    const double T = design.period;
    double onset = 0.0; // virtual input stage anchored at zero
    for (std::size_t i = 0; i < spec.size(); ++i) {
        const FunctionProfile p = derive_profile(spec, i);
        onset += design.onset_offsets[i];
        FunctionSchedule f;
        f.period = T;
        f.on_duration = T * p.residual_rate;
        f.onset = normalize_phase(onset, T);
        f.always_on = p.residual_rate == 0.0 || (T > 0.0 && T < p.threshold_period) || T == 0.0;
        f.base_machines = p.always_on_machines;
        f.nominal_speed = spec.functions[i].nominal_speed;
        f.residual_rate = p.residual_rate;
        f.qmax = design.qmax[i];
        plan.functions.push_back(f);
    }
    fill_sim_bounds(plan, spec, &design.qmax);
    return plan;
}

DisturbanceResponse disturbance_response(const SwitchingPlan& plan, const DisturbanceEvent& event)
{
    if (event.mass < 0.0)
        throw std::invalid_argument("disturbance mass must be >= 0");
    if (event.function_index >= plan.functions.size())
        throw std::invalid_argument("disturbance function index out of range");
    const FunctionSchedule& f = plan.functions[event.function_index];
    if (f.always_on || f.on_duration <= 0.0 || f.period <= f.on_duration)
        throw std::invalid_argument(
            "function " + std::to_string(event.function_index)
            + " has no off-time to absorb a disturbance");

    const double off_time = f.period - f.on_duration;
    // Extra machine-seconds needed; they can only be found in the stretches
    // where the extra machine would normally be off.
    const double work = event.mass / f.nominal_speed;
    const double full_periods = std::floor(work / off_time);
    const double fraction = work / off_time - full_periods;

    DisturbanceResponse r;
    r.extended_on = full_periods * f.period + f.on_duration + fraction * off_time;
    r.recovery_periods = static_cast<int>(full_periods) + 1;
    r.enlarged_qmax = f.qmax + event.mass;
    return r;
}

} // namespace chainopt
