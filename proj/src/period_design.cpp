#include "chainopt/period_design.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "chainopt/schedule.hpp"

namespace chainopt {

namespace {

struct Stage {
    double speed = 0.0;
    double rho = 0.0;
    int base_machines = 0;
};

// Stage i-1 seen from stage i; the chain input acts as a stage of speed r
// with one machine that never cycles.
Stage upstream_of(const ChainSpec& spec, std::size_t i)
{
    if (i == 0)
        return {spec.input_rate, 0.0, 1};
    const FunctionProfile p = derive_profile(spec, i - 1);
    return {spec.functions[i - 1].nominal_speed, p.residual_rate, p.always_on_machines};
}

Stage stage_at(const ChainSpec& spec, std::size_t i)
{
    const FunctionProfile p = derive_profile(spec, i);
    return {spec.functions[i].nominal_speed, p.residual_rate, p.always_on_machines};
}

} // namespace

const char* to_string(PairCase c)
{
    switch (c) {
    case PairCase::c1a: return "1a";
    case PairCase::c1b: return "1b";
    case PairCase::c2a: return "2a";
    case PairCase::c2b: return "2b";
    }
    return "?";
}

PairCase classify(const ChainSpec& spec, std::size_t i)
{
    const Stage dn = stage_at(spec, i);
    const Stage up = upstream_of(spec, i);
    const bool one = dn.base_machines * dn.speed >= up.base_machines * up.speed;
    const bool a = (dn.base_machines + 1) * dn.speed >= (up.base_machines + 1) * up.speed;
    if (one)
        return a ? PairCase::c1a : PairCase::c1b;
    return a ? PairCase::c2a : PairCase::c2b;
}

double alpha_coefficient(const ChainSpec& spec, std::size_t i)
{
    const Stage dn = stage_at(spec, i);
    const Stage up = upstream_of(spec, i);
    const double s = dn.speed, rho = dn.rho;
    const double su = up.speed, rhou = up.rho;
    // One candidate per growth phase the four cases admit; the inapplicable
    // ones are non-positive for the pair's actual case.
    const double grow_own_on = rho * (s * (1.0 - rho) - su * (1.0 - rhou));
    const double grow_up_off = (1.0 - rhou) * (su * rhou - s * rho);
    const double grow_up_on = rhou * (su * (1.0 - rhou) - s * (1.0 - rho));
    const double grow_own_off = (1.0 - rho) * (s * rho - su * rhou);
    return std::max({grow_own_on, grow_up_off, grow_up_on, grow_own_off});
}

double delta_coefficient(const ChainSpec& spec, std::size_t i)
{
    const Stage dn = stage_at(spec, i);
    const Stage up = upstream_of(spec, i);
    const double s = dn.speed, rho = dn.rho;
    const double su = up.speed, rhou = up.rho;
    const double r = spec.input_rate;
    switch (classify(spec, i)) {
    case PairCase::c1a:
        return s * rho * rho * (s * (1.0 - rho) - su * (1.0 - rhou))
            / (su * (1.0 - rhou) + s * rho) / r;
    case PairCase::c1b:
        return 0.0;
    case PairCase::c2a:
        if (rho >= rhou) // equivalent to T_i_on >= T_{i-1}_on
            return (su * rhou * (rhou - rho) + (1.0 - rho) * (s * rho - su * rhou)) / r;
        return (rho * (s * (1.0 - rho) - su * (1.0 - rhou))
                + su * (rhou - 1.0) * (rhou - rho)) / r;
    case PairCase::c2b:
        return s * (1.0 - rho) * (1.0 - rho) * (s * rho - su * rhou)
            / (s * (1.0 - rho) + su * rhou) / r;
    }
    return 0.0;
}

PeriodCostCurve::PeriodCostCurve(const ChainSpec& spec)
{
    floor_cost_ = lower_bound_cost(spec);
    for (std::size_t i = 0; i < spec.size(); ++i) {
        const FunctionSpec& fn = spec.functions[i];
        const FunctionProfile p = derive_profile(spec, i);
        queue_rate_ += fn.queue_cost_rate * alpha_coefficient(spec, i);
        if (p.residual_rate == 0.0)
            continue; // no extra machine, contributes only its floor share
        stages_.push_back({p.threshold_period,
                           fn.compute_cost_rate * fn.switch_delay,
                           fn.compute_cost_rate * (1.0 - p.residual_rate)});
    }
}

double PeriodCostCurve::operator()(double T) const
{
    if (T < 0.0)
        throw std::invalid_argument("period must be >= 0");
    double cost = floor_cost_ + queue_rate_ * T;
    for (const Stage& s : stages_) {
        if (T < s.threshold || T == 0.0)
            cost += s.pinned_cost;
        else
            cost += s.switch_cost / T;
    }
    return cost;
}

double cost_of_period(const ChainSpec& spec, double T)
{
    return PeriodCostCurve(spec)(T);
}

PeriodDesign design_for_period(const ChainSpec& spec, double T)
{
    validate(spec);
    PeriodDesign d;
    d.period = T;
    double delta_sum = 0.0;
    for (std::size_t i = 0; i < spec.size(); ++i) {
        d.alpha.push_back(alpha_coefficient(spec, i));
        d.delta.push_back(delta_coefficient(spec, i));
        delta_sum += d.delta.back();
        d.qmax.push_back(d.alpha.back() * T);
    }
    d.deadline_cap = delta_sum > 0.0 ? spec.e2e_deadline / delta_sum
                                     : std::numeric_limits<double>::infinity();
    d.e2e_bound = T * delta_sum;
    d.onset_offsets = onset_offsets(spec, T);
    const double total = cost_of_period(spec, T);
    double queue_rate = 0.0;
    for (std::size_t i = 0; i < spec.size(); ++i)
        queue_rate += spec.functions[i].queue_cost_rate * d.alpha[i];
    d.cost.queue_cost = queue_rate * T;
    d.cost.compute_cost = total - d.cost.queue_cost;
    d.cost.lower_bound = lower_bound_cost(spec);
    d.cost.total = total;
    return d;
}

PeriodDesign optimize(const ChainSpec& spec)
{
    validate(spec);
    const std::size_t n = spec.size();
    std::vector<FunctionProfile> profiles = derive_profiles(spec);
    const PeriodCostCurve J(spec);
    const double queue_rate = J.queue_rate();

    double delta_sum = 0.0;
    bool any_switching = false;
    for (std::size_t i = 0; i < n; ++i) {
        delta_sum += delta_coefficient(spec, i);
        any_switching |= profiles[i].residual_rate > 0.0;
    }

    if (!any_switching) {
        // Input is an exact machine multiple everywhere: nothing cycles and
        // the floor cost is attained outright.
        PeriodDesign d = design_for_period(spec, 0.0);
        d.candidates = {{0.0, d.cost.total}};
        return d;
    }

    double cap;
    if (delta_sum > 0.0) {
        cap = spec.e2e_deadline / delta_sum;
    } else {
        // Unreachable for chains with residual work (the first cycling stage
        // always adds delay), kept as a guard for robustness.
        double tbar_max = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (profiles[i].residual_rate > 0.0)
                tbar_max = std::max(tbar_max, profiles[i].threshold_period);
        cap = queue_rate > 0.0 ? 10.0 * std::max(tbar_max, spec.e2e_deadline)
                               : 10.0 * tbar_max;
    }

    // Kink points of the cost curve: thresholds inside [0, cap] plus the ends.
    std::vector<double> kinks = {0.0, cap};
    for (std::size_t i = 0; i < n; ++i)
        if (profiles[i].residual_rate > 0.0 && profiles[i].threshold_period < cap)
            kinks.push_back(profiles[i].threshold_period);
    std::sort(kinks.begin(), kinks.end());
    kinks.erase(std::unique(kinks.begin(), kinks.end()), kinks.end());

    std::vector<double> candidates = kinks;
    std::vector<double> stationary_points;
    // Interior stationary point of each smooth piece: on (c_k, c_{k+1}) the
    // stages already past their threshold contribute switch cost / T.
    if (queue_rate > 0.0) {
        for (std::size_t k = 0; k + 1 < kinks.size(); ++k) {
            double switch_weight = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                if (profiles[i].residual_rate > 0.0
                    && profiles[i].threshold_period < kinks[k + 1])
                    switch_weight += spec.functions[i].compute_cost_rate
                        * spec.functions[i].switch_delay;
            if (switch_weight <= 0.0)
                continue;
            const double stationary = std::sqrt(switch_weight / queue_rate);
            stationary_points.push_back(stationary);
            if (stationary > kinks[k] && stationary < kinks[k + 1])
                candidates.push_back(stationary);
        }
    }
    std::sort(candidates.begin(), candidates.end());

    double best_T = candidates.front();
    double best_J = J(best_T);
    std::vector<std::pair<double, double>> evaluated;
    evaluated.reserve(candidates.size());
    for (double T : candidates) {
        const double cost = J(T);
        evaluated.emplace_back(T, cost);
        if (cost < best_J) { // ties keep the earlier (smaller) period
            best_J = cost;
            best_T = T;
        }
    }

    PeriodDesign d = design_for_period(spec, best_T);
    d.candidates = std::move(evaluated);
    d.stationary_points = std::move(stationary_points);
    return d;
}

} // namespace chainopt
