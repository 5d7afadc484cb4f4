#include "chainopt/chain.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace chainopt {

namespace {

// Ratios this close to an integer are treated as exact multiples, so that
// rounding noise in r/s cannot produce a residual rate of almost one.
constexpr double kIntegerSnap = 1e-9;

} // namespace

void validate(const ChainSpec& spec)
{
    if (!(spec.input_rate > 0.0))
        throw std::invalid_argument("input_rate must be > 0");
    if (!(spec.e2e_deadline > 0.0))
        throw std::invalid_argument("e2e_deadline must be > 0");
    if (spec.functions.empty())
        throw std::invalid_argument("functions must be non-empty");
    for (std::size_t i = 0; i < spec.functions.size(); ++i) {
        const FunctionSpec& f = spec.functions[i];
        const std::string at = " (function " + std::to_string(i) + ")";
        if (!(f.nominal_speed > 0.0))
            throw std::invalid_argument("nominal_speed must be > 0" + at);
        if (f.compute_cost_rate < 0.0)
            throw std::invalid_argument("compute_cost must be >= 0" + at);
        if (f.queue_cost_rate < 0.0)
            throw std::invalid_argument("queue_cost must be >= 0" + at);
        if (f.switch_delay < 0.0)
            throw std::invalid_argument("switch_delay must be >= 0" + at);
    }
}

FunctionProfile derive_profile(const ChainSpec& spec, std::size_t index)
{
    const FunctionSpec& fn = spec.functions.at(index);
    const double ratio = spec.input_rate / fn.nominal_speed;
    const double nearest = std::round(ratio);

    FunctionProfile p;
    if (std::abs(ratio - nearest) <= kIntegerSnap) {
        p.always_on_machines = static_cast<int>(nearest);
        p.residual_rate = 0.0;
    } else {
        p.always_on_machines = static_cast<int>(std::floor(ratio));
        p.residual_rate = ratio - p.always_on_machines;
    }
    p.threshold_period = fn.switch_delay / (1.0 - p.residual_rate);
    p.lb_cost_share = fn.compute_cost_rate * ratio;
    return p;
}

std::vector<FunctionProfile> derive_profiles(const ChainSpec& spec)
{
    std::vector<FunctionProfile> out;
    out.reserve(spec.size());
    for (std::size_t i = 0; i < spec.size(); ++i)
        out.push_back(derive_profile(spec, i));
    return out;
}

double lower_bound_cost(const ChainSpec& spec)
{
    double sum = 0.0;
    for (const FunctionSpec& f : spec.functions)
        sum += f.compute_cost_rate * spec.input_rate / f.nominal_speed;
    return sum;
}

double periodic_compute_cost(const FunctionProfile& profile, const FunctionSpec& fn, double period)
{
    if (period < 0.0)
        throw std::invalid_argument("period must be >= 0");
    if (profile.residual_rate == 0.0)
        return fn.compute_cost_rate * profile.always_on_machines;
    if (period == 0.0 || period < profile.threshold_period)
        return fn.compute_cost_rate * (profile.always_on_machines + 1);
    return fn.compute_cost_rate
        * (profile.always_on_machines + profile.residual_rate + fn.switch_delay / period);
}

double queue_cost(const FunctionSpec& fn, double qmax)
{
    if (qmax < 0.0)
        throw std::invalid_argument("qmax must be >= 0");
    return fn.queue_cost_rate * qmax;
}

} // namespace chainopt
