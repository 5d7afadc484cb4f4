#pragma once

#include <cstddef>
#include <vector>

namespace chainopt {

// One processing stage of the service chain. Costs are rates: compute cost
// accrues per second per running machine (including the switch overhead),
// queue cost per second per reserved request slot.
struct FunctionSpec {
    double nominal_speed = 0.0;     // requests/second served by one machine
    double compute_cost_rate = 0.0; // cost/second per machine
    double queue_cost_rate = 0.0;   // cost/second per request slot
    double switch_delay = 0.0;      // seconds of paid overhead per off->on cycle (on+off combined)
};

// Problem input: a constant-rate flow traversing an ordered list of functions
// under an end-to-end deadline.
struct ChainSpec {
    double input_rate = 0.0;   // requests/second entering the chain
    double e2e_deadline = 0.0; // seconds a request may spend in the whole chain
    std::vector<FunctionSpec> functions;

    std::size_t size() const { return functions.size(); }
};

// Throws std::invalid_argument naming the offending field.
void validate(const ChainSpec& spec);

// Per-function quantities derived from the input rate.
struct FunctionProfile {
    int always_on_machines = 0;    // machines that must never be switched off
    double residual_rate = 0.0;    // fraction of one extra machine needed, in [0,1)
    double threshold_period = 0.0; // below this period the extra machine cannot be cycled off and on
    double lb_cost_share = 0.0;    // this function's share of the fractional-machine cost floor
};

struct CostBreakdown {
    double compute_cost = 0.0;
    double queue_cost = 0.0;
    double lower_bound = 0.0;
    double total = 0.0; // compute_cost + queue_cost
};

FunctionProfile derive_profile(const ChainSpec& spec, std::size_t index);
std::vector<FunctionProfile> derive_profiles(const ChainSpec& spec);

// Cost floor: every function running exactly the fractional machine count
// that matches the input rate, with no queues and no switching.
double lower_bound_cost(const ChainSpec& spec);

// Average compute cost per second of cycling the extra machine with the given
// period. Below the threshold period (and at period zero) the extra machine is
// kept on permanently. A function with no residual work never runs it.
double periodic_compute_cost(const FunctionProfile& profile, const FunctionSpec& fn, double period);

// Reservation cost of a queue able to hold qmax requests.
double queue_cost(const FunctionSpec& fn, double qmax);

} // namespace chainopt
