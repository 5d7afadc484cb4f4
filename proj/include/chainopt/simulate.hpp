#pragma once

#include <stdexcept>
#include <vector>

#include "chainopt/chain.hpp"
#include "chainopt/schedule.hpp"

namespace chainopt {

struct SimulationConfig {
    double horizon_periods = 10.0;     // in multiples of the longest period
    double horizon_seconds = 0.0;      // overrides horizon_periods when > 0
    double measure_skip_periods = 1.0; // transient periods excluded from measurements
    std::vector<double> initial_queues; // empty means all zero
    std::vector<DisturbanceEvent> disturbances;
};

// Raised when a queue exceeds a million times its analytic bound.
struct SimulationDivergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Piecewise record of the fluid system. Rates are constant between
// breakpoints, queues and cumulative curves linear, so breakpoint values
// describe the trajectory exactly and carry every extremum.
struct SimulationTrace {
    double input_rate = 0.0;
    SwitchingPlan plan;
    double horizon = 0.0;
    double measure_start = 0.0;

    std::vector<double> times;
    std::vector<std::vector<double>> queue;      // [stage][k], value at times[k]
    std::vector<std::vector<int>> machines;      // [stage][k], constant on [times[k], times[k+1])
    std::vector<std::vector<double>> service;    // [stage][k], rate on the same segment
    std::vector<std::vector<double>> served_cum; // [stage][k], cumulative served at times[k]
    std::vector<double> input_cum;               // cumulative arrivals at times[k]

    // Measured over [measure_start, horizon].
    std::vector<double> max_queue;
    double max_delay = 0.0;
    CostBreakdown avg_cost;
};

SimulationTrace simulate(const ChainSpec& spec, const SwitchingPlan& plan,
                         const SimulationConfig& config);

// Worst request delay in the measurement window. Valid because the input is a
// constant-rate flow: the request leaving at t entered at served(t) / rate.
double measure_e2e_delay(const SimulationTrace& trace);

// Average cost over whole periods inside the measurement window. Queue space
// is charged at the reserved capacity: reservations cost money whether the
// queue fills or not.
CostBreakdown measure_cost(const SimulationTrace& trace, const ChainSpec& spec);

} // namespace chainopt
