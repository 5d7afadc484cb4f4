#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "chainopt/chain.hpp"

namespace chainopt {

// Relative capacity ordering of a function and its predecessor. The digit
// compares base capacities (extra machines off), the letter compares boosted
// capacities (extra machines on):
//   1x:  m_i*s_i >= m_{i-1}*s_{i-1}     2x: otherwise
//   xa:  (m_i+1)*s_i >= (m_{i-1}+1)*s_{i-1}     xb: otherwise
// The ordering decides where queue i grows and shrinks, and with it the
// optimal switching offsets and the worst-case queue and delay coefficients.
enum class PairCase { c1a, c1b, c2a, c2b };

const char* to_string(PairCase c);

// Stage 0 is paired with a virtual input stage of speed equal to the input
// rate that never switches.
PairCase classify(const ChainSpec& spec, std::size_t i);

// Worst-case queue coefficient: the max queue at stage i is alpha_i * T.
double alpha_coefficient(const ChainSpec& spec, std::size_t i);

// Added-delay coefficient: stage i contributes delta_i * T to the worst-case
// end-to-end delay.
double delta_coefficient(const ChainSpec& spec, std::size_t i);

// Average cost per second of running the whole chain at common period T,
// with the chain-dependent pieces precomputed once. Stages whose threshold
// exceeds T pay for a permanently-on extra machine.
class PeriodCostCurve {
public:
    explicit PeriodCostCurve(const ChainSpec& spec);
    double operator()(double T) const;

    double queue_rate() const { return queue_rate_; }     // slope of the T-proportional term
    double floor_cost() const { return floor_cost_; }     // cost lower bound

private:
    struct Stage {
        double threshold = 0.0;
        double switch_cost = 0.0; // compute cost rate * switch delay
        double pinned_cost = 0.0; // compute cost rate * (1 - residual)
    };
    std::vector<Stage> stages_; // cycling stages only
    double queue_rate_ = 0.0;
    double floor_cost_ = 0.0;
};

// One-shot convenience wrapper around PeriodCostCurve.
double cost_of_period(const ChainSpec& spec, double T);

// A fully evaluated common-period design.
struct PeriodDesign {
    double period = 0.0;
    std::vector<double> alpha;
    std::vector<double> delta;
    double deadline_cap = 0.0; // largest period honoring the deadline; +inf when no stage adds delay
    std::vector<std::pair<double, double>> candidates; // (T, J(T)) pairs examined by optimize()
    std::vector<double> stationary_points; // zero-derivative periods per smooth piece, kept or not
    std::vector<double> qmax;                          // alpha_i * period
    double e2e_bound = 0.0;                            // period * sum(delta)
    CostBreakdown cost;
    std::vector<double> onset_offsets; // on-instant of stage i relative to stage i-1
};

// Evaluates bounds, offsets and cost for a caller-chosen period.
PeriodDesign design_for_period(const ChainSpec& spec, double T);

// Picks the cost-optimal common period by inspecting the kink points of the
// cost curve and the interior stationary point of each smooth piece.
PeriodDesign optimize(const ChainSpec& spec);

} // namespace chainopt
