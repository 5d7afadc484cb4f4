#include <doctest.h>

#include <cmath>
#include <random>

#include "chainopt/linear_design.hpp"
#include "chainopt/period_design.hpp"
#include "chainopt/schedule.hpp"
#include "chainopt/simulate.hpp"
#include "test_support.hpp"

using namespace chainopt;
using testsupport::queue_at;

namespace {

SwitchingPlan reference_plan(const ChainSpec& spec)
{
    return build(spec, optimize(spec));
}

} // namespace

TEST_CASE("common-period plan meets its bounds exactly")
{
    const ChainSpec spec = testsupport::reference_chain();
    const PeriodDesign d = optimize(spec);
    const SwitchingPlan plan = build(spec, d);

    SimulationConfig config;
    config.horizon_periods = 11;
    const SimulationTrace tr = simulate(spec, plan, config);

    CHECK(tr.max_queue[0] == doctest::Approx(d.qmax[0]).epsilon(1e-6));
    CHECK(tr.max_queue[1] == doctest::Approx(d.qmax[1]).epsilon(1e-6));
    CHECK(tr.max_delay == doctest::Approx(spec.e2e_deadline).epsilon(1e-6));
    CHECK(tr.avg_cost.total == doctest::Approx(d.cost.total).epsilon(1e-9));
    CHECK(tr.avg_cost.compute_cost == doctest::Approx(d.cost.compute_cost).epsilon(1e-9));
}

TEST_CASE("simulated trajectory matches the hand-integrated orbit")
{
    // Closed orbit of the reference plan, integrated by hand over one period
    // starting at t = T (all segments have constant slopes):
    //   queue 1: rises at 5 on [0, T/6], falls at 1 on [T/6, T]
    //   queue 2: falls at 4 from 2T/3, is 0 at T/6, rises at 2 to 3T/4 at
    //            13T/24, falls at 6 to 0 at 2T/3, rises at 2 to 2T/3 at T
    const ChainSpec spec = testsupport::reference_chain();
    const SwitchingPlan plan = reference_plan(spec);
    const double T = plan.functions[0].period;

    SimulationConfig config;
    config.horizon_periods = 3;
    const SimulationTrace tr = simulate(spec, plan, config);

    const struct {
        double u;  // offset into the period
        double q1; // expected queue 1
        double q2; // expected queue 2
    } samples[] = {
        {T / 12.0, 5.0 * T / 12.0, T / 3.0},
        {T / 6.0, 5.0 * T / 6.0, 0.0},
        {T / 3.0, 2.0 * T / 3.0, T / 3.0},
        {13.0 * T / 24.0, 11.0 * T / 24.0, 0.75 * T},
        {2.0 * T / 3.0, T / 3.0, 0.0},
        {5.0 * T / 6.0, T / 6.0, T / 3.0},
        {T, 0.0, 2.0 * T / 3.0},
    };
    for (const auto& s : samples) {
        CHECK(queue_at(tr, 0, T + s.u) == doctest::Approx(s.q1).epsilon(1e-9));
        CHECK(queue_at(tr, 1, T + s.u) == doctest::Approx(s.q2).epsilon(1e-9));
    }
}

TEST_CASE("an overprovisioned chain never queues")
{
    const ChainSpec spec = testsupport::reference_chain();
    SwitchingPlan plan = reference_plan(spec);
    for (FunctionSchedule& f : plan.functions)
        f.always_on = true; // pin every extra machine on

    SimulationConfig config;
    config.horizon_seconds = 1.0;
    const SimulationTrace tr = simulate(spec, plan, config);
    CHECK(tr.max_queue[0] == 0.0);
    CHECK(tr.max_queue[1] == 0.0);
    CHECK(tr.max_delay == doctest::Approx(0.0));
    // Three machines run at each stage, no switching overhead, no queues.
    CHECK(tr.avg_cost.compute_cost == doctest::Approx(42.0).epsilon(1e-12));
}

TEST_CASE("a known speed pairing peaks at ninety requests")
{
    ChainSpec spec;
    spec.input_rate = 17.0;
    spec.e2e_deadline = 1e9;
    spec.functions = {{6.0, 1.0, 1.0, 0.01}, {8.0, 1.0, 1.0, 0.01}};
    const PeriodDesign d = design_for_period(spec, 120.0);
    const SwitchingPlan plan = build(spec, d);
    CHECK(plan.functions[1].on_duration == doctest::Approx(15.0).epsilon(1e-12));

    SimulationConfig config;
    config.horizon_periods = 8;
    const SimulationTrace tr = simulate(spec, plan, config);
    CHECK(tr.max_queue[1] == doctest::Approx(90.0).epsilon(1e-9));
}

TEST_CASE("trace invariants hold at every breakpoint")
{
    std::mt19937_64 rng(555);
    for (int trial = 0; trial < 10; ++trial) {
        const ChainSpec spec = testsupport::random_chain(rng, 2, 4);
        const double T = testsupport::largest_threshold(spec) * 2.5;
        const SwitchingPlan plan = build(spec, design_for_period(spec, T));

        SimulationConfig config;
        config.horizon_periods = 6;
        const SimulationTrace tr = simulate(spec, plan, config);
        const std::size_t n = spec.size();

        for (std::size_t k = 0; k < tr.times.size(); ++k) {
            double total_queue = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double q = tr.queue[i][k];
                CHECK(q >= -1e-9);
                total_queue += q;
                // Queue equals upstream arrivals minus own departures.
                const double upstream =
                    i == 0 ? tr.input_cum[k] : tr.served_cum[i - 1][k];
                CHECK(q == doctest::Approx(upstream - tr.served_cum[i][k])
                               .epsilon(1e-9).scale(1.0));
                // Service never exceeds the present machine capacity.
                CHECK(tr.service[i][k]
                      <= tr.machines[i][k] * spec.functions[i].nominal_speed + 1e-9);
                if (k > 0)
                    CHECK(tr.served_cum[i][k] >= tr.served_cum[i][k - 1] - 1e-12);
            }
            CHECK(total_queue == doctest::Approx(tr.input_cum[k]
                                                 - tr.served_cum[n - 1][k])
                                     .epsilon(1e-9).scale(1.0));
        }
    }
}

TEST_CASE("per-stage-period plans stay within the accumulated bounds")
{
    const ChainSpec spec = testsupport::reference_chain();
    const LinearSolution sol = solve(spec);
    const SwitchingPlan plan = build(spec, sol);

    SimulationConfig config;
    config.horizon_periods = 40;
    const SimulationTrace tr = simulate(spec, plan, config);

    // The first stage sees the raw constant input, so its reservation is
    // exact; the second one absorbs the upstream burst on top of its own.
    CHECK(tr.max_queue[0] == doctest::Approx(sol.qmax[0]).epsilon(1e-6));
    CHECK(tr.max_queue[1] > sol.qmax[1]);
    CHECK(tr.max_queue[1] <= plan.functions[1].sim_bound * (1.0 + 1e-9));
    CHECK(tr.max_delay <= sol.e2e_bound * (1.0 + 1e-9));

    // Queue space is charged on the reservation, so the measured average
    // matches the designed cost even though the coupled queue runs higher.
    CHECK(std::abs(tr.avg_cost.total - 34.871) <= 1e-3);
    double compute = 0.0;
    for (std::size_t i = 0; i < spec.size(); ++i)
        compute += periodic_compute_cost(derive_profile(spec, i), spec.functions[i],
                                         sol.periods[i]);
    CHECK(tr.avg_cost.compute_cost == doctest::Approx(compute).epsilon(1e-9));
}

TEST_CASE("disturbances respect the enlarged bound and rejoin the orbit")
{
    const ChainSpec spec = testsupport::reference_chain();
    const SwitchingPlan plan = reference_plan(spec);
    const double T = plan.functions[0].period;
    const DisturbanceEvent ev{0, 2.5 * T, 0.4};

    SimulationConfig nominal;
    nominal.horizon_periods = 12;
    const SimulationTrace base = simulate(spec, plan, nominal);

    SimulationConfig disturbed = nominal;
    disturbed.disturbances = {ev};
    const SimulationTrace tr = simulate(spec, plan, disturbed);

    const DisturbanceResponse resp = disturbance_response(plan, ev);
    CHECK(tr.max_queue[0] <= resp.enlarged_qmax + 1e-9);

    // The prolonged on-stretch begins at the next scheduled on-instant and
    // the queue is back on the nominal orbit one full grid later.
    const FunctionSchedule& f = plan.functions[0];
    const double j = std::ceil((ev.time - f.onset) / T - 1e-12);
    const double rejoin = f.onset + j * T + resp.recovery_periods * T;
    for (int k = 0; k <= 50; ++k) {
        const double t = rejoin + (base.horizon - rejoin) * k / 50.0;
        CHECK(std::abs(queue_at(tr, 0, t) - queue_at(base, 0, t)) < 1e-9);
    }
}

TEST_CASE("disturbing a stage that never switches is rejected")
{
    ChainSpec spec;
    spec.input_rate = 10.0;
    spec.e2e_deadline = 0.5;
    spec.functions = {{5.0, 3.0, 1.0, 0.01}};
    const SwitchingPlan plan = build(spec, optimize(spec));
    SimulationConfig config;
    config.horizon_seconds = 1.0;
    config.disturbances = {{0, 0.5, 1.0}};
    CHECK_THROWS_AS(simulate(spec, plan, config), std::invalid_argument);
}

TEST_CASE("runaway queues raise the divergence flag")
{
    ChainSpec spec = testsupport::reference_chain();
    SwitchingPlan plan = reference_plan(spec);
    // Break the first schedule: an on-duration of zero starves the stage.
    plan.functions[0].on_duration = 0.0;
    plan.functions[0].sim_bound = 1e-3;

    SimulationConfig config;
    config.horizon_seconds = 1e4;
    CHECK_THROWS_AS(simulate(spec, plan, config), SimulationDivergence);
}

TEST_CASE("initial queues shift the conservation balance")
{
    const ChainSpec spec = testsupport::reference_chain();
    const SwitchingPlan plan = reference_plan(spec);
    SimulationConfig config;
    config.horizon_periods = 4;
    config.initial_queues = {0.3, 0.1};
    const SimulationTrace tr = simulate(spec, plan, config);
    const std::size_t last = tr.times.size() - 1;
    const double total = tr.queue[0][last] + tr.queue[1][last];
    CHECK(total == doctest::Approx(0.4 + tr.input_cum[last]
                                   - tr.served_cum[1][last]).epsilon(1e-9).scale(1.0));
}

TEST_CASE("delay measurement needs at least the measurement window")
{
    const ChainSpec spec = testsupport::reference_chain();
    const SwitchingPlan plan = reference_plan(spec);
    SimulationConfig config;
    config.horizon_periods = 5;
    const SimulationTrace tr = simulate(spec, plan, config);
    CHECK(measure_e2e_delay(tr) == doctest::Approx(tr.max_delay));
    CHECK(measure_cost(tr, spec).total == doctest::Approx(tr.avg_cost.total));

    // A one-period horizon still measures something: the skip collapses.
    SimulationConfig one;
    one.horizon_periods = 1;
    const SimulationTrace tr1 = simulate(spec, plan, one);
    CHECK(tr1.measure_start == 0.0);
    CHECK(tr1.max_queue[0] > 0.0);
}

TEST_CASE("an exact-multiple stage mid-chain still matches its bounds")
{
    // Stage 2 runs two machines that exactly cover the input rate; it never
    // cycles, yet it queues the upstream bursts. Bounds stay tight.
    ChainSpec spec;
    spec.input_rate = 17.0;
    spec.e2e_deadline = 1.0;
    spec.functions = {{6.0, 6.0, 0.5, 0.01}, {8.5, 1.0, 0.5, 0.01}, {8.0, 8.0, 0.5, 0.01}};
    REQUIRE(derive_profile(spec, 1).residual_rate == 0.0);

    const double T = 0.25;
    const PeriodDesign d = design_for_period(spec, T);
    const SwitchingPlan plan = build(spec, d);
    CHECK(plan.functions[1].always_on);
    CHECK(d.delta[1] == 0.0); // it adds queueing but no extra delay

    SimulationConfig config;
    config.horizon_periods = 9;
    config.measure_skip_periods = 3;
    const SimulationTrace tr = simulate(spec, plan, config);
    for (std::size_t i = 0; i < spec.size(); ++i)
        CHECK(tr.max_queue[i] == doctest::Approx(d.qmax[i]).epsilon(1e-6));
    CHECK(tr.max_delay == doctest::Approx(d.e2e_bound).epsilon(1e-6));
}

TEST_CASE("a pinned stage downgrades downstream bounds to burst accumulation")
{
    // Heavy queue cost pushes the optimal period below stage 1's threshold:
    // stage 1 pins its extra machine on and stops shaping the flow. The
    // tight pair bound then no longer applies to stage 2 (its queue can
    // exceed alpha*T), but the accumulated bound still holds.
    ChainSpec spec;
    spec.input_rate = 17.0;
    spec.e2e_deadline = 0.05;
    spec.functions = {{6.0, 6.0, 20.0, 0.01}, {8.0, 8.0, 20.0, 0.01}};

    const PeriodDesign d = optimize(spec);
    CHECK(d.period < derive_profile(spec, 0).threshold_period);
    CHECK(d.period > derive_profile(spec, 1).threshold_period);

    const SwitchingPlan plan = build(spec, d);
    CHECK(plan.functions[0].always_on);
    CHECK(!plan.functions[1].always_on);
    // The pinned stage keeps its pair bound; the next one accumulates it.
    const double own2 = spec.functions[1].nominal_speed * d.period * (1.0 / 8.0) * (7.0 / 8.0);
    CHECK(plan.functions[0].sim_bound == doctest::Approx(d.qmax[0]).epsilon(1e-12));
    CHECK(plan.functions[1].sim_bound == doctest::Approx(d.qmax[0] + own2).epsilon(1e-12));
    CHECK(own2 > d.qmax[1]); // the tight pair bound would be violated below

    SimulationConfig config;
    config.horizon_periods = 12;
    config.measure_skip_periods = 4;
    const SimulationTrace tr = simulate(spec, plan, config);
    CHECK(tr.max_queue[0] == 0.0); // pinned stage is overprovisioned
    // The constant passthrough makes stage 2 behave like a first stage.
    CHECK(tr.max_queue[1] == doctest::Approx(own2).epsilon(1e-9));
    CHECK(tr.max_queue[1] > d.qmax[1]); // and indeed beat the pair bound
    CHECK(tr.max_queue[1] <= plan.functions[1].sim_bound);
}

TEST_CASE("the designed onsets are the optimal phases")
{
    // Delaying any stage's on-instant by a fraction of the period must push
    // some peak (queue or delay) strictly above the designed value.
    std::mt19937_64 rng(4096);
    for (int trial = 0; trial < 12; ++trial) {
        const ChainSpec spec = testsupport::random_chain(rng, 2, 3);
        const std::size_t n = spec.size();
        const double T = testsupport::largest_threshold(spec) * 2.5;
        const SwitchingPlan plan = build(spec, design_for_period(spec, T));

        SimulationConfig config;
        config.horizon_periods = static_cast<double>(n) + 5.0;
        config.measure_skip_periods = static_cast<double>(n);
        const SimulationTrace base = simulate(spec, plan, config);

        const std::size_t victim = trial % n;
        SwitchingPlan bumped = plan;
        bumped.functions[victim].onset =
            std::fmod(bumped.functions[victim].onset + T / 100.0, T);
        const SimulationTrace tr = simulate(spec, bumped, config);

        bool worse = tr.max_delay > base.max_delay + 1e-9;
        for (std::size_t i = 0; i < n; ++i)
            worse |= tr.max_queue[i] > base.max_queue[i] + 1e-9;
        CHECK(worse);
    }
}
