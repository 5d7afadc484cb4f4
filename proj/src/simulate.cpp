#include "chainopt/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace chainopt {

namespace {

constexpr double kDivergenceFactor = 1e6;

struct Toggle {
    double time = 0.0;
    int machines = 0;
};

// Machine-count timeline of one stage over [0, horizon]: the starting count
// plus every later change, with disturbance-recovery stretches spliced in.
struct Timeline {
    int initial = 0;
    std::vector<Toggle> toggles;
};

struct Recovery {
    double start = 0.0;    // on-instant the prolonged stretch begins at
    double extended = 0.0; // its on-duration
    int periods = 0;       // whole periods consumed before the grid resumes
};

std::vector<Recovery> plan_recoveries(const FunctionSchedule& f,
                                      const std::vector<DisturbanceEvent>& events,
                                      double horizon)
{
    std::vector<Recovery> recs;
    double resume = -std::numeric_limits<double>::infinity();
    for (const DisturbanceEvent& ev : events) {
        const double t0 = std::max(ev.time, resume);
        const double k = std::ceil((t0 - f.onset) / f.period - 1e-12);
        double start = f.onset + k * f.period;
        if (start >= horizon)
            break;
        const double off_time = f.period - f.on_duration;
        const double work = ev.mass / f.nominal_speed;
        const double full = std::floor(work / off_time);
        const double frac = work / off_time - full;
        recs.push_back({start, full * f.period + f.on_duration + frac * off_time,
                        static_cast<int>(full) + 1});
        resume = start + recs.back().periods * f.period;
    }
    return recs;
}

Timeline build_timeline(const FunctionSchedule& f,
                        const std::vector<DisturbanceEvent>& events,
                        double horizon, double eps)
{
    Timeline tl;
    if (f.always_on || f.on_duration <= 0.0 || f.period <= 0.0) {
        tl.initial = f.base_machines + (f.always_on && f.residual_rate > 0.0 ? 1 : 0);
        return tl;
    }
    const std::vector<Recovery> recs = plan_recoveries(f, events, horizon);
    std::size_t ri = 0;

    double phase = std::fmod(-f.onset, f.period);
    if (phase < 0.0)
        phase += f.period;
    tl.initial = phase < f.on_duration - eps ? f.base_machines + 1 : f.base_machines;

    auto push = [&](double t, int m) {
        if (t > eps && t < horizon - eps)
            tl.toggles.push_back({t, m});
    };

    // Walk period starts from just before zero so a window straddling t = 0
    // still contributes its off-switch.
    double j = std::floor((0.0 - f.onset) / f.period) - 1.0;
    while (true) {
        const double on = f.onset + j * f.period;
        if (on >= horizon)
            break;
        if (ri < recs.size() && std::abs(recs[ri].start - on) <= eps) {
            push(on, f.base_machines + 1);
            push(on + recs[ri].extended, f.base_machines);
            j += recs[ri].periods;
            ++ri;
        } else {
            push(on, f.base_machines + 1);
            push(on + f.on_duration, f.base_machines);
            j += 1.0;
        }
    }
    return tl;
}

} // namespace

SimulationTrace simulate(const ChainSpec& spec, const SwitchingPlan& plan,
                         const SimulationConfig& config)
{
    validate(spec);
    const std::size_t n = spec.size();
    if (plan.functions.size() != n)
        throw std::invalid_argument("plan does not match the chain");
    if (!config.initial_queues.empty() && config.initial_queues.size() != n)
        throw std::invalid_argument("initial_queues does not match the chain");

    double scale = 0.0;
    for (const FunctionSchedule& f : plan.functions)
        if (!f.always_on)
            scale = std::max(scale, f.period);
    if (scale <= 0.0)
        scale = 1.0; // nothing switches; horizon still needs a time unit

    const double horizon = config.horizon_seconds > 0.0
        ? config.horizon_seconds
        : config.horizon_periods * scale;
    if (!(horizon > 0.0))
        throw std::invalid_argument("simulation horizon must be > 0");
    // Skip the transient unless that would leave less than one period of
    // every cycling stage to measure.
    double measure_start = config.measure_skip_periods * scale;
    if (horizon - measure_start < scale)
        measure_start = std::max(0.0, horizon - scale);
    const double eps = 1e-12 * scale;

    double qscale = 1e-9;
    for (const FunctionSchedule& f : plan.functions)
        qscale = std::max(qscale, f.sim_bound);
    const double q_eps = 1e-12 * qscale;

    double injected = 0.0;
    for (double q0 : config.initial_queues)
        injected += q0;
    for (const DisturbanceEvent& ev : config.disturbances)
        injected += ev.mass;
    // Divergence cutoff: a million times the analytic bound, with an absolute
    // floor so that stages with a zero bound tolerate injected mass.
    const double divergence_floor = 1e3 * (spec.input_rate * scale + injected);

    std::vector<std::vector<DisturbanceEvent>> per_fn(n);
    for (const DisturbanceEvent& ev : config.disturbances) {
        if (ev.function_index >= n)
            throw std::invalid_argument("disturbance function index out of range");
        if (ev.mass < 0.0 || ev.time < 0.0)
            throw std::invalid_argument("disturbance time and mass must be >= 0");
        if (plan.functions[ev.function_index].always_on)
            throw std::invalid_argument(
                "function " + std::to_string(ev.function_index)
                + " never switches; it cannot absorb a disturbance");
        per_fn[ev.function_index].push_back(ev);
    }
    for (auto& evs : per_fn)
        std::sort(evs.begin(), evs.end(),
                  [](const DisturbanceEvent& a, const DisturbanceEvent& b) { return a.time < b.time; });

    std::vector<Timeline> timelines;
    timelines.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        timelines.push_back(build_timeline(plan.functions[i], per_fn[i], horizon, eps));

    std::vector<DisturbanceEvent> pending = config.disturbances;
    std::sort(pending.begin(), pending.end(),
              [](const DisturbanceEvent& a, const DisturbanceEvent& b) { return a.time < b.time; });

    std::vector<double> forced = {measure_start, horizon};
    for (const DisturbanceEvent& ev : pending)
        forced.push_back(ev.time);
    std::sort(forced.begin(), forced.end());

    SimulationTrace tr;
    tr.input_rate = spec.input_rate;
    tr.plan = plan;
    tr.horizon = horizon;
    tr.measure_start = measure_start;
    tr.queue.assign(n, {});
    tr.machines.assign(n, {});
    tr.service.assign(n, {});
    tr.served_cum.assign(n, {});
    tr.max_queue.assign(n, 0.0);

    std::vector<double> q = config.initial_queues.empty()
        ? std::vector<double>(n, 0.0)
        : config.initial_queues;
    std::vector<double> served(n, 0.0);
    std::vector<int> m(n);
    std::vector<std::size_t> tidx(n, 0);
    for (std::size_t i = 0; i < n; ++i)
        m[i] = timelines[i].initial;

    std::size_t pi = 0;
    while (pi < pending.size() && pending[pi].time <= eps) {
        q[pending[pi].function_index] += pending[pi].mass;
        ++pi;
    }
    std::size_t fi = 0;

    double t = 0.0;
    auto record_state = [&]() {
        tr.times.push_back(t);
        tr.input_cum.push_back(spec.input_rate * t);
        for (std::size_t i = 0; i < n; ++i) {
            tr.queue[i].push_back(q[i]);
            tr.served_cum[i].push_back(served[i]);
        }
    };
    record_state();

    std::vector<double> rate(n, 0.0);
    while (t < horizon - eps) {
        double inflow = spec.input_rate;
        for (std::size_t i = 0; i < n; ++i) {
            const double cap = m[i] * spec.functions[i].nominal_speed;
            rate[i] = q[i] > q_eps ? cap : std::min(cap, inflow);
            inflow = rate[i];
        }

        double t_next = horizon;
        for (std::size_t i = 0; i < n; ++i)
            if (tidx[i] < timelines[i].toggles.size())
                t_next = std::min(t_next, timelines[i].toggles[tidx[i]].time);
        inflow = spec.input_rate;
        for (std::size_t i = 0; i < n; ++i) {
            const double dq = inflow - rate[i];
            if (q[i] > q_eps && dq < 0.0)
                t_next = std::min(t_next, t + q[i] / (-dq));
            inflow = rate[i];
        }
        while (fi < forced.size() && forced[fi] <= t + eps)
            ++fi;
        if (fi < forced.size())
            t_next = std::min(t_next, forced[fi]);
        if (pi < pending.size())
            t_next = std::min(t_next, pending[pi].time);
        if (t_next < t)
            t_next = t;

        const double dt = t_next - t;
        inflow = spec.input_rate;
        for (std::size_t i = 0; i < n; ++i) {
            q[i] += (inflow - rate[i]) * dt;
            if (q[i] < q_eps)
                q[i] = 0.0;
            served[i] += rate[i] * dt;
            inflow = rate[i];
            tr.machines[i].push_back(m[i]);
            tr.service[i].push_back(rate[i]);
        }
        t = t_next;

        for (std::size_t i = 0; i < n; ++i)
            while (tidx[i] < timelines[i].toggles.size()
                   && timelines[i].toggles[tidx[i]].time <= t + eps) {
                m[i] = timelines[i].toggles[tidx[i]].machines;
                ++tidx[i];
            }
        while (pi < pending.size() && pending[pi].time <= t + eps) {
            q[pending[pi].function_index] += pending[pi].mass;
            ++pi;
        }

        for (std::size_t i = 0; i < n; ++i)
            if (q[i] > std::max(kDivergenceFactor * plan.functions[i].sim_bound,
                                divergence_floor))
                throw SimulationDivergence(
                    "queue " + std::to_string(i) + " exceeded a million times its bound");

        record_state();
    }

    // Pad the segment arrays so every array matches times in length.
    for (std::size_t i = 0; i < n; ++i) {
        tr.machines[i].push_back(m[i]);
        tr.service[i].push_back(rate[i]);
    }

    for (std::size_t k = 0; k < tr.times.size(); ++k) {
        if (tr.times[k] < measure_start - eps)
            continue;
        for (std::size_t i = 0; i < n; ++i)
            tr.max_queue[i] = std::max(tr.max_queue[i], tr.queue[i][k]);
    }
    tr.max_delay = measure_e2e_delay(tr);
    tr.avg_cost = measure_cost(tr, spec);
    return tr;
}

double measure_e2e_delay(const SimulationTrace& trace)
{
    const std::size_t n = trace.plan.functions.size();
    if (n == 0 || trace.times.empty())
        return 0.0;
    double worst = 0.0;
    for (std::size_t k = 0; k < trace.times.size(); ++k) {
        if (trace.times[k] < trace.measure_start - 1e-15 * trace.horizon)
            continue;
        worst = std::max(worst, trace.times[k] - trace.served_cum[n - 1][k] / trace.input_rate);
    }
    return worst;
}

CostBreakdown measure_cost(const SimulationTrace& trace, const ChainSpec& spec)
{
    CostBreakdown cost;
    cost.lower_bound = lower_bound_cost(spec);
    const double w0 = trace.measure_start;
    const double w1 = trace.horizon;

    for (std::size_t i = 0; i < spec.size(); ++i) {
        const FunctionSchedule& f = trace.plan.functions[i];
        const FunctionSpec& fn = spec.functions[i];
        if (f.always_on) {
            const int machines = f.base_machines + (f.residual_rate > 0.0 ? 1 : 0);
            cost.compute_cost += fn.compute_cost_rate * machines;
        } else {
            const double whole = std::floor((w1 - w0) / f.period + 1e-9);
            if (whole < 1.0)
                throw std::invalid_argument(
                    "measurement window shorter than one period of function " + std::to_string(i));
            const double end = std::min(w1, w0 + whole * f.period);

            double machine_seconds = 0.0;
            int switch_ons = 0;
            for (std::size_t k = 0; k + 1 < trace.times.size(); ++k) {
                const double a = std::max(trace.times[k], w0);
                const double b = std::min(trace.times[k + 1], end);
                if (b > a)
                    machine_seconds += trace.machines[i][k] * (b - a);
                if (k > 0 && trace.machines[i][k] > trace.machines[i][k - 1]
                    && trace.times[k] >= w0 && trace.times[k] < end)
                    ++switch_ons;
            }
            cost.compute_cost += fn.compute_cost_rate
                * (machine_seconds + fn.switch_delay * switch_ons) / (end - w0);
        }
        cost.queue_cost += fn.queue_cost_rate * f.qmax;
    }
    cost.total = cost.compute_cost + cost.queue_cost;
    return cost;
}

} // namespace chainopt
