#include <cmath>
#include <cstdio>
#include <exception>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "chainopt/chain.hpp"
#include "chainopt/io.hpp"
#include "chainopt/linear_design.hpp"
#include "chainopt/period_design.hpp"
#include "chainopt/schedule.hpp"
#include "chainopt/simulate.hpp"

namespace {

// Exit codes: 0 success, 2 usage, 3 validation, 4 infeasible/degenerate,
// 5 simulation divergence.
enum ExitCode { kOk = 0, kUsage = 2, kValidation = 3, kInfeasible = 4, kDivergence = 5 };

void print_cost(const chainopt::CostBreakdown& c)
{
    std::printf("cost: total %.6g = compute %.6g + queue %.6g (lower bound %.6g)\n",
                c.total, c.compute_cost, c.queue_cost, c.lower_bound);
}

void print_plan(const chainopt::SwitchingPlan& plan)
{
    print_cost(plan.cost);
    std::printf("e2e bound: %.6g s\n", plan.e2e_bound);
    for (std::size_t i = 0; i < plan.functions.size(); ++i) {
        const chainopt::FunctionSchedule& f = plan.functions[i];
        if (f.always_on) {
            std::printf("  F%zu: always on (%d machines), qmax %.6g\n", i + 1,
                        f.base_machines + (f.residual_rate > 0.0 ? 1 : 0), f.qmax);
        } else {
            std::printf("  F%zu: T %.6g s, T_on %.6g s, onset %.6g s, qmax %.6g\n",
                        i + 1, f.period, f.on_duration, f.onset, f.qmax);
        }
    }
}

chainopt::SwitchingPlan solve_with_method(const chainopt::ChainSpec& spec,
                                          const std::string& method, bool quiet = false)
{
    if (method == "linear") {
        const chainopt::LinearSolution sol = chainopt::solve(spec);
        if (!quiet)
            std::printf("linear design: %s branch, lambda %.6g%s\n",
                        sol.constrained ? "constrained" : "unconstrained", sol.lambda,
                        sol.degenerate ? " (degenerate: zero switching cost)" : "");
        return chainopt::build(spec, sol);
    }
    const chainopt::PeriodDesign d = chainopt::optimize(spec);
    if (!quiet)
        std::printf("common-period design: T* %.6g s (deadline cap %.6g s)\n",
                    d.period, d.deadline_cap);
    return chainopt::build(spec, d);
}

int cmd_solve(const std::string& config_path, const std::string& method,
              const std::string& out_path)
{
    std::string raw;
    chainopt::ChainSpec spec;
    try {
        raw = chainopt::io::read_file(config_path);
        spec = chainopt::io::parse_chain_config(raw);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kValidation;
    }
    chainopt::SwitchingPlan plan;
    try {
        plan = solve_with_method(spec, method);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kInfeasible;
    }
    print_plan(plan);
    if (!out_path.empty()) {
        const std::string hash = chainopt::io::fnv1a_hex(raw);
        chainopt::io::write_file(out_path, chainopt::io::emit_plan(spec, plan, hash));
        std::printf("plan written to %s\n", out_path.c_str());
    }
    return kOk;
}

int cmd_simulate(const std::string& plan_path, int periods,
                 const std::vector<std::string>& disturbance_specs, double dt,
                 const std::string& trace_path)
{
    chainopt::io::PlanFile pf;
    chainopt::SimulationConfig config;
    try {
        pf = chainopt::io::load_plan(plan_path);
        config.horizon_periods = periods;
        for (const std::string& ds : disturbance_specs) {
            chainopt::DisturbanceEvent ev;
            unsigned long idx = 0;
            if (std::sscanf(ds.c_str(), "%lu,%lf,%lf", &idx, &ev.time, &ev.mass) != 3
                || idx < 1 || idx > pf.plan.functions.size())
                throw std::invalid_argument("malformed disturbance \"" + ds
                                            + "\" (want index,time,mass with 1-based index)");
            ev.function_index = idx - 1;
            config.disturbances.push_back(ev);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kValidation;
    }

    chainopt::SimulationTrace trace;
    try {
        trace = chainopt::simulate(pf.chain, pf.plan, config);
    } catch (const chainopt::SimulationDivergence& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kDivergence;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kValidation;
    }

    const std::size_t n = pf.plan.functions.size();
    for (std::size_t i = 0; i < n; ++i)
        std::printf("F%zu: measured max queue %.6g\n", i + 1, trace.max_queue[i]);
    std::printf("measured e2e delay: %.6g s\n", trace.max_delay);
    print_cost(trace.avg_cost);

    bool all_ok = true;
    const double tol = 1e-6;
    if (config.disturbances.empty()) {
        for (std::size_t i = 0; i < n; ++i) {
            const double bound = pf.plan.functions[i].sim_bound;
            const bool ok = trace.max_queue[i] <= bound * (1.0 + tol) + 1e-15;
            all_ok &= ok;
            std::printf("[%s] queue %zu: measured %.6g <= bound %.6g\n",
                        ok ? "PASS" : "FAIL", i + 1, trace.max_queue[i], bound);
        }
        const bool ok = trace.max_delay <= pf.plan.e2e_bound * (1.0 + tol) + 1e-15;
        all_ok &= ok;
        std::printf("[%s] e2e delay: measured %.6g <= bound %.6g\n",
                    ok ? "PASS" : "FAIL", trace.max_delay, pf.plan.e2e_bound);
    } else {
        // Recovery perturbs everything downstream, so only the enlarged
        // bounds of the disturbed queues are meaningful checks.
        std::vector<double> extra(n, 0.0);
        for (const chainopt::DisturbanceEvent& ev : config.disturbances)
            extra[ev.function_index] += ev.mass;
        for (std::size_t i = 0; i < n; ++i) {
            if (extra[i] == 0.0)
                continue;
            const double bound = pf.plan.functions[i].sim_bound + extra[i];
            const bool ok = trace.max_queue[i] <= bound * (1.0 + tol) + 1e-15;
            all_ok &= ok;
            std::printf("[%s] queue %zu (disturbed): measured %.6g <= enlarged bound %.6g\n",
                        ok ? "PASS" : "FAIL", i + 1, trace.max_queue[i], bound);
            const chainopt::DisturbanceEvent* last = nullptr;
            for (const chainopt::DisturbanceEvent& ev : config.disturbances)
                if (ev.function_index == i)
                    last = &ev;
            const chainopt::DisturbanceResponse resp =
                chainopt::disturbance_response(pf.plan, *last);
            std::printf("  recovery: extended on-time %.6g s, %d period(s)\n",
                        resp.extended_on, resp.recovery_periods);
        }
    }

    if (!trace_path.empty()) {
        chainopt::io::write_file(trace_path, chainopt::io::trace_csv(trace, dt));
        std::printf("trace written to %s\n", trace_path.c_str());
    }
    return all_ok ? kOk : kValidation;
}

int cmd_compare(const std::string& config_path, int sweep, unsigned long seed)
{
    chainopt::ChainSpec spec;
    try {
        spec = chainopt::io::load_chain_config(config_path);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kValidation;
    }

    auto run_both = [](const chainopt::ChainSpec& s, bool print) -> int {
        double lin = 0.0, per = 0.0;
        bool lin_ok = true, per_ok = true;
        std::string lin_err, per_err;
        try {
            lin = chainopt::solve(s).cost.total;
        } catch (const std::exception& e) {
            lin_ok = false;
            lin_err = e.what();
        }
        try {
            per = chainopt::optimize(s).cost.total;
        } catch (const std::exception& e) {
            per_ok = false;
            per_err = e.what();
        }
        if (print) {
            const double lb = chainopt::lower_bound_cost(s);
            if (lin_ok)
                std::printf("linear:        total %.6g (lower bound %.6g)\n", lin, lb);
            else
                std::printf("linear:        failed (%s)\n", lin_err.c_str());
            if (per_ok)
                std::printf("common-period: total %.6g (lower bound %.6g)\n", per, lb);
            else
                std::printf("common-period: failed (%s)\n", per_err.c_str());
            if (lin_ok && per_ok)
                std::printf("winner: %s by %.6g\n",
                            per <= lin ? "common-period" : "linear", std::abs(lin - per));
        }
        if (!lin_ok || !per_ok)
            return -1;
        return per <= lin ? 1 : 0;
    };

    if (sweep <= 0)
        return run_both(spec, true) < 0 ? kInfeasible : kOk;

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> speed(1.0, 20.0);
    std::uniform_real_distribution<double> rate(1.0, 50.0);
    std::uniform_real_distribution<double> ccost(0.1, 5.0);
    std::uniform_real_distribution<double> qcost(0.1, 2.0);
    std::uniform_real_distribution<double> delay(1e-4, 1e-2);
    std::uniform_int_distribution<int> stages(2, 4);
    std::uniform_real_distribution<double> deadline(0.01, 0.2);

    int period_wins = 0, linear_wins = 0, skipped = 0;
    for (int job = 0; job < sweep; ++job) {
        chainopt::ChainSpec s;
        do {
            s.functions.clear();
            s.input_rate = rate(rng);
            s.e2e_deadline = deadline(rng);
            const int n = stages(rng);
            for (int k = 0; k < n; ++k)
                s.functions.push_back({speed(rng), ccost(rng), qcost(rng), delay(rng)});
        } while ([&] {
            for (std::size_t k = 0; k < s.size(); ++k)
                if (chainopt::derive_profile(s, k).residual_rate == 0.0)
                    return true;
            return false;
        }());
        const int w = run_both(s, false);
        if (w < 0)
            ++skipped;
        else if (w == 1)
            ++period_wins;
        else
            ++linear_wins;
        std::printf("job %d: r %.4g, %zu stages -> %s\n", job, s.input_rate, s.size(),
                    w < 0 ? "skipped" : (w == 1 ? "common-period" : "linear"));
    }
    std::printf("sweep: common-period wins %d, linear wins %d, skipped %d of %d\n",
                period_wins, linear_wins, skipped, sweep);
    return kOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Cost-optimal on/off switching schedules for constant-rate service chains"};
    app.require_subcommand(1);

    std::string config_path, out_path, plan_path, trace_path, method = "common-period";
    std::vector<std::string> disturbances;
    int periods = 10;
    double dt = 0.0;
    int sweep = 0;
    unsigned long seed = 1;

    CLI::App* solve = app.add_subcommand("solve", "Design a switching plan for a chain config");
    solve->add_option("--config", config_path, "chain config (JSON)")->required();
    solve->add_option("--method", method, "linear or common-period")
        ->check(CLI::IsMember({"linear", "common-period"}));
    solve->add_option("--out", out_path, "plan output path (JSON)");

    CLI::App* sim = app.add_subcommand("simulate", "Run the fluid simulation of a plan");
    sim->add_option("--plan", plan_path, "plan file (JSON)")->required();
    sim->add_option("--periods", periods, "horizon in periods (> 0)")->required();
    sim->add_option("--disturbance", disturbances,
                    "impulse disturbance as index,time,mass (repeatable, 1-based index)");
    sim->add_option("--dt", dt, "emit the trace on a fixed time grid instead of breakpoints");
    sim->add_option("--trace", trace_path, "trace output path (CSV)");

    CLI::App* cmp = app.add_subcommand("compare", "Run both designers and compare costs");
    cmp->add_option("--config", config_path, "chain config (JSON)")->required();
    cmp->add_option("--sweep", sweep, "also compare on N random chains");
    cmp->add_option("--seed", seed, "random seed for --sweep");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (solve->parsed())
            return cmd_solve(config_path, method, out_path);
        if (sim->parsed()) {
            if (periods <= 0) {
                std::fprintf(stderr, "error: --periods must be > 0\n");
                return kUsage;
            }
            return cmd_simulate(plan_path, periods, disturbances, dt, trace_path);
        }
        return cmd_compare(config_path, sweep, seed);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kValidation;
    }
}
