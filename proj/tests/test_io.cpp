#include <doctest.h>

#include <stdexcept>

#include "chainopt/io.hpp"
#include "chainopt/linear_design.hpp"
#include "chainopt/period_design.hpp"
#include "chainopt/schedule.hpp"
#include "chainopt/simulate.hpp"
#include "test_support.hpp"

using namespace chainopt;

namespace {

const char* kConfig = R"({
  "input_rate": 17,
  "e2e_deadline": 0.02,
  "functions": [
    { "nominal_speed": 6, "compute_cost": 6, "queue_cost": 0.5, "switch_delay": 0.01 },
    { "nominal_speed": 8, "compute_cost": 8, "queue_cost": 0.5, "switch_delay": 0.01 }
  ]
})";

} // namespace

TEST_CASE("config parsing")
{
    const ChainSpec spec = io::parse_chain_config(kConfig);
    CHECK(spec.input_rate == 17.0);
    CHECK(spec.e2e_deadline == 0.02);
    REQUIRE(spec.size() == 2);
    CHECK(spec.functions[1].compute_cost_rate == 8.0);

    SUBCASE("unknown keys are rejected by name")
    {
        const std::string bad = R"({"input_rate": 1, "e2e_deadline": 1,
            "functions": [], "colour": "red"})";
        CHECK_THROWS_WITH_AS(io::parse_chain_config(bad), doctest::Contains("colour"),
                             std::invalid_argument);
        const std::string bad_fn = R"({"input_rate": 1, "e2e_deadline": 1, "functions":
            [{"nominal_speed": 2, "compute_cost": 1, "queue_cost": 1,
              "switch_delay": 0, "spin": 3}]})";
        CHECK_THROWS_WITH_AS(io::parse_chain_config(bad_fn), doctest::Contains("spin"),
                             std::invalid_argument);
    }

    SUBCASE("missing and mistyped keys are named")
    {
        CHECK_THROWS_WITH_AS(io::parse_chain_config(R"({"input_rate": 1})"),
                             doctest::Contains("e2e_deadline"), std::invalid_argument);
        CHECK_THROWS_WITH_AS(
            io::parse_chain_config(
                R"({"input_rate": "fast", "e2e_deadline": 1, "functions": []})"),
            doctest::Contains("input_rate"), std::invalid_argument);
    }

    SUBCASE("values violating the model are rejected")
    {
        const std::string bad = R"({"input_rate": -3, "e2e_deadline": 1, "functions":
            [{"nominal_speed": 2, "compute_cost": 1, "queue_cost": 1, "switch_delay": 0}]})";
        CHECK_THROWS_AS(io::parse_chain_config(bad), std::invalid_argument);
        CHECK_THROWS_AS(io::parse_chain_config("not json at all"), std::invalid_argument);
    }
}

TEST_CASE("plan files round-trip bit-exactly")
{
    const ChainSpec spec = io::parse_chain_config(kConfig);
    const SwitchingPlan plan = build(spec, optimize(spec));
    const std::string text = io::emit_plan(spec, plan, io::fnv1a_hex(kConfig));

    const io::PlanFile pf = io::parse_plan(text);
    CHECK(pf.plan.method == plan.method);
    CHECK(pf.version == io::kToolVersion);
    REQUIRE(pf.plan.functions.size() == plan.functions.size());
    for (std::size_t i = 0; i < plan.functions.size(); ++i) {
        CHECK(pf.plan.functions[i].period == plan.functions[i].period);
        CHECK(pf.plan.functions[i].onset == plan.functions[i].onset);
        CHECK(pf.plan.functions[i].qmax == plan.functions[i].qmax);
        CHECK(pf.plan.functions[i].sim_bound == plan.functions[i].sim_bound);
    }
    CHECK(pf.chain.input_rate == spec.input_rate);
    CHECK(pf.plan.e2e_bound == plan.e2e_bound);
    CHECK(pf.plan.cost.total == plan.cost.total);

    // Re-emitting the parsed plan reproduces the bytes.
    CHECK(io::emit_plan(pf.chain, pf.plan, pf.input_hash) == text);
}

TEST_CASE("emitting twice yields identical bytes")
{
    const ChainSpec spec = io::parse_chain_config(kConfig);
    const SwitchingPlan a = build(spec, solve(spec));
    const SwitchingPlan b = build(spec, solve(spec));
    CHECK(io::emit_plan(spec, a, "x") == io::emit_plan(spec, b, "x"));
    CHECK(io::fnv1a_hex(kConfig) == io::fnv1a_hex(kConfig));
    CHECK(io::fnv1a_hex("a") != io::fnv1a_hex("b"));
}

TEST_CASE("trace tables")
{
    const ChainSpec spec = io::parse_chain_config(kConfig);
    const SwitchingPlan plan = build(spec, optimize(spec));
    SimulationConfig config;
    config.horizon_periods = 3;
    const SimulationTrace tr = simulate(spec, plan, config);

    SUBCASE("breakpoint rows")
    {
        const std::string csv = io::trace_csv(tr);
        CHECK(csv.rfind("time,queue1,machines1,service1,queue2,machines2,service2,e2e_delay\n",
                        0) == 0);
        std::size_t rows = 0;
        for (char c : csv)
            rows += c == '\n';
        CHECK(rows == tr.times.size() + 1);
    }

    SUBCASE("fixed-step rows")
    {
        const double dt = tr.horizon / 100.0;
        const std::string csv = io::trace_csv(tr, dt);
        std::size_t rows = 0;
        for (char c : csv)
            rows += c == '\n';
        CHECK(rows == 102); // header + 101 samples
    }
}

TEST_CASE("plan parsing rejects nonsense")
{
    CHECK_THROWS_AS(io::parse_plan("{"), std::invalid_argument);
    CHECK_THROWS_AS(io::parse_plan(R"({"method": "psychic"})"), std::invalid_argument);
}
