#pragma once

#include <string>

#include "chainopt/chain.hpp"
#include "chainopt/schedule.hpp"
#include "chainopt/simulate.hpp"

namespace chainopt::io {

inline constexpr const char* kToolVersion = "0.1.0";

// Chain config document. Unknown keys are rejected by name.
ChainSpec parse_chain_config(const std::string& text);
ChainSpec load_chain_config(const std::string& path);

struct PlanFile {
    ChainSpec chain;
    SwitchingPlan plan;
    std::string input_hash;
    std::string version;
};

std::string emit_plan(const ChainSpec& spec, const SwitchingPlan& plan,
                      const std::string& input_hash);
PlanFile parse_plan(const std::string& text);
PlanFile load_plan(const std::string& path);

// Tabular trace: time, then queue/machines/service per stage, then the
// running end-to-end delay. dt = 0 emits the exact breakpoints; dt > 0 emits
// a fixed-step grid with linear interpolation.
std::string trace_csv(const SimulationTrace& trace, double dt = 0.0);

std::string fnv1a_hex(const std::string& bytes);
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& text);

} // namespace chainopt::io
