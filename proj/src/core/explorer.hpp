#pragma once

#include "engine.hpp"

namespace mcrv {

struct Limits {
    u64 max_states = 1000000;
    u64 max_depth = 100000;
};

enum class Verdict : u8 { Ok = 0, Violation = 1, TraceIncompatibleEverywhere = 2, LimitExceeded = 3 };

const char* verdict_name(Verdict v);

struct ExplorationResult {
    Verdict verdict = Verdict::Ok;
    u64 states_visited = 0;
    u64 transitions = 0;
    u64 pruned = 0;
    bool has_fault = false;
    FaultInfo fault;
    std::string fault_kind_str; // rendered kind (run mode shows assume-violation-in-run-mode)
    std::string fault_location_str;
    bool has_counterexample = false;
    std::vector<u64> counterexample; // choice picks from boot to the violation
    i64 exit_code = 0;
    i64 trace_consumed = -1;
    i64 trace_total = -1;
    std::vector<u32> unconsumed; // seq numbers left over at exit (run mode)
};

// Single execution in standard order; scheduler and guest choices resolved
// by splitmix64 over the seed and step count. All fault checking stays on.
Result<ExplorationResult> run_program(Engine& eng, u64 seed);

// Depth-first exploration over choice points with snapshot-per-choice and
// digest deduplication. Assume violations (including replay mismatches)
// prune silently; other faults stop the search with a counterexample.
Result<ExplorationResult> verify_program(Engine& eng, const Limits& limits);

// Re-runs a counterexample; true when the same fault kind and location
// reproduce.
Result<ExplorationResult> follow_counterexample(Engine& eng, const std::vector<u64>& picks);

std::string render_report(const ExplorationResult& r, bool machine_readable);

} // namespace mcrv
