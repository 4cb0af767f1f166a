#pragma once

#include "causal.hpp"
#include "os_state.hpp"

namespace mcrv {

enum class Matching : u8 { Exact = 0, Causal = 1 };

const char* matching_name(Matching m);

struct ReplayOutcome {
    bool matched = false;
    u32 seq = 0;                        // matched record
    const SyscallRecord* rec = nullptr; // valid while the trace lives
    std::string mismatch;               // diff when !matched
};

// Matches the guest's call against the trace and consumes the record.
// Exact mode accepts only the next record in order; causal mode accepts any
// input-equal record that is minimal in the causal order restricted to
// unconsumed records, lowest seq first. Outputs are never matched, always
// played back.
ReplayOutcome replay_syscall(ReplayCursorState& cur, const Trace& t, const CausalOrder& order, Matching m,
                             const MarshalledCall& call);

// Fresh cursor for a loaded trace.
ReplayCursorState replay_cursor(const Trace& t);

} // namespace mcrv
