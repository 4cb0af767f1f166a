#include "replay.hpp"

namespace mcrv {

const char* matching_name(Matching m) {
    return m == Matching::Exact ? "exact" : "causal";
}

ReplayCursorState replay_cursor(const Trace& t) {
    ReplayCursorState cur;
    cur.consumed.assign(t.records.size(), false);
    cur.consumed_count = 0;
    return cur;
}

ReplayOutcome replay_syscall(ReplayCursorState& cur, const Trace& t, const CausalOrder& order, Matching m,
                             const MarshalledCall& call) {
    ReplayOutcome out;
    if (m == Matching::Exact) {
        u64 next = cur.consumed_count;
        if (next >= t.records.size()) {
            out.mismatch = "trace exhausted after " + std::to_string(t.records.size()) +
                           " records; guest issued " + render_call(call);
            return out;
        }
        const SyscallRecord& rec = t.records[next];
        if (!inputs_equal(rec, call)) {
            out.mismatch = "record " + std::to_string(next) + " does not match\n  " + input_diff(rec, call);
            return out;
        }
        cur.consumed[next] = true;
        cur.consumed_count++;
        out.matched = true;
        out.seq = static_cast<u32>(next);
        out.rec = &rec;
        return out;
    }

    // Causal: lowest-seq minimal unconsumed record with equal inputs.
    const SyscallRecord* closest = nullptr;
    for (u32 j = 0; j < t.records.size(); j++) {
        if (cur.consumed[j] || !order.minimal_unconsumed(j, cur.consumed))
            continue;
        if (!closest)
            closest = &t.records[j];
        if (inputs_equal(t.records[j], call)) {
            cur.consumed[j] = true;
            cur.consumed_count++;
            out.matched = true;
            out.seq = j;
            out.rec = &t.records[j];
            return out;
        }
    }
    if (cur.consumed_count >= t.records.size()) {
        out.mismatch = "trace exhausted after " + std::to_string(t.records.size()) + " records; guest issued " +
                       render_call(call);
    } else if (closest) {
        out.mismatch = "no causally-minimal record matches\n  closest (seq " + std::to_string(closest->seq) +
                       "): " + input_diff(*closest, call);
    } else {
        out.mismatch = "no causally-minimal record available; guest issued " + render_call(call);
    }
    return out;
}

} // namespace mcrv
