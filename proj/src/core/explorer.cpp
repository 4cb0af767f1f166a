#include "explorer.hpp"

#include <algorithm>
#include <set>

namespace mcrv {

const char* verdict_name(Verdict v) {
    switch (v) {
    case Verdict::Ok: return "ok";
    case Verdict::Violation: return "violation";
    case Verdict::TraceIncompatibleEverywhere: return "trace-incompatible-everywhere";
    case Verdict::LimitExceeded: return "limit-exceeded";
    }
    return "?";
}

namespace {

std::string display_fault_kind(const FaultInfo& f, EngineMode mode) {
    if (f.kind == FaultKind::AssumeViolation && mode == EngineMode::Run)
        return "assume-violation-in-run-mode";
    return fault_kind_name(f.kind);
}

void fill_fault(ExplorationResult& r, const Engine& eng, const MachineState& s) {
    r.has_fault = true;
    r.fault = s.fault;
    r.fault_kind_str = display_fault_kind(s.fault, eng.mode());
    r.fault_location_str = fault_location(eng.program(), s.fault);
}

void fill_trace_fields(ExplorationResult& r, const Engine& eng, const MachineState& s) {
    r.trace_total = eng.trace_total();
    r.trace_consumed = Engine::trace_consumed(s);
    if (s.os.mode == OsMode::Replay && s.status == VmStatus::Exited)
        for (u32 i = 0; i < s.os.cursor.consumed.size(); i++)
            if (!s.os.cursor.consumed[i])
                r.unconsumed.push_back(i);
}

// Steps until the state settles on a choice or a terminal status.
StepEvent drive(Engine& eng, MachineState& s, u64* transitions) {
    for (;;) {
        StepOutcome o = eng.step(s);
        if (transitions)
            (*transitions)++;
        switch (s.status) {
        case VmStatus::Running:
            continue;
        case VmStatus::Choice:
            return StepEvent::Choice;
        case VmStatus::Exited:
            return StepEvent::Exited;
        case VmStatus::Faulted:
            return StepEvent::Faulted;
        }
        (void)o;
    }
}

} // namespace

Result<ExplorationResult> run_program(Engine& eng, u64 seed) {
    Result<MachineState> booted = eng.boot();
    if (!booted)
        return Err{booted.error()};
    MachineState s = booted.take();
    ExplorationResult r;
    for (;;) {
        StepEvent ev = drive(eng, s, &r.transitions);
        if (!eng.fatal_error().empty())
            return Err{eng.fatal_error()};
        if (ev == StepEvent::Choice) {
            u64 pick = scheduler_pick(seed, s.step_count, s.choice.arity);
            r.counterexample.push_back(pick);
            Status st = eng.resolve_choice(s, pick);
            if (!st.ok())
                return Err{st.error()};
            continue;
        }
        if (ev == StepEvent::Exited) {
            r.verdict = Verdict::Ok;
            r.exit_code = s.exit_code;
            r.counterexample.clear();
            break;
        }
        // Faulted: in run mode every fault is a terminal violation.
        r.verdict = Verdict::Violation;
        fill_fault(r, eng, s);
        r.has_counterexample = true;
        break;
    }
    r.states_visited = s.step_count;
    fill_trace_fields(r, eng, s);
    return r;
}

Result<ExplorationResult> verify_program(Engine& eng, const Limits& limits) {
    if (eng.config().mode == OsMode::Passthrough)
        return Err{"mode matrix violation: verify cannot run in passthrough mode"};
    Result<MachineState> booted = eng.boot();
    if (!booted)
        return Err{booted.error()};

    ExplorationResult r;
    std::set<Digest> visited;
    u64 completed = 0;
    bool limit_hit = false;
    i64 max_consumed = -1;

    struct Node {
        std::vector<u8> snap;
        u64 arity;
        u64 next_pick;
        std::vector<u64> path;
    };
    std::vector<Node> stack;

    // Settles a state: counts its digest, pushes a frontier node for
    // choices, classifies terminals. Returns true when a violation ends
    // the search.
    auto settle = [&](MachineState& s, std::vector<u64> path) -> bool {
        StepEvent ev = drive(eng, s, &r.transitions);
        if (ev == StepEvent::Choice) {
            Digest d = eng.digest(s);
            bool fresh = visited.insert(d).second;
            r.states_visited = visited.size();
            if (!fresh)
                return false; // seen: the subtree is already covered
            if (visited.size() > limits.max_states || path.size() >= limits.max_depth) {
                limit_hit = true;
                return false;
            }
            Result<std::vector<u8>> snap = eng.snapshot(s);
            if (!snap) {
                eng.set_fatal(snap.error());
                return true;
            }
            stack.push_back(Node{snap.take(), s.choice.arity, 0, std::move(path)});
            return false;
        }
        Digest d = eng.digest(s);
        visited.insert(d);
        r.states_visited = visited.size();
        if (ev == StepEvent::Exited) {
            completed++;
            if (s.os.mode == OsMode::Replay)
                max_consumed = std::max<i64>(max_consumed, Engine::trace_consumed(s));
            return false;
        }
        if (s.fault.kind == FaultKind::AssumeViolation) {
            r.pruned++;
            return false;
        }
        r.verdict = Verdict::Violation;
        fill_fault(r, eng, s);
        r.has_counterexample = true;
        r.counterexample = std::move(path);
        return true;
    };

    {
        MachineState s0 = booted.take();
        if (settle(s0, {})) {
            if (!eng.fatal_error().empty())
                return Err{eng.fatal_error()};
            fill_trace_fields(r, eng, s0);
            r.trace_consumed = max_consumed;
            return r;
        }
    }

    bool violation = false;
    while (!violation && !stack.empty()) {
        Node& top = stack.back();
        if (top.next_pick >= top.arity) {
            stack.pop_back();
            continue;
        }
        u64 pick = top.next_pick++;
        Result<MachineState> restored = eng.restore(top.snap);
        if (!restored)
            return Err{restored.error()};
        MachineState s = restored.take();
        Status st = eng.resolve_choice(s, pick);
        if (!st.ok())
            return Err{st.error()};
        std::vector<u64> path = top.path;
        path.push_back(pick);
        violation = settle(s, std::move(path));
        if (!eng.fatal_error().empty())
            return Err{eng.fatal_error()};
    }

    if (!violation) {
        if (limit_hit)
            r.verdict = Verdict::LimitExceeded;
        else if (eng.config().mode == OsMode::Replay && completed == 0 && r.pruned > 0)
            r.verdict = Verdict::TraceIncompatibleEverywhere;
        else
            r.verdict = Verdict::Ok;
    }
    r.trace_total = eng.trace_total();
    r.trace_consumed = max_consumed;
    return r;
}

Result<ExplorationResult> follow_counterexample(Engine& eng, const std::vector<u64>& picks) {
    Result<MachineState> booted = eng.boot();
    if (!booted)
        return Err{booted.error()};
    MachineState s = booted.take();
    ExplorationResult r;
    size_t used = 0;
    for (;;) {
        StepEvent ev = drive(eng, s, &r.transitions);
        if (!eng.fatal_error().empty())
            return Err{eng.fatal_error()};
        if (ev == StepEvent::Choice) {
            if (used >= picks.size())
                return Err{"counterexample exhausted at a choice of arity " + std::to_string(s.choice.arity)};
            Status st = eng.resolve_choice(s, picks[used++]);
            if (!st.ok())
                return Err{st.error()};
            continue;
        }
        if (ev == StepEvent::Exited) {
            r.verdict = Verdict::Ok;
            r.exit_code = s.exit_code;
        } else {
            r.verdict = Verdict::Violation;
            fill_fault(r, eng, s);
        }
        break;
    }
    r.states_visited = s.step_count;
    fill_trace_fields(r, eng, s);
    return r;
}

std::string render_report(const ExplorationResult& r, bool machine_readable) {
    std::string s;
    if (machine_readable) {
        s += "verdict=" + std::string(verdict_name(r.verdict)) + "\n";
        s += "states=" + std::to_string(r.states_visited) + "\n";
        s += "transitions=" + std::to_string(r.transitions) + "\n";
        s += "fault-kind=" + (r.has_fault ? r.fault_kind_str : "") + "\n";
        s += "fault-location=" + (r.has_fault ? r.fault_location_str : "") + "\n";
        s += "trace-consumed=" + std::to_string(r.trace_consumed) + "\n";
        s += "trace-total=" + std::to_string(r.trace_total) + "\n";
        return s;
    }
    s += "verdict: " + std::string(verdict_name(r.verdict)) + "\n";
    s += "states visited: " + std::to_string(r.states_visited) + "\n";
    s += "transitions: " + std::to_string(r.transitions) + "\n";
    if (r.pruned)
        s += "pruned executions: " + std::to_string(r.pruned) + "\n";
    if (r.verdict == Verdict::Ok)
        s += "exit code: " + std::to_string(r.exit_code) + "\n";
    if (r.has_fault) {
        s += "fault: " + r.fault_kind_str + " at " + r.fault_location_str + " (thread " +
             std::to_string(r.fault.thread) + ")\n";
        if (!r.fault.detail.empty())
            s += "detail: " + r.fault.detail + "\n";
    }
    if (r.has_counterexample) {
        s += "counterexample picks:";
        for (u64 p : r.counterexample)
            s += " " + std::to_string(p);
        s += "\n";
    }
    if (r.trace_total >= 0) {
        s += "trace: " + std::to_string(r.trace_consumed) + "/" + std::to_string(r.trace_total) + " records consumed\n";
        if (!r.unconsumed.empty()) {
            s += "warning: unconsumed trace records:";
            for (u32 q : r.unconsumed)
                s += " " + std::to_string(q);
            s += "\n";
        }
    }
    return s;
}

} // namespace mcrv
