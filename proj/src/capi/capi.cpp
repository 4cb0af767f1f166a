#include "mcrv/mcrv.h"

#include <cstdlib>
#include <cstring>
#include <deque>
#include <fstream>
#include <memory>
#include <sstream>

#include "../core/explorer.hpp"

using namespace mcrv;

struct mcrv_program {
    GuestProgram prog;
};

struct mcrv_config {
    OsConfig cfg;
};

struct mcrv_report {
    ExplorationResult res;
};

struct mcrv_trace {
    Trace trace;
    std::unique_ptr<CausalOrder> order;
};

// Interactive session: an engine, the current state, and a bounded ring of
// pre-step snapshots for stepping backwards.
struct mcrv_engine {
    std::unique_ptr<Engine> eng;
    MachineState state;
    std::deque<std::vector<u8>> history;
    size_t ring = 10000;
    u64 steps = 0;
    std::string last_error;
};

namespace {

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out)
        std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

void set_err(char** errmsg, const std::string& msg) {
    if (errmsg)
        *errmsg = dup_string(msg);
}

mcrv_status classify(const std::string& msg) {
    if (msg.rfind("SnapshotForbidden", 0) == 0)
        return MCRV_ERR_FORBIDDEN;
    if (msg.find("TraceIoError") != std::string::npos || msg.find("cannot load trace") != std::string::npos)
        return MCRV_ERR_IO;
    return MCRV_ERR_CONFIG;
}

Result<GuestProgram> parse_or_err(const std::string& src) {
    ParseResult pr = parse_program(src);
    if (std::holds_alternative<ParseError>(pr))
        return Err{std::get<ParseError>(pr).render()};
    return std::get<GuestProgram>(std::move(pr));
}

std::string location_line(const mcrv_engine& e) {
    const MachineState& s = e.state;
    if (s.status == VmStatus::Exited)
        return "exited with code " + std::to_string(s.exit_code);
    if (s.status == VmStatus::Faulted)
        return std::string(fault_kind_name(s.fault.kind)) + " at " + fault_location(e.eng->program(), s.fault);
    u32 t = s.status == VmStatus::Choice && s.choice.origin == ChoiceRequest::Origin::GuestChoose
                ? s.choice.thread
                : s.current;
    const Frame& fr = s.threads[t].frames.back();
    const Function& fn = e.eng->program().functions[fr.fn];
    std::string loc = fn.name + ":" + fn.blocks[fr.block].label + ":" + std::to_string(fr.instr);
    if (fr.instr < fn.blocks[fr.block].instrs.size())
        loc += "  (" + print_instruction(e.eng->program(), fn, fn.blocks[fr.block].instrs[fr.instr]) + ")";
    if (s.status == VmStatus::Choice)
        loc += s.choice.origin == ChoiceRequest::Origin::GuestChoose ? "  [guest choice arity " : "  [scheduler choice arity ";
    if (s.status == VmStatus::Choice)
        loc += std::to_string(s.choice.arity) + "]";
    return "thread " + std::to_string(t) + " at " + loc;
}

std::string event_text(const mcrv_engine& e, const StepOutcome& o) {
    std::string s = "#" + std::to_string(e.steps) + " ";
    switch (o.event) {
    case StepEvent::Plain:
        return s + location_line(e);
    case StepEvent::Choice:
        return s + "choice: " + location_line(e);
    case StepEvent::Syscall: {
        const SyscallSpec* spec = find_syscall(o.sys_number);
        s += "syscall " + (spec ? spec->name : std::to_string(o.sys_number));
        if (o.sys_completed) {
            s += " -> " + std::to_string(o.sys_retval);
            if (o.sys_errno)
                s += " errno " + std::string(perrno_name(o.sys_errno));
        } else {
            s += " (blocked)";
        }
        return s;
    }
    case StepEvent::Exited:
        return s + "exited with code " + std::to_string(e.state.exit_code);
    case StepEvent::Faulted:
        return s + "faulted: " + fault_kind_name(e.state.fault.kind) + " at " +
               fault_location(e.eng->program(), e.state.fault);
    }
    return s;
}

// Pushes a pre-step snapshot, bounded by the ring size.
bool push_history(mcrv_engine& e) {
    Result<std::vector<u8>> snap = e.eng->snapshot(e.state);
    if (!snap) {
        e.last_error = snap.error();
        return false;
    }
    e.history.push_back(snap.take());
    if (e.history.size() > e.ring)
        e.history.pop_front();
    return true;
}

mcrv_status engine_one_step(mcrv_engine* e, char** event_line, StepOutcome* out) {
    if (e->state.status != VmStatus::Running)
        return MCRV_ERR_STATE;
    if (!push_history(*e))
        return MCRV_ERR_STATE;
    StepOutcome o = e->eng->step(e->state);
    e->steps++;
    if (out)
        *out = o;
    if (event_line)
        *event_line = dup_string(event_text(*e, o));
    return MCRV_OK;
}

} // namespace

extern "C" {

const char* mcrv_version(void) {
    return "mcrv 1.0.0";
}

void mcrv_string_free(char* s) {
    std::free(s);
}

mcrv_status mcrv_program_parse_text(const char* source, mcrv_program** out, char** errmsg) {
    *out = nullptr;
    Result<GuestProgram> r = parse_or_err(source ? source : "");
    if (!r) {
        set_err(errmsg, r.error());
        return MCRV_ERR_PARSE;
    }
    *out = new mcrv_program{r.take()};
    return MCRV_OK;
}

mcrv_status mcrv_program_parse_file(const char* path, mcrv_program** out, char** errmsg) {
    *out = nullptr;
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        set_err(errmsg, std::string("cannot open '") + path + "'");
        return MCRV_ERR_IO;
    }
    std::stringstream ss;
    ss << f.rdbuf();
    Result<GuestProgram> r = parse_or_err(ss.str());
    if (!r) {
        set_err(errmsg, std::string(path) + ": " + r.error());
        return MCRV_ERR_PARSE;
    }
    *out = new mcrv_program{r.take()};
    return MCRV_OK;
}

char* mcrv_program_print(const mcrv_program* p) {
    return dup_string(print_program(p->prog));
}

void mcrv_program_free(mcrv_program* p) {
    delete p;
}

mcrv_config* mcrv_config_new(void) {
    return new mcrv_config{};
}

mcrv_status mcrv_config_set_mode(mcrv_config* c, const char* mode, char** errmsg) {
    std::string m = mode ? mode : "";
    if (m == "virtual")
        c->cfg.mode = OsMode::Virtual;
    else if (m == "passthrough")
        c->cfg.mode = OsMode::Passthrough;
    else if (m == "replay")
        c->cfg.mode = OsMode::Replay;
    else {
        set_err(errmsg, "unknown OS mode '" + m + "' (virtual|passthrough|replay)");
        return MCRV_ERR_CONFIG;
    }
    return MCRV_OK;
}

mcrv_status mcrv_config_set_matching(mcrv_config* c, const char* matching, char** errmsg) {
    std::string m = matching ? matching : "";
    if (m == "exact")
        c->cfg.matching = Matching::Exact;
    else if (m == "causal")
        c->cfg.matching = Matching::Causal;
    else {
        set_err(errmsg, "unknown matching mode '" + m + "' (exact|causal)");
        return MCRV_ERR_CONFIG;
    }
    return MCRV_OK;
}

mcrv_status mcrv_config_set_trace_path(mcrv_config* c, const char* path) {
    c->cfg.trace_path = path ? path : "";
    return MCRV_OK;
}

mcrv_status mcrv_config_add_preload(mcrv_config* c, const char* guest_path, const uint8_t* data, size_t len) {
    c->cfg.vfs_preload.emplace_back(guest_path, std::vector<u8>(data, data + len));
    return MCRV_OK;
}

mcrv_status mcrv_config_add_preload_file(mcrv_config* c, const char* guest_path, const char* host_path,
                                         char** errmsg) {
    std::ifstream f(host_path, std::ios::binary);
    if (!f) {
        set_err(errmsg, std::string("cannot open preload file '") + host_path + "'");
        return MCRV_ERR_IO;
    }
    std::stringstream ss;
    ss << f.rdbuf();
    std::string bytes = ss.str();
    c->cfg.vfs_preload.emplace_back(guest_path,
                                    std::vector<u8>(bytes.begin(), bytes.end()));
    return MCRV_OK;
}

mcrv_status mcrv_config_load_socket_script(mcrv_config* c, const char* path, char** errmsg) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        set_err(errmsg, std::string("cannot open socket script '") + path + "'");
        return MCRV_ERR_IO;
    }
    std::stringstream ss;
    ss << f.rdbuf();
    Result<std::vector<SocketScriptEntry>> r = parse_socket_script(ss.str());
    if (!r) {
        set_err(errmsg, r.error());
        return MCRV_ERR_CONFIG;
    }
    for (auto& e : r.value())
        c->cfg.socket_script.push_back(std::move(e));
    return MCRV_OK;
}

mcrv_status mcrv_config_set_components(mcrv_config* c, const char* csv) {
    c->cfg.components.clear();
    std::string s = csv ? csv : "";
    size_t pos = 0;
    while (pos <= s.size()) {
        size_t comma = s.find(',', pos);
        if (comma == std::string::npos)
            comma = s.size();
        std::string name = s.substr(pos, comma - pos);
        if (!name.empty())
            c->cfg.components.push_back(name);
        pos = comma + 1;
        if (comma == s.size())
            break;
    }
    return MCRV_OK;
}

void mcrv_config_free(mcrv_config* c) {
    delete c;
}

mcrv_status mcrv_run(const mcrv_program* p, const mcrv_config* c, uint64_t seed, mcrv_report** out,
                     char** errmsg) {
    *out = nullptr;
    Result<std::unique_ptr<Engine>> eng = Engine::create(p->prog, c->cfg, EngineMode::Run);
    if (!eng) {
        set_err(errmsg, eng.error());
        return classify(eng.error());
    }
    Result<ExplorationResult> r = run_program(*eng.value(), seed);
    if (!r) {
        set_err(errmsg, r.error());
        return classify(r.error());
    }
    *out = new mcrv_report{r.take()};
    return MCRV_OK;
}

mcrv_status mcrv_verify(const mcrv_program* p, const mcrv_config* c, uint64_t max_states, uint64_t max_depth,
                        mcrv_report** out, char** errmsg) {
    *out = nullptr;
    Result<std::unique_ptr<Engine>> eng = Engine::create(p->prog, c->cfg, EngineMode::Verify);
    if (!eng) {
        set_err(errmsg, eng.error());
        return classify(eng.error());
    }
    Limits lim;
    if (max_states)
        lim.max_states = max_states;
    if (max_depth)
        lim.max_depth = max_depth;
    Result<ExplorationResult> r = verify_program(*eng.value(), lim);
    if (!r) {
        set_err(errmsg, r.error());
        return classify(r.error());
    }
    *out = new mcrv_report{r.take()};
    return MCRV_OK;
}

const char* mcrv_report_verdict(const mcrv_report* r) {
    return verdict_name(r->res.verdict);
}
uint64_t mcrv_report_states(const mcrv_report* r) {
    return r->res.states_visited;
}
uint64_t mcrv_report_transitions(const mcrv_report* r) {
    return r->res.transitions;
}
const char* mcrv_report_fault_kind(const mcrv_report* r) {
    return r->res.has_fault ? r->res.fault_kind_str.c_str() : "";
}
const char* mcrv_report_fault_location(const mcrv_report* r) {
    return r->res.has_fault ? r->res.fault_location_str.c_str() : "";
}
int64_t mcrv_report_exit_code(const mcrv_report* r) {
    return r->res.exit_code;
}
int64_t mcrv_report_trace_consumed(const mcrv_report* r) {
    return r->res.trace_consumed;
}
int64_t mcrv_report_trace_total(const mcrv_report* r) {
    return r->res.trace_total;
}
int mcrv_report_has_counterexample(const mcrv_report* r) {
    return r->res.has_counterexample ? 1 : 0;
}
size_t mcrv_report_counterexample_len(const mcrv_report* r) {
    return r->res.counterexample.size();
}
uint64_t mcrv_report_counterexample_pick(const mcrv_report* r, size_t i) {
    return i < r->res.counterexample.size() ? r->res.counterexample[i] : 0;
}
size_t mcrv_report_unconsumed_len(const mcrv_report* r) {
    return r->res.unconsumed.size();
}
uint32_t mcrv_report_unconsumed_seq(const mcrv_report* r, size_t i) {
    return i < r->res.unconsumed.size() ? r->res.unconsumed[i] : 0;
}
char* mcrv_report_render(const mcrv_report* r) {
    return dup_string(render_report(r->res, false));
}
char* mcrv_report_render_kv(const mcrv_report* r) {
    return dup_string(render_report(r->res, true));
}
void mcrv_report_free(mcrv_report* r) {
    delete r;
}

mcrv_status mcrv_engine_new(const mcrv_program* p, const mcrv_config* c, size_t snapshot_ring,
                            mcrv_engine** out, char** errmsg) {
    *out = nullptr;
    if (c->cfg.mode == OsMode::Passthrough) {
        set_err(errmsg, "the simulator cannot run in passthrough mode: stepping back is snapshot-based");
        return MCRV_ERR_CONFIG;
    }
    Result<std::unique_ptr<Engine>> eng = Engine::create(p->prog, c->cfg, EngineMode::Run);
    if (!eng) {
        set_err(errmsg, eng.error());
        return classify(eng.error());
    }
    auto e = std::make_unique<mcrv_engine>();
    e->eng = eng.take();
    Result<MachineState> booted = e->eng->boot();
    if (!booted) {
        set_err(errmsg, booted.error());
        return classify(booted.error());
    }
    e->state = booted.take();
    if (snapshot_ring)
        e->ring = snapshot_ring;
    *out = e.release();
    return MCRV_OK;
}

const char* mcrv_engine_status(const mcrv_engine* e) {
    switch (e->state.status) {
    case VmStatus::Running: return "running";
    case VmStatus::Choice: return "choice";
    case VmStatus::Exited: return "exited";
    case VmStatus::Faulted: return "faulted";
    }
    return "?";
}

mcrv_status mcrv_engine_step(mcrv_engine* e, char** event_line) {
    return engine_one_step(e, event_line, nullptr);
}

mcrv_status mcrv_engine_back(mcrv_engine* e) {
    if (e->history.empty())
        return MCRV_ERR_RANGE;
    Result<MachineState> r = e->eng->restore(e->history.back());
    if (!r) {
        e->last_error = r.error();
        return MCRV_ERR_STATE;
    }
    e->history.pop_back();
    e->state = r.take();
    e->steps--;
    return MCRV_OK;
}

mcrv_status mcrv_engine_pick(mcrv_engine* e, uint64_t pick, char** errmsg) {
    if (e->state.status != VmStatus::Choice) {
        set_err(errmsg, "not at a choice point");
        return MCRV_ERR_STATE;
    }
    if (!push_history(*e)) {
        set_err(errmsg, e->last_error);
        return MCRV_ERR_STATE;
    }
    Status st = e->eng->resolve_choice(e->state, pick);
    if (!st.ok()) {
        e->history.pop_back();
        set_err(errmsg, st.error());
        return MCRV_ERR_RANGE;
    }
    e->steps++;
    return MCRV_OK;
}

mcrv_status mcrv_engine_run_to_syscall(mcrv_engine* e, char** event_line) {
    if (e->state.status != VmStatus::Running)
        return MCRV_ERR_STATE;
    for (;;) {
        StepOutcome o;
        mcrv_status st = engine_one_step(e, nullptr, &o);
        if (st != MCRV_OK)
            return st;
        bool stop = e->state.status != VmStatus::Running || (o.event == StepEvent::Syscall && o.sys_completed);
        if (stop) {
            if (event_line)
                *event_line = dup_string(event_text(*e, o));
            return MCRV_OK;
        }
    }
}

mcrv_status mcrv_engine_run_to_choice(mcrv_engine* e, char** event_line) {
    if (e->state.status != VmStatus::Running)
        return MCRV_ERR_STATE;
    for (;;) {
        StepOutcome o;
        mcrv_status st = engine_one_step(e, nullptr, &o);
        if (st != MCRV_OK)
            return st;
        if (e->state.status != VmStatus::Running) {
            if (event_line)
                *event_line = dup_string(event_text(*e, o));
            return MCRV_OK;
        }
    }
}

uint32_t mcrv_engine_choice_arity(const mcrv_engine* e) {
    return e->state.status == VmStatus::Choice ? e->state.choice.arity : 0;
}

uint64_t mcrv_engine_steps_taken(const mcrv_engine* e) {
    return e->steps;
}

char* mcrv_engine_location(const mcrv_engine* e) {
    return dup_string(location_line(*e));
}

char* mcrv_engine_regs(const mcrv_engine* e) {
    const MachineState& s = e->state;
    std::string out;
    for (u32 t = 0; t < s.threads.size(); t++) {
        const ThreadState& th = s.threads[t];
        out += "thread " + std::to_string(t);
        switch (th.status) {
        case ThreadState::Status::Runnable: out += " (runnable"; break;
        case ThreadState::Status::Waiting: out += " (waiting"; break;
        case ThreadState::Status::Exited: out += " (exited"; break;
        }
        if (t == s.current)
            out += ", current";
        out += ")";
        if (th.status == ThreadState::Status::Exited) {
            out += " result " + std::to_string(th.result) + "\n";
            continue;
        }
        const Frame& fr = th.frames.back();
        const Function& fn = e->eng->program().functions[fr.fn];
        out += " at " + fn.name + ":" + fn.blocks[fr.block].label + ":" + std::to_string(fr.instr) + ", " +
               std::to_string(th.frames.size()) + " frame(s)\n";
        for (u32 i = 0; i < fr.regs.size(); i++) {
            const RegValue& r = fr.regs[i];
            out += "  r" + std::to_string(i) + " = ";
            if (!r.init)
                out += "<uninit>";
            else if (r.is_ptr)
                out += "ptr obj " + std::to_string(ptr_obj(r.raw)) + " off " + std::to_string(ptr_off(r.raw));
            else
                out += std::to_string(r.raw);
            out += "\n";
        }
    }
    return dup_string(out);
}

mcrv_status mcrv_engine_mem(const mcrv_engine* e, uint64_t obj, uint64_t off, uint64_t len, char** dump,
                            char** errmsg) {
    *dump = nullptr;
    auto it = e->state.heap.find(static_cast<u32>(obj));
    if (it == e->state.heap.end()) {
        set_err(errmsg, "no object " + std::to_string(obj));
        return MCRV_ERR_RANGE;
    }
    const auto& bytes = it->second.bytes;
    if (off > bytes.size() || len > bytes.size() - off) {
        set_err(errmsg, "range out of bounds; object size " + std::to_string(bytes.size()));
        return MCRV_ERR_RANGE;
    }
    std::string out;
    for (u64 base = off; base < off + len; base += 16) {
        char head[32];
        std::snprintf(head, sizeof head, "%08llx  ", static_cast<unsigned long long>(base));
        out += head;
        std::string ascii;
        for (u64 i = base; i < base + 16 && i < off + len; i++) {
            char hx[4];
            std::snprintf(hx, sizeof hx, "%02x ", bytes[i]);
            out += hx;
            ascii += bytes[i] >= 0x20 && bytes[i] < 0x7f ? static_cast<char>(bytes[i]) : '.';
        }
        out += " |" + ascii + "|\n";
    }
    *dump = dup_string(out);
    return MCRV_OK;
}

char* mcrv_engine_digest_hex(const mcrv_engine* e) {
    return dup_string(digest_hex(e->eng->digest(e->state)));
}

void mcrv_engine_trace_pos(const mcrv_engine* e, int64_t* consumed, int64_t* total) {
    if (consumed)
        *consumed = Engine::trace_consumed(e->state);
    if (total)
        *total = e->eng->trace_total();
}

char* mcrv_engine_fault(const mcrv_engine* e) {
    if (e->state.status != VmStatus::Faulted)
        return dup_string("");
    const FaultInfo& f = e->state.fault;
    std::string s = std::string(fault_kind_name(f.kind)) + " at " + fault_location(e->eng->program(), f) +
                    " (thread " + std::to_string(f.thread) + ")";
    if (!f.detail.empty())
        s += ": " + f.detail;
    return dup_string(s);
}

void mcrv_engine_free(mcrv_engine* e) {
    delete e;
}

mcrv_status mcrv_trace_load(const char* path, mcrv_trace** out, char** errmsg) {
    *out = nullptr;
    Result<Trace> t = load_trace(path);
    if (!t) {
        set_err(errmsg, t.error());
        return MCRV_ERR_IO;
    }
    auto h = std::make_unique<mcrv_trace>();
    h->trace = t.take();
    *out = h.release();
    return MCRV_OK;
}

size_t mcrv_trace_record_count(const mcrv_trace* t) {
    return t->trace.records.size();
}

char* mcrv_trace_show(const mcrv_trace* t) {
    std::string out = "trace version " + std::to_string(t->trace.version) + ", " +
                      std::to_string(t->trace.records.size()) + " record(s)\n";
    for (const auto& rec : t->trace.records)
        out += render_record(rec) + "\n";
    return dup_string(out);
}

char* mcrv_trace_order(const mcrv_trace* t, int as_dot) {
    if (!t->order)
        const_cast<mcrv_trace*>(t)->order = std::make_unique<CausalOrder>(causal_order(t->trace));
    auto edges = t->order->hasse();
    std::string out;
    if (as_dot) {
        out += "digraph trace {\n";
        for (const auto& rec : t->trace.records) {
            const SyscallSpec* spec = find_syscall(rec.number);
            out += "  " + std::to_string(rec.seq) + " [label=\"" + std::to_string(rec.seq) + ": " +
                   (spec ? spec->name : std::to_string(rec.number)) + "\"];\n";
        }
        for (auto [i, j] : edges)
            out += "  " + std::to_string(i) + " -> " + std::to_string(j) + ";\n";
        out += "}\n";
    } else {
        out += std::to_string(t->trace.records.size()) + " record(s), " + std::to_string(edges.size()) +
               " direct ordering edge(s)\n";
        for (auto [i, j] : edges)
            out += std::to_string(i) + " -> " + std::to_string(j) + "\n";
    }
    return dup_string(out);
}

void mcrv_trace_free(mcrv_trace* t) {
    delete t;
}

} // extern "C"
