#include "vm.hpp"

#include <cstring>

namespace mcrv {

const char* fault_kind_name(FaultKind k) {
    switch (k) {
    case FaultKind::AssertionFailure: return "assertion-failure";
    case FaultKind::MemoryError: return "memory-error";
    case FaultKind::UninitializedRegister: return "uninitialized-register";
    case FaultKind::DivisionByZero: return "division-by-zero";
    case FaultKind::Deadlock: return "deadlock";
    case FaultKind::AssumeViolation: return "assume-violation";
    case FaultKind::InvalidSyscall: return "invalid-syscall";
    }
    return "?";
}

std::string fault_location(const GuestProgram& p, const FaultInfo& f) {
    if (f.fn >= p.functions.size())
        return "?";
    const Function& fn = p.functions[f.fn];
    if (f.block >= fn.blocks.size())
        return fn.name + ":?";
    return fn.name + ":" + fn.blocks[f.block].label + ":" + std::to_string(f.instr);
}

MachineState vm_boot(const GuestProgram& p) {
    MachineState s;
    for (size_t i = 0; i < p.pool.size(); i++) {
        HeapObject obj;
        obj.bytes = p.pool[i].bytes;
        s.heap.emplace(static_cast<u32>(i + 1), std::move(obj));
    }
    s.next_obj = static_cast<u32>(p.pool.size() + 1);
    ThreadState t;
    Frame fr;
    fr.fn = p.entry;
    fr.regs.resize(p.functions[p.entry].num_regs);
    t.frames.push_back(std::move(fr));
    s.threads.push_back(std::move(t));
    return s;
}

namespace {

constexpr size_t kMaxCallDepth = 1024;
constexpr u64 kMaxAllocBytes = 1ull << 30;

struct Interp {
    MachineState& s;
    const GuestProgram& p;
    SyscallPort& port;
    StepOutcome out;

    Interp(MachineState& s_, const GuestProgram& p_, SyscallPort& port_) : s(s_), p(p_), port(port_) {}

    const Instruction& instr_at(u32 thread) const {
        const Frame& fr = s.threads[thread].frames.back();
        return p.functions[fr.fn].blocks[fr.block].instrs[fr.instr];
    }

    void fault(FaultKind kind, std::string detail = {}) {
        const Frame& fr = s.top(s.current);
        s.status = VmStatus::Faulted;
        s.fault = FaultInfo{kind, fr.fn, fr.block, fr.instr, static_cast<i32>(s.current), std::move(detail)};
        out.event = StepEvent::Faulted;
    }

    const RegValue* reg_read(u32 idx) {
        const RegValue& r = s.top(s.current).regs[idx];
        if (!r.init) {
            fault(FaultKind::UninitializedRegister, "r" + std::to_string(idx) + " read before initialization");
            return nullptr;
        }
        return &r;
    }

    bool read_int(u32 idx, u64* out_val) {
        const RegValue* r = reg_read(idx);
        if (!r)
            return false;
        if (r->is_ptr) {
            fault(FaultKind::MemoryError, "pointer in r" + std::to_string(idx) + " used as an integer");
            return false;
        }
        *out_val = r->raw;
        return true;
    }

    void reg_write(u32 idx, u64 raw, bool is_ptr) {
        RegValue& r = s.top(s.current).regs[idx];
        r.raw = raw;
        r.is_ptr = is_ptr;
        r.init = true;
    }

    HeapObject* deref(const RegValue& r, const char* what) {
        if (!r.is_ptr) {
            fault(FaultKind::MemoryError, std::string(what) + " through a non-pointer value");
            return nullptr;
        }
        auto it = s.heap.find(ptr_obj(r.raw));
        if (it == s.heap.end()) {
            fault(FaultKind::MemoryError, std::string(what) + " of an unknown object id");
            return nullptr;
        }
        return &it->second;
    }

    bool range_ok(const HeapObject& obj, u64 off, u64 len, const char* what) {
        if (off > obj.bytes.size() || len > obj.bytes.size() - off) {
            fault(FaultKind::MemoryError, std::string(what) + " out of bounds: offset " + std::to_string(off) +
                                              ", length " + std::to_string(len) + ", object size " +
                                              std::to_string(obj.bytes.size()));
            return false;
        }
        return true;
    }

    // Pointer slots overlapping [off, off+len) must lie fully inside the
    // range; a partial overlap would expose raw pointer bytes and is a fault.
    bool collect_marks(const HeapObject& obj, u64 off, u64 len, std::vector<u32>* within) {
        for (u32 m : obj.ptr_marks) {
            if (static_cast<u64>(m) + 8 <= off)
                continue;
            if (m >= off + len)
                break;
            if (m < off || static_cast<u64>(m) + 8 > off + len) {
                fault(FaultKind::MemoryError, "partial access to a stored pointer at offset " + std::to_string(m));
                return false;
            }
            if (within)
                within->push_back(m);
        }
        return true;
    }

    bool shared_access(const Instruction& in, u32 thread) const {
        const Frame& fr = s.threads[thread].frames.back();
        auto shared_obj = [&](u32 reg_idx) {
            const RegValue& r = fr.regs[reg_idx];
            if (!r.init || !r.is_ptr)
                return false;
            auto it = s.heap.find(ptr_obj(r.raw));
            return it != s.heap.end() && it->second.touched_by.size() >= 2;
        };
        switch (in.op) {
        case Op::Load:
            return shared_obj(in.regs[1]);
        case Op::Store:
            return shared_obj(in.regs[0]);
        case Op::Memcpy:
            return shared_obj(in.regs[0]) || shared_obj(in.regs[1]);
        default:
            return false;
        }
    }

    bool preemptive(u32 thread) const {
        const Instruction& in = instr_at(thread);
        if (in.op == Op::Syscall)
            return true;
        return shared_access(in, thread);
    }

    void advance() { s.top(s.current).instr++; }

    // Scheduler decision; returns true when execution proceeds with s.current.
    bool schedule() {
        auto list = vm_selectable(s, port);
        if (list.empty()) {
            bool all_exited = true;
            u32 stuck = 0;
            for (u32 i = 0; i < s.threads.size(); i++)
                if (s.threads[i].status != ThreadState::Status::Exited) {
                    all_exited = false;
                    stuck = i;
                    break;
                }
            if (all_exited) {
                s.status = VmStatus::Exited;
                s.exit_code = static_cast<i64>(s.threads[0].result);
                out.event = StepEvent::Exited;
            } else {
                const Frame& fr = s.top(stuck);
                s.status = VmStatus::Faulted;
                s.fault = FaultInfo{FaultKind::Deadlock, fr.fn, fr.block, fr.instr, static_cast<i32>(stuck),
                                    "no thread is runnable"};
                out.event = StepEvent::Faulted;
            }
            return false;
        }
        if (list.size() >= 2) {
            s.status = VmStatus::Choice;
            s.choice = ChoiceRequest{ChoiceRequest::Origin::Scheduler, static_cast<u32>(list.size()), s.current};
            out.event = StepEvent::Choice;
            return false;
        }
        select_thread(list[0]);
        return true;
    }

    void select_thread(u32 t) {
        s.current = t;
        ThreadState& th = s.threads[t];
        if (th.status == ThreadState::Status::Waiting) {
            th.status = ThreadState::Status::Runnable;
            th.wait = WaitKey{};
        }
        s.preempt_cleared = true;
        s.resched = false;
    }

    void step() {
        ThreadState& cur = s.threads[s.current];
        bool cur_selectable = cur.status == ThreadState::Status::Runnable ||
                              (cur.status == ThreadState::Status::Waiting && port.wait_ready(s, cur.wait));
        bool need_sched = s.resched || !cur_selectable ||
                          (!s.preempt_cleared && cur.status == ThreadState::Status::Runnable &&
                           preemptive(s.current));
        if (need_sched && !schedule())
            return;
        ThreadState& sel = s.threads[s.current];
        if (sel.status == ThreadState::Status::Waiting) {
            sel.status = ThreadState::Status::Runnable;
            sel.wait = WaitKey{};
        }
        execute();
    }

    void execute() {
        const Instruction in = instr_at(s.current); // copy: the frame vector may reallocate on call
        s.preempt_cleared = false;

        // choose and syscall manage stepping themselves.
        if (in.op == Op::Choose) {
            s.status = VmStatus::Choice;
            s.choice = ChoiceRequest{ChoiceRequest::Origin::GuestChoose, static_cast<u32>(in.imm), s.current};
            out.event = StepEvent::Choice;
            return;
        }

        s.step_count++;
        switch (in.op) {
        case Op::Const:
            if (in.imm_is_pool)
                reg_write(in.regs[0], make_ptr(static_cast<u32>(in.imm) + 1, 0), true);
            else
                reg_write(in.regs[0], in.imm, false);
            advance();
            return;
        case Op::Mov: {
            const RegValue* src = reg_read(in.regs[1]);
            if (!src)
                return;
            RegValue v = *src;
            reg_write(in.regs[0], v.raw, v.is_ptr);
            advance();
            return;
        }
        case Op::Add:
        case Op::Sub: {
            const RegValue* ra = reg_read(in.regs[1]);
            if (!ra)
                return;
            RegValue a = *ra;
            const RegValue* rb = reg_read(in.regs[2]);
            if (!rb)
                return;
            RegValue b = *rb;
            if (a.is_ptr && b.is_ptr) {
                if (in.op == Op::Add) {
                    fault(FaultKind::MemoryError, "addition of two pointers");
                    return;
                }
                if (ptr_obj(a.raw) != ptr_obj(b.raw)) {
                    fault(FaultKind::MemoryError, "subtraction of pointers into different objects");
                    return;
                }
                u64 diff = static_cast<u64>(static_cast<i64>(ptr_off(a.raw)) - static_cast<i64>(ptr_off(b.raw)));
                reg_write(in.regs[0], diff, false);
                advance();
                return;
            }
            if (!a.is_ptr && !b.is_ptr) {
                reg_write(in.regs[0], in.op == Op::Add ? a.raw + b.raw : a.raw - b.raw, false);
                advance();
                return;
            }
            // Pointer +/- integer must stay within the object's offset space.
            if (in.op == Op::Sub && !a.is_ptr) {
                fault(FaultKind::MemoryError, "integer minus pointer");
                return;
            }
            RegValue ptr = a.is_ptr ? a : b;
            u64 delta = a.is_ptr ? b.raw : a.raw;
            u64 res = in.op == Op::Add ? ptr.raw + delta : ptr.raw - delta;
            if (ptr_obj(res) != ptr_obj(ptr.raw)) {
                fault(FaultKind::MemoryError, "pointer arithmetic leaves the object");
                return;
            }
            reg_write(in.regs[0], res, true);
            advance();
            return;
        }
        case Op::Mul:
        case Op::Divu: {
            u64 a, b;
            if (!read_int(in.regs[1], &a) || !read_int(in.regs[2], &b))
                return;
            if (in.op == Op::Divu && b == 0) {
                fault(FaultKind::DivisionByZero, "divu by zero");
                return;
            }
            reg_write(in.regs[0], in.op == Op::Mul ? a * b : a / b, false);
            advance();
            return;
        }
        case Op::CmpEq: {
            const RegValue* ra = reg_read(in.regs[1]);
            if (!ra)
                return;
            RegValue a = *ra;
            const RegValue* rb = reg_read(in.regs[2]);
            if (!rb)
                return;
            RegValue b = *rb;
            u64 result;
            if (a.is_ptr == b.is_ptr) {
                result = a.raw == b.raw ? 1 : 0;
            } else {
                // Pointer vs integer: only null checks keep digests canonical.
                u64 intval = a.is_ptr ? b.raw : a.raw;
                if (intval != 0) {
                    fault(FaultKind::MemoryError, "pointer compared with a nonzero integer");
                    return;
                }
                result = 0;
            }
            reg_write(in.regs[0], result, false);
            advance();
            return;
        }
        case Op::CmpLt: {
            const RegValue* ra = reg_read(in.regs[1]);
            if (!ra)
                return;
            RegValue a = *ra;
            const RegValue* rb = reg_read(in.regs[2]);
            if (!rb)
                return;
            RegValue b = *rb;
            if (a.is_ptr || b.is_ptr) {
                fault(FaultKind::MemoryError, "ordered comparison of a pointer");
                return;
            }
            reg_write(in.regs[0], a.raw < b.raw ? 1 : 0, false);
            advance();
            return;
        }
        case Op::Jmp: {
            Frame& fr = s.top(s.current);
            fr.block = in.block_a;
            fr.instr = 0;
            return;
        }
        case Op::Br: {
            u64 c;
            if (!read_int(in.regs[0], &c))
                return;
            Frame& fr = s.top(s.current);
            fr.block = c != 0 ? in.block_a : in.block_b;
            fr.instr = 0;
            return;
        }
        case Op::Call: {
            if (s.threads[s.current].frames.size() >= kMaxCallDepth) {
                fault(FaultKind::MemoryError, "call stack overflow");
                return;
            }
            const Function& callee = p.functions[in.callee];
            Frame nf;
            nf.fn = in.callee;
            nf.ret_reg = in.regs[0];
            nf.regs.resize(callee.num_regs);
            for (u32 i = 0; i < callee.num_params; i++) {
                const RegValue* a = reg_read(in.regs[1 + i]);
                if (!a)
                    return;
                nf.regs[i] = *a;
            }
            advance(); // caller resumes past the call once we return
            s.threads[s.current].frames.push_back(std::move(nf));
            return;
        }
        case Op::Ret: {
            const RegValue* v = reg_read(in.regs[0]);
            if (!v)
                return;
            RegValue val = *v;
            ThreadState& th = s.threads[s.current];
            if (th.frames.size() == 1) {
                th.status = ThreadState::Status::Exited;
                th.result = val.raw;
                s.resched = true; // thread exit is a scheduling point
                return;
            }
            u32 dst = th.frames.back().ret_reg;
            th.frames.pop_back();
            Frame& fr = th.frames.back();
            fr.regs[dst].raw = val.raw;
            fr.regs[dst].is_ptr = val.is_ptr;
            fr.regs[dst].init = true;
            return;
        }
        case Op::Alloc: {
            u64 size;
            if (!read_int(in.regs[1], &size))
                return;
            if (size > kMaxAllocBytes) {
                fault(FaultKind::MemoryError, "allocation of " + std::to_string(size) + " bytes exceeds the limit");
                return;
            }
            u32 id = s.next_obj++;
            HeapObject obj;
            obj.bytes.assign(size, 0);
            s.heap.emplace(id, std::move(obj));
            reg_write(in.regs[0], make_ptr(id, 0), true);
            advance();
            return;
        }
        case Op::Load: {
            const RegValue* rp = reg_read(in.regs[1]);
            if (!rp)
                return;
            RegValue pv = *rp;
            HeapObject* obj = deref(pv, "load");
            if (!obj)
                return;
            u64 off = ptr_off(pv.raw);
            u64 w = in.imm;
            if (!range_ok(*obj, off, w, "load"))
                return;
            bool is_ptr_load = w == 8 && obj->ptr_marks.count(static_cast<u32>(off)) > 0;
            if (!is_ptr_load && !collect_marks(*obj, off, w, nullptr))
                return;
            if (is_ptr_load) {
                u64 raw = 0;
                std::memcpy(&raw, obj->bytes.data() + off, 8);
                reg_write(in.regs[0], raw, true);
            } else {
                u64 raw = 0;
                std::memcpy(&raw, obj->bytes.data() + off, w);
                reg_write(in.regs[0], raw, false);
            }
            obj->touched_by.insert(s.current);
            advance();
            return;
        }
        case Op::Store: {
            const RegValue* rp = reg_read(in.regs[0]);
            if (!rp)
                return;
            RegValue pv = *rp;
            const RegValue* rv = reg_read(in.regs[1]);
            if (!rv)
                return;
            RegValue val = *rv;
            HeapObject* obj = deref(pv, "store");
            if (!obj)
                return;
            u64 off = ptr_off(pv.raw);
            u64 w = in.imm;
            if (!range_ok(*obj, off, w, "store"))
                return;
            if (val.is_ptr && w != 8) {
                fault(FaultKind::MemoryError, "pointer stored with width " + std::to_string(w));
                return;
            }
            bool exact_slot = w == 8 && obj->ptr_marks.count(static_cast<u32>(off)) > 0;
            if (!exact_slot && !collect_marks(*obj, off, w, nullptr))
                return;
            if (exact_slot)
                obj->ptr_marks.erase(static_cast<u32>(off));
            std::memcpy(obj->bytes.data() + off, &val.raw, w);
            if (val.is_ptr)
                obj->ptr_marks.insert(static_cast<u32>(off));
            obj->touched_by.insert(s.current);
            advance();
            return;
        }
        case Op::Memcpy: {
            const RegValue* rd = reg_read(in.regs[0]);
            if (!rd)
                return;
            RegValue dv = *rd;
            const RegValue* rs = reg_read(in.regs[1]);
            if (!rs)
                return;
            RegValue sv = *rs;
            u64 len;
            if (!read_int(in.regs[2], &len))
                return;
            HeapObject* dst = deref(dv, "memcpy destination");
            if (!dst)
                return;
            HeapObject* src = deref(sv, "memcpy source");
            if (!src)
                return;
            u64 doff = ptr_off(dv.raw), soff = ptr_off(sv.raw);
            if (!range_ok(*dst, doff, len, "memcpy destination") || !range_ok(*src, soff, len, "memcpy source"))
                return;
            std::vector<u32> src_marks, dst_marks;
            if (!collect_marks(*src, soff, len, &src_marks) || !collect_marks(*dst, doff, len, &dst_marks))
                return;
            std::vector<u8> tmp(src->bytes.begin() + soff, src->bytes.begin() + soff + len);
            for (u32 m : dst_marks)
                dst->ptr_marks.erase(m);
            std::memcpy(dst->bytes.data() + doff, tmp.data(), len);
            for (u32 m : src_marks)
                dst->ptr_marks.insert(static_cast<u32>(doff + (m - soff)));
            dst->touched_by.insert(s.current);
            src->touched_by.insert(s.current);
            advance();
            return;
        }
        case Op::Spawn: {
            const Function& callee = p.functions[in.callee];
            Frame nf;
            nf.fn = in.callee;
            nf.regs.resize(callee.num_regs);
            for (u32 i = 0; i < callee.num_params; i++) {
                const RegValue* a = reg_read(in.regs[i]);
                if (!a)
                    return;
                nf.regs[i] = *a;
            }
            ThreadState nt;
            nt.frames.push_back(std::move(nf));
            s.threads.push_back(std::move(nt));
            advance();
            s.resched = true;
            return;
        }
        case Op::Yield:
            advance();
            s.resched = true;
            return;
        case Op::Choose:
            return; // handled above
        case Op::Assume: {
            u64 c;
            if (!read_int(in.regs[0], &c))
                return;
            if (c == 0) {
                fault(FaultKind::AssumeViolation, "assume(false)");
                return;
            }
            advance();
            return;
        }
        case Op::Assert: {
            u64 c;
            if (!read_int(in.regs[0], &c))
                return;
            if (c == 0) {
                fault(FaultKind::AssertionFailure, "assertion failed");
                return;
            }
            advance();
            return;
        }
        case Op::Syscall: {
            std::vector<RegValue> args;
            args.reserve(in.regs.size() - 1);
            for (size_t i = 1; i < in.regs.size(); i++) {
                const RegValue* a = reg_read(in.regs[static_cast<u32>(i)]);
                if (!a)
                    return;
                args.push_back(*a);
            }
            out.event = StepEvent::Syscall;
            out.sys_number = static_cast<u32>(in.imm);
            SyscallOutcome so = port.guest_syscall(s, s.current, static_cast<u32>(in.imm), args);
            switch (so.kind) {
            case SyscallOutcome::Kind::Done:
                out.sys_completed = true;
                out.sys_retval = so.retval;
                out.sys_errno = so.err;
                reg_write(in.regs[0], static_cast<u64>(so.guest_rd), false);
                advance();
                return;
            case SyscallOutcome::Kind::Block: {
                ThreadState& th = s.threads[s.current];
                th.status = ThreadState::Status::Waiting;
                th.wait = so.wait;
                s.resched = true; // instruction not completed; retried on wake
                out.sys_completed = false;
                return;
            }
            case SyscallOutcome::Kind::Fault:
                fault(so.fault_kind, so.fault_detail);
                return;
            }
            return;
        }
        case Op::Exit: {
            i64 code;
            if (in.exit_val.is_reg) {
                u64 v;
                if (!read_int(static_cast<u32>(in.exit_val.value), &v))
                    return;
                code = static_cast<i64>(v);
            } else {
                code = static_cast<i64>(in.exit_val.value);
            }
            s.status = VmStatus::Exited;
            s.exit_code = code;
            out.event = StepEvent::Exited;
            return;
        }
        }
    }
};

} // namespace

StepOutcome vm_step(MachineState& s, const GuestProgram& p, SyscallPort& port) {
    Interp it(s, p, port);
    if (s.status != VmStatus::Running)
        return it.out;
    it.step();
    return it.out;
}

Status vm_resolve_choice(MachineState& s, const GuestProgram& p, SyscallPort& port, u64 pick) {
    if (s.status != VmStatus::Choice)
        return Err{"resolve_choice on a state that is not blocked on a choice"};
    if (pick >= s.choice.arity)
        return Err{"ChoiceOutOfRange: pick " + std::to_string(pick) + " of " + std::to_string(s.choice.arity)};
    if (s.choice.origin == ChoiceRequest::Origin::GuestChoose) {
        u32 t = s.choice.thread;
        Frame& fr = s.threads[t].frames.back();
        const Instruction& in = p.functions[fr.fn].blocks[fr.block].instrs[fr.instr];
        RegValue& r = fr.regs[in.regs[0]];
        r.raw = pick;
        r.is_ptr = false;
        r.init = true;
        fr.instr++;
        s.step_count++;
        s.status = VmStatus::Running;
        return ok_status();
    }
    auto list = vm_selectable(s, port);
    if (pick >= list.size())
        return Err{"ChoiceOutOfRange: pick " + std::to_string(pick) + " of " + std::to_string(list.size())};
    s.current = list[pick];
    ThreadState& th = s.threads[s.current];
    if (th.status == ThreadState::Status::Waiting) {
        th.status = ThreadState::Status::Runnable;
        th.wait = WaitKey{};
    }
    s.preempt_cleared = true;
    s.resched = false;
    s.status = VmStatus::Running;
    return ok_status();
}

std::vector<u32> vm_selectable(const MachineState& s, SyscallPort& port) {
    std::vector<u32> list;
    for (u32 i = 0; i < s.threads.size(); i++) {
        const ThreadState& t = s.threads[i];
        if (t.status == ThreadState::Status::Runnable)
            list.push_back(i);
        else if (t.status == ThreadState::Status::Waiting && port.wait_ready(s, t.wait))
            list.push_back(i);
    }
    return list;
}

} // namespace mcrv
