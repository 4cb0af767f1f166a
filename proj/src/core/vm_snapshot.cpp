#include <cstring>
#include <deque>

#include "vm.hpp"

namespace mcrv {

namespace {

constexpr u8 kSnapshotMagic[4] = {'M', 'C', 'S', 'S'};
constexpr u16 kSnapshotVersion = 1;
constexpr u64 kMaxSnapshotObject = 1ull << 30;

struct Renumber {
    std::map<u32, u32> map; // old id -> canonical id

    u64 rewrite(u64 raw) const {
        auto it = map.find(ptr_obj(raw));
        return it == map.end() ? raw : make_ptr(it->second, ptr_off(raw));
    }
};

// First-reference order over registers (threads ascending, frames outermost
// first, registers ascending), then pointer slots of each visited object in
// offset order. Unreachable objects cannot influence guest behavior and are
// dropped from the digest.
Renumber build_renumber(const MachineState& s) {
    Renumber rn;
    std::deque<u32> queue;
    u32 next = 1;
    auto visit = [&](u64 raw) {
        u32 obj = ptr_obj(raw);
        if (s.heap.count(obj) && !rn.map.count(obj)) {
            rn.map[obj] = next++;
            queue.push_back(obj);
        }
    };
    for (const auto& t : s.threads)
        for (const auto& fr : t.frames)
            for (const auto& r : fr.regs)
                if (r.init && r.is_ptr)
                    visit(r.raw);
    while (!queue.empty()) {
        u32 obj = queue.front();
        queue.pop_front();
        const HeapObject& o = s.heap.at(obj);
        for (u32 m : o.ptr_marks) {
            u64 raw = 0;
            std::memcpy(&raw, o.bytes.data() + m, 8);
            visit(raw);
        }
    }
    return rn;
}

void write_state(ByteWriter& w, const MachineState& s, const Renumber* rn, bool include_step_count) {
    w.u8v(static_cast<u8>(s.status));
    w.i64v(s.exit_code);
    w.u8v(static_cast<u8>(s.fault.kind));
    w.u32v(s.fault.fn);
    w.u32v(s.fault.block);
    w.u32v(s.fault.instr);
    w.i32v(s.fault.thread);
    w.str(s.fault.detail);
    w.u8v(static_cast<u8>(s.choice.origin));
    w.u32v(s.choice.arity);
    w.u32v(s.choice.thread);
    w.u32v(s.current);
    w.boolean(s.preempt_cleared);
    w.boolean(s.resched);
    if (include_step_count)
        w.u64v(s.step_count);
    w.u32v(s.next_obj);

    w.u64v(s.threads.size());
    for (const auto& t : s.threads) {
        w.u8v(static_cast<u8>(t.status));
        w.u8v(static_cast<u8>(t.wait.kind));
        w.u64v(t.wait.id);
        w.u64v(t.result);
        w.u64v(t.frames.size());
        for (const auto& fr : t.frames) {
            w.u32v(fr.fn);
            w.u32v(fr.block);
            w.u32v(fr.instr);
            w.u32v(fr.ret_reg);
            w.u64v(fr.regs.size());
            for (const auto& r : fr.regs) {
                u64 raw = (rn && r.init && r.is_ptr) ? rn->rewrite(r.raw) : r.raw;
                w.u64v(r.init ? raw : 0);
                w.u8v(static_cast<u8>((r.init ? 1 : 0) | (r.is_ptr ? 2 : 0)));
            }
        }
    }

    if (!rn) {
        w.u64v(s.heap.size());
        for (const auto& [id, obj] : s.heap) {
            w.u32v(id);
            w.blob(obj.bytes);
            w.u64v(obj.ptr_marks.size());
            for (u32 m : obj.ptr_marks)
                w.u32v(m);
            w.u64v(obj.touched_by.size());
            for (u32 t : obj.touched_by)
                w.u32v(t);
        }
    } else {
        // Canonical id order; pointer slot contents rewritten.
        std::map<u32, u32> inverse;
        for (const auto& [old_id, new_id] : rn->map)
            inverse[new_id] = old_id;
        w.u64v(inverse.size());
        for (const auto& [new_id, old_id] : inverse) {
            const HeapObject& obj = s.heap.at(old_id);
            w.u32v(new_id);
            std::vector<u8> bytes = obj.bytes;
            for (u32 m : obj.ptr_marks) {
                u64 raw = 0;
                std::memcpy(&raw, bytes.data() + m, 8);
                raw = rn->rewrite(raw);
                std::memcpy(bytes.data() + m, &raw, 8);
            }
            w.blob(bytes);
            w.u64v(obj.ptr_marks.size());
            for (u32 m : obj.ptr_marks)
                w.u32v(m);
            w.u64v(obj.touched_by.size());
            for (u32 t : obj.touched_by)
                w.u32v(t);
        }
    }
    s.os.write(w);
}

} // namespace

std::vector<u8> vm_snapshot(const MachineState& s) {
    ByteWriter w;
    w.bytes(kSnapshotMagic, 4);
    w.u16v(kSnapshotVersion);
    write_state(w, s, nullptr, true);
    return w.take();
}

Result<MachineState> vm_restore(const std::vector<u8>& bytes, const GuestProgram& p) {
    ByteReader r(bytes);
    u8 magic[4];
    if (!r.bytes(magic, 4) || std::memcmp(magic, kSnapshotMagic, 4) != 0)
        return Err{"DeserializeError: bad snapshot magic"};
    u16 version = r.u16v();
    if (version != kSnapshotVersion)
        return Err{"DeserializeError: unsupported snapshot version " + std::to_string(version)};

    MachineState s;
    u8 status = r.u8v();
    if (status > 3)
        return Err{"DeserializeError: bad status"};
    s.status = static_cast<VmStatus>(status);
    s.exit_code = r.i64v();
    u8 fk = r.u8v();
    if (fk > 6)
        return Err{"DeserializeError: bad fault kind"};
    s.fault.kind = static_cast<FaultKind>(fk);
    s.fault.fn = r.u32v();
    s.fault.block = r.u32v();
    s.fault.instr = r.u32v();
    s.fault.thread = r.i32v();
    s.fault.detail = r.str(1u << 20);
    u8 origin = r.u8v();
    if (origin > 1)
        return Err{"DeserializeError: bad choice origin"};
    s.choice.origin = static_cast<ChoiceRequest::Origin>(origin);
    s.choice.arity = r.u32v();
    s.choice.thread = r.u32v();
    s.current = r.u32v();
    s.preempt_cleared = r.boolean();
    s.resched = r.boolean();
    s.step_count = r.u64v();
    s.next_obj = r.u32v();

    u64 nthreads = r.u64v();
    if (r.failed() || nthreads == 0 || nthreads > (1u << 20))
        return Err{"DeserializeError: bad thread count"};
    for (u64 ti = 0; ti < nthreads; ti++) {
        ThreadState t;
        u8 tstatus = r.u8v();
        if (tstatus > 2)
            return Err{"DeserializeError: bad thread status"};
        t.status = static_cast<ThreadState::Status>(tstatus);
        u8 wk = r.u8v();
        if (wk > 4)
            return Err{"DeserializeError: bad wait kind"};
        t.wait.kind = static_cast<WaitKey::Kind>(wk);
        t.wait.id = r.u64v();
        t.result = r.u64v();
        u64 nframes = r.u64v();
        if (r.failed() || nframes == 0 || nframes > (1u << 20))
            return Err{"DeserializeError: bad frame count"};
        for (u64 fi = 0; fi < nframes; fi++) {
            Frame fr;
            fr.fn = r.u32v();
            fr.block = r.u32v();
            fr.instr = r.u32v();
            fr.ret_reg = r.u32v();
            if (r.failed() || fr.fn >= p.functions.size())
                return Err{"DeserializeError: frame function out of range"};
            const Function& fn = p.functions[fr.fn];
            if (fr.block >= fn.blocks.size() || fr.instr > fn.blocks[fr.block].instrs.size())
                return Err{"DeserializeError: frame position out of range"};
            u64 nregs = r.u64v();
            if (r.failed() || nregs != fn.num_regs)
                return Err{"DeserializeError: register count mismatch"};
            fr.regs.resize(nregs);
            for (u64 ri = 0; ri < nregs; ri++) {
                fr.regs[ri].raw = r.u64v();
                u8 flags = r.u8v();
                if (flags > 3)
                    return Err{"DeserializeError: bad register flags"};
                fr.regs[ri].init = flags & 1;
                fr.regs[ri].is_ptr = flags & 2;
            }
            t.frames.push_back(std::move(fr));
        }
        s.threads.push_back(std::move(t));
    }
    if (s.current >= s.threads.size())
        return Err{"DeserializeError: current thread out of range"};

    u64 nobjs = r.u64v();
    if (r.failed() || nobjs > (1u << 24))
        return Err{"DeserializeError: bad heap size"};
    for (u64 oi = 0; oi < nobjs; oi++) {
        u32 id = r.u32v();
        HeapObject obj;
        obj.bytes = r.blob(kMaxSnapshotObject);
        u64 nmarks = r.u64v();
        if (r.failed() || nmarks > obj.bytes.size())
            return Err{"DeserializeError: bad pointer mark count"};
        for (u64 mi = 0; mi < nmarks; mi++) {
            u32 m = r.u32v();
            if (static_cast<u64>(m) + 8 > obj.bytes.size())
                return Err{"DeserializeError: pointer mark out of range"};
            obj.ptr_marks.insert(m);
        }
        u64 ntouch = r.u64v();
        if (r.failed() || ntouch > s.threads.size())
            return Err{"DeserializeError: bad touch set"};
        for (u64 ui = 0; ui < ntouch; ui++)
            obj.touched_by.insert(r.u32v());
        if (s.heap.count(id))
            return Err{"DeserializeError: duplicate heap object"};
        s.heap.emplace(id, std::move(obj));
    }
    if (!s.os.read(r))
        return Err{"DeserializeError: bad OS state"};
    if (r.failed() || !r.at_end())
        return Err{"DeserializeError: trailing or truncated data at offset " + std::to_string(r.offset())};
    return s;
}

Digest vm_state_digest(const MachineState& s) {
    Renumber rn = build_renumber(s);
    ByteWriter w;
    w.bytes("MCSD", 4);
    write_state(w, s, &rn, false);
    return sha256(w.data());
}

} // namespace mcrv
