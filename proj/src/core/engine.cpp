#include "engine.hpp"

#include <cstring>

namespace mcrv {

std::atomic<int> Engine::passthrough_sessions_{0};

namespace {

std::vector<std::string> default_stack(OsMode mode) {
    switch (mode) {
    case OsMode::Virtual: return {"vproc", "vsock", "vfs"};
    case OsMode::Passthrough: return {"passthrough"};
    case OsMode::Replay: return {"replay"};
    }
    return {};
}

} // namespace

Result<std::vector<SocketScriptEntry>> parse_socket_script(const std::string& text) {
    std::vector<SocketScriptEntry> entries;
    std::string addr;
    std::optional<std::vector<u8>> pending_req;
    size_t line_no = 0;
    size_t pos = 0;
    while (pos <= text.size()) {
        size_t eol = text.find('\n', pos);
        if (eol == std::string::npos)
            eol = text.size();
        std::string line = text.substr(pos, eol - pos);
        pos = eol + 1;
        line_no++;
        size_t i = 0;
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t'))
            i++;
        if (i >= line.size() || line[i] == '#') {
            if (eol == text.size())
                break;
            continue;
        }
        size_t sp = line.find(' ', i);
        if (sp == std::string::npos)
            return Err{"socket script line " + std::to_string(line_no) + ": expected `key \"value\"`"};
        std::string key = line.substr(i, sp - i);
        size_t q1 = line.find('"', sp);
        size_t q2 = line.rfind('"');
        if (q1 == std::string::npos || q2 <= q1)
            return Err{"socket script line " + std::to_string(line_no) + ": missing quoted value"};
        std::string raw = line.substr(q1 + 1, q2 - q1 - 1);
        std::vector<u8> value;
        for (size_t k = 0; k < raw.size(); k++) {
            if (raw[k] != '\\') {
                value.push_back(static_cast<u8>(raw[k]));
                continue;
            }
            if (k + 1 >= raw.size())
                return Err{"socket script line " + std::to_string(line_no) + ": dangling escape"};
            char e = raw[++k];
            switch (e) {
            case '\\': value.push_back('\\'); break;
            case '"': value.push_back('"'); break;
            case 'n': value.push_back('\n'); break;
            case 'r': value.push_back('\r'); break;
            case 't': value.push_back('\t'); break;
            case '0': value.push_back(0); break;
            case 'x': {
                auto hexval = [](char c) -> int {
                    if (c >= '0' && c <= '9') return c - '0';
                    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
                    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
                    return -1;
                };
                if (k + 2 >= raw.size() || hexval(raw[k + 1]) < 0 || hexval(raw[k + 2]) < 0)
                    return Err{"socket script line " + std::to_string(line_no) + ": malformed \\xNN escape"};
                value.push_back(static_cast<u8>(hexval(raw[k + 1]) * 16 + hexval(raw[k + 2])));
                k += 2;
                break;
            }
            default:
                return Err{"socket script line " + std::to_string(line_no) + ": unknown escape"};
            }
        }
        if (key == "addr") {
            addr = std::string(value.begin(), value.end());
            pending_req.reset();
        } else if (key == "req") {
            if (addr.empty())
                return Err{"socket script line " + std::to_string(line_no) + ": req before any addr"};
            if (pending_req)
                return Err{"socket script line " + std::to_string(line_no) + ": req without a resp"};
            pending_req = value;
        } else if (key == "resp") {
            if (addr.empty() || !pending_req)
                return Err{"socket script line " + std::to_string(line_no) + ": resp without a req"};
            entries.push_back(SocketScriptEntry{addr, *pending_req, value});
            pending_req.reset();
        } else {
            return Err{"socket script line " + std::to_string(line_no) + ": unknown key '" + key + "'"};
        }
        if (eol == text.size())
            break;
    }
    if (pending_req)
        return Err{"socket script: trailing req without a resp"};
    return entries;
}

Result<std::unique_ptr<Engine>> Engine::create(const GuestProgram& p, const OsConfig& cfg, EngineMode mode,
                                               std::unique_ptr<HostBackend> backend,
                                               std::vector<std::unique_ptr<Component>> extra) {
    if (cfg.mode == OsMode::Passthrough && mode == EngineMode::Verify)
        return Err{"mode matrix violation: the passthrough OS mode can only be used in the run mode"};
    if ((cfg.mode == OsMode::Passthrough || cfg.mode == OsMode::Replay) && cfg.trace_path.empty())
        return Err{std::string("OsInitError: ") + os_mode_name(cfg.mode) + " mode requires a trace path"};

    std::unique_ptr<Engine> eng(new Engine(p, cfg, mode));

    if (cfg.mode == OsMode::Replay) {
        Result<Trace> t = load_trace(cfg.trace_path);
        if (!t)
            return Err{"OsInitError: cannot load trace '" + cfg.trace_path + "': " + t.error()};
        eng->trace_ = t.take();
        eng->order_ = causal_order(*eng->trace_);
    }
    if (cfg.mode == OsMode::Passthrough) {
        int expected = 0;
        if (!passthrough_sessions_.compare_exchange_strong(expected, 1))
            return Err{"OsInitError: another passthrough session is active in this process"};
        eng->holds_passthrough_session_ = true;
        Status st = eng->writer_.open(cfg.trace_path);
        if (!st.ok())
            return Err{"OsInitError: " + st.error()};
        eng->backend_owned_ = backend ? std::move(backend) : make_real_backend();
        eng->backend_ = eng->backend_owned_.get();
    } else if (backend) {
        // Held but never consulted outside passthrough; tests install a
        // poisoned backend here to prove it.
        eng->backend_owned_ = std::move(backend);
        eng->backend_ = eng->backend_owned_.get();
    }

    std::vector<std::string> names = cfg.components;
    if (names.empty()) {
        for (const auto& c : extra)
            names.push_back(c->name());
        for (auto& n : default_stack(cfg.mode))
            names.push_back(std::move(n));
    }
    for (const std::string& n : names) {
        std::unique_ptr<Component> comp;
        for (auto& e : extra)
            if (e && e->name() == n) {
                comp = std::move(e);
                break;
            }
        if (!comp)
            comp = make_component(n);
        if (!comp)
            return Err{"OsInitError: unknown component '" + n + "'"};
        eng->stack_.push_back(std::move(comp));
    }
    if (eng->stack_.empty())
        return Err{"OsInitError: empty component stack"};
    return eng;
}

Engine::~Engine() {
    if (holds_passthrough_session_)
        passthrough_sessions_.store(0);
}

Result<MachineState> Engine::boot() {
    MachineState s = vm_boot(prog_);
    s.os.mode = cfg_.mode;
    if (cfg_.mode == OsMode::Virtual) {
        for (const auto& [path, bytes] : cfg_.vfs_preload) {
            // Create missing parent directories for preloaded files.
            size_t pos = 0;
            for (;;) {
                pos = path.find('/', pos);
                if (pos == std::string::npos)
                    break;
                std::string prefix = path.substr(0, pos);
                auto it = s.os.vfs.files.find(prefix);
                if (it == s.os.vfs.files.end()) {
                    FileNode dir;
                    dir.is_dir = true;
                    s.os.vfs.files.emplace(prefix, std::move(dir));
                } else if (!it->second.is_dir) {
                    return Err{"OsInitError: preload path '" + path + "' crosses a non-directory"};
                }
                pos++;
            }
            FileNode node;
            node.bytes = bytes;
            s.os.vfs.files[path] = std::move(node);
        }
    }
    if (cfg_.mode == OsMode::Replay)
        s.os.cursor = replay_cursor(*trace_);
    return s;
}

Result<std::vector<u8>> Engine::snapshot(const MachineState& s) const {
    if (cfg_.mode == OsMode::Passthrough)
        return Err{"SnapshotForbidden: passthrough effects cannot be undone or replayed"};
    return vm_snapshot(s);
}

Result<MachineState> Engine::restore(const std::vector<u8>& bytes) const {
    if (cfg_.mode == OsMode::Passthrough)
        return Err{"SnapshotForbidden: passthrough effects cannot be undone or replayed"};
    return vm_restore(bytes, prog_);
}

std::vector<const SocketScriptEntry*> Engine::script_for(const std::string& addr) const {
    std::vector<const SocketScriptEntry*> out;
    for (const auto& e : cfg_.socket_script)
        if (e.addr == addr)
            out.push_back(&e);
    return out;
}

SyscallOutcome Engine::guest_syscall(MachineState& s, u32 thread, u32 number, const std::vector<RegValue>& args) {
    SyscallOutcome out;
    auto fault = [&](FaultKind k, std::string detail) {
        out.kind = SyscallOutcome::Kind::Fault;
        out.fault_kind = k;
        out.fault_detail = std::move(detail);
        return out;
    };

    const SyscallSpec* spec = find_syscall(number);
    if (!spec)
        return fault(FaultKind::InvalidSyscall, "syscall number " + std::to_string(number) + " is not in the table");
    if (args.size() != spec->args.size())
        return fault(FaultKind::InvalidSyscall, spec->name + " takes " + std::to_string(spec->args.size()) +
                                                    " arguments, guest passed " + std::to_string(args.size()));

    DecodedCall call;
    call.spec = spec;
    call.args.resize(args.size());
    for (size_t i = 0; i < args.size(); i++) {
        const ArgSpec& as = spec->args[i];
        DecodedArg& da = call.args[i];
        if (!as.is_buffer()) {
            if (args[i].is_ptr)
                return fault(FaultKind::MemoryError,
                             "pointer passed as scalar argument " + std::to_string(i) + " of " + spec->name);
            da.scalar = args[i].raw;
            continue;
        }
        if (!args[i].is_ptr)
            return fault(FaultKind::MemoryError,
                         "non-pointer passed as buffer argument " + std::to_string(i) + " of " + spec->name);
        da.obj = ptr_obj(args[i].raw);
        da.off = ptr_off(args[i].raw);
        u64 len = as.size_from >= 0 ? scalar_of(args, *spec, static_cast<size_t>(as.size_from)) : as.fixed_size;
        da.len = len;
        auto hit = s.heap.find(da.obj);
        if (hit == s.heap.end())
            return fault(FaultKind::MemoryError, "buffer argument " + std::to_string(i) + " of " + spec->name +
                                                     " references an unknown object");
        HeapObject& obj = hit->second;
        if (da.off > obj.bytes.size() || len > obj.bytes.size() - da.off)
            return fault(FaultKind::MemoryError, "buffer argument " + std::to_string(i) + " of " + spec->name +
                                                     " out of bounds: offset " + std::to_string(da.off) +
                                                     ", length " + std::to_string(len) + ", object size " +
                                                     std::to_string(obj.bytes.size()));
        // Pointer slots must not leak into the OS, and output ranges may
        // only replace whole slots.
        for (u32 m : obj.ptr_marks) {
            if (static_cast<u64>(m) + 8 <= da.off)
                continue;
            if (m >= da.off + len)
                break;
            if (as.kind == ArgSpec::Kind::BufferIn)
                return fault(FaultKind::MemoryError, "buffer argument " + std::to_string(i) + " of " + spec->name +
                                                         " overlaps a stored pointer at offset " + std::to_string(m));
            if (m < da.off || static_cast<u64>(m) + 8 > da.off + len)
                return fault(FaultKind::MemoryError, "output buffer of " + spec->name +
                                                         " partially overlaps a stored pointer at offset " +
                                                         std::to_string(m));
        }
        if (as.kind == ArgSpec::Kind::BufferIn)
            da.bytes.assign(obj.bytes.begin() + da.off, obj.bytes.begin() + da.off + len);
    }

    CallContext ctx{*this, s, thread, call};
    Disposition d = Disposition::failure(PE_ENOSYS);
    for (auto& comp : stack_) {
        if (comp->implements(number)) {
            d = comp->handle(ctx);
            break;
        }
    }

    switch (d.kind) {
    case Disposition::Kind::Fatal:
        set_fatal(d.detail);
        return fault(FaultKind::AssumeViolation, "fatal OS error: " + d.detail);
    case Disposition::Kind::Fault:
        return fault(d.fault_kind, std::move(d.detail));
    case Disposition::Kind::Block:
        out.kind = SyscallOutcome::Kind::Block;
        out.wait = d.wait_key;
        return out;
    case Disposition::Kind::Done:
        break;
    }

    // Non-blocking host results park the calling thread and retry later.
    if (d.err == PE_EAGAIN) {
        out.kind = SyscallOutcome::Kind::Block;
        out.wait = WaitKey{WaitKey::Kind::HostRetry, 0};
        return out;
    }

    // Write outputs back: exactly the declared ranges, zero-filled tails.
    size_t out_idx = 0;
    for (size_t i = 0; i < spec->args.size(); i++) {
        if (!spec->args[i].is_output())
            continue;
        const DecodedArg& da = call.args[i];
        std::vector<u8> bytes = out_idx < d.outputs.size() ? std::move(d.outputs[out_idx]) : std::vector<u8>{};
        out_idx++;
        bytes.resize(da.len, 0);
        HeapObject& obj = s.heap[da.obj];
        for (auto mit = obj.ptr_marks.lower_bound(da.off >= 7 ? da.off - 7 : 0); mit != obj.ptr_marks.end();) {
            if (*mit >= da.off + da.len)
                break;
            if (*mit >= da.off)
                mit = obj.ptr_marks.erase(mit);
            else
                ++mit;
        }
        std::memcpy(obj.bytes.data() + da.off, bytes.data(), da.len);
    }

    out.kind = SyscallOutcome::Kind::Done;
    out.retval = d.retval;
    out.err = d.err;
    out.guest_rd = d.err != 0 ? -static_cast<i64>(d.err) : d.retval;
    return out;
}

u64 Engine::scalar_of(const std::vector<RegValue>& args, const SyscallSpec& spec, size_t idx) {
    if (idx >= args.size() || spec.args[idx].is_buffer() || args[idx].is_ptr)
        return 0; // table invariant: size-from always names a scalar-in
    u64 v = args[idx].raw;
    return spec.args[idx].kind == ArgSpec::Kind::ScalarIn32 ? (v & 0xffffffffull) : v;
}

bool Engine::wait_ready(const MachineState& s, const WaitKey& k) const {
    switch (k.kind) {
    case WaitKey::Kind::None:
    case WaitKey::Kind::HostRetry:
        return true;
    case WaitKey::Kind::PipeRead: {
        auto it = s.os.vfs.pipes.find(k.id);
        if (it == s.os.vfs.pipes.end())
            return true; // retry reports EBADF
        return !it->second.data.empty() || !it->second.write_open;
    }
    case WaitKey::Kind::PipeWrite: {
        auto it = s.os.vfs.pipes.find(k.id);
        if (it == s.os.vfs.pipes.end())
            return true;
        return it->second.data.size() < kPipeCapacity || !it->second.read_open;
    }
    case WaitKey::Kind::SockRecv: {
        auto it = s.os.vfs.sockets.find(static_cast<i32>(k.id));
        if (it == s.os.vfs.sockets.end())
            return true;
        const SockSession& sess = it->second;
        if (!sess.rx.empty())
            return true;
        auto entries = script_for(sess.addr);
        for (size_t i = 0; i < entries.size() && i < sess.entry_used.size(); i++)
            if (!sess.entry_used[i])
                return false; // a future send may still produce data
        return true; // EOF
    }
    }
    return true;
}

} // namespace mcrv
