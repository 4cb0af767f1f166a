#pragma once

#include <atomic>
#include <optional>

#include "os.hpp"
#include "replay.hpp"

namespace mcrv {

struct SocketScriptEntry {
    std::string addr;
    std::vector<u8> req; // request pattern; empty matches any send
    std::vector<u8> resp;
};

struct OsConfig {
    OsMode mode = OsMode::Virtual;
    std::vector<std::string> components; // empty: the mode's default stack
    std::vector<std::pair<std::string, std::vector<u8>>> vfs_preload;
    std::string trace_path;
    Matching matching = Matching::Exact;
    std::vector<SocketScriptEntry> socket_script;
};

enum class EngineMode : u8 { Run = 0, Verify = 1 };

// Script format: lines of `addr "ip:port"`, `req "bytes"`, `resp "bytes"`;
// req/resp pairs attach to the last addr. '#' comments.
Result<std::vector<SocketScriptEntry>> parse_socket_script(const std::string& text);

// Wires a program, an OS configuration and a checker mode together and
// drives machine states. States are plain values; the engine holds the
// immutable context (component stack, trace, backend) plus the trace writer.
class Engine : public SyscallPort {
public:
    static Result<std::unique_ptr<Engine>> create(const GuestProgram& p, const OsConfig& cfg, EngineMode mode,
                                                  std::unique_ptr<HostBackend> backend = nullptr,
                                                  std::vector<std::unique_ptr<Component>> extra = {});
    ~Engine() override;

    Result<MachineState> boot();
    StepOutcome step(MachineState& s) { return vm_step(s, prog_, *this); }
    Status resolve_choice(MachineState& s, u64 pick) { return vm_resolve_choice(s, prog_, *this, pick); }

    // Snapshots are forbidden in passthrough mode: host effects cannot be
    // undone or replayed.
    Result<std::vector<u8>> snapshot(const MachineState& s) const;
    Result<MachineState> restore(const std::vector<u8>& bytes) const;
    Digest digest(const MachineState& s) const { return vm_state_digest(s); }

    const GuestProgram& program() const { return prog_; }
    const OsConfig& config() const { return cfg_; }
    EngineMode mode() const { return mode_; }
    const Trace* trace() const { return trace_ ? &*trace_ : nullptr; }
    const CausalOrder& order() const { return order_; }
    HostBackend* backend() const { return backend_; }
    TraceWriter& writer() { return writer_; }
    const std::string& fatal_error() const { return fatal_; }
    void set_fatal(std::string msg) {
        if (fatal_.empty())
            fatal_ = std::move(msg);
    }
    // Script entries whose address equals `addr`, in declaration order.
    std::vector<const SocketScriptEntry*> script_for(const std::string& addr) const;

    i64 trace_total() const { return trace_ ? static_cast<i64>(trace_->records.size()) : -1; }
    static i64 trace_consumed(const MachineState& s) {
        return s.os.mode == OsMode::Replay ? static_cast<i64>(s.os.cursor.consumed_count) : -1;
    }

    // SyscallPort
    SyscallOutcome guest_syscall(MachineState& s, u32 thread, u32 number,
                                 const std::vector<RegValue>& args) override;
    bool wait_ready(const MachineState& s, const WaitKey& k) const override;

private:
    Engine(const GuestProgram& p, OsConfig cfg, EngineMode mode) : prog_(p), cfg_(std::move(cfg)), mode_(mode) {}

    static u64 scalar_of(const std::vector<RegValue>& args, const SyscallSpec& spec, size_t idx);

    const GuestProgram& prog_;
    OsConfig cfg_;
    EngineMode mode_;
    std::vector<std::unique_ptr<Component>> stack_; // topmost first
    std::unique_ptr<HostBackend> backend_owned_;
    HostBackend* backend_ = nullptr;
    TraceWriter writer_;
    std::optional<Trace> trace_;
    CausalOrder order_;
    std::string fatal_;
    bool holds_passthrough_session_ = false;

    static std::atomic<int> passthrough_sessions_;
};

} // namespace mcrv
