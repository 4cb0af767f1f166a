#pragma once

#include <memory>

#include "marshal.hpp"
#include "vm.hpp"

namespace mcrv {

class Engine;

// Guest argument after decoding against the SyscallSpec: scalars carry
// values, buffers carry the guest range plus (for inputs) a copy of the
// bytes. Ranges are validated before any component runs.
struct DecodedArg {
    u64 scalar = 0;
    u32 obj = 0;
    u32 off = 0;
    u64 len = 0;
    std::vector<u8> bytes;
};

struct DecodedCall {
    const SyscallSpec* spec = nullptr;
    std::vector<DecodedArg> args;
};

struct Disposition {
    enum class Kind : u8 { Done, Block, Fault, Fatal };
    Kind kind = Kind::Done;
    i64 retval = -1;
    i32 err = 0;
    std::vector<std::vector<u8>> outputs; // one per output arg, in order
    WaitKey wait_key{};
    FaultKind fault_kind = FaultKind::MemoryError;
    std::string detail;

    static Disposition ok(i64 rv) {
        Disposition d;
        d.retval = rv;
        return d;
    }
    static Disposition failure(i32 err) {
        Disposition d;
        d.retval = -1;
        d.err = err;
        return d;
    }
    static Disposition block(WaitKey k) {
        Disposition d;
        d.kind = Kind::Block;
        d.wait_key = k;
        return d;
    }
    static Disposition fault(FaultKind k, std::string detail) {
        Disposition d;
        d.kind = Kind::Fault;
        d.fault_kind = k;
        d.detail = std::move(detail);
        return d;
    }
    static Disposition fatal(std::string detail) {
        Disposition d;
        d.kind = Kind::Fatal;
        d.detail = std::move(detail);
        return d;
    }
};

struct CallContext {
    Engine& eng;
    MachineState& s;
    u32 thread;
    const DecodedCall& call;
};

// One layer of the kernel stack. Components are stateless; everything they
// mutate lives in MachineState so snapshots capture it.
class Component {
public:
    virtual ~Component() = default;
    virtual const char* name() const = 0;
    virtual bool implements(u32 number) const = 0;
    virtual Disposition handle(CallContext& ctx) = 0;
};

// Built-in components: "vfs" (files + pipes), "vsock" (scripted sockets),
// "vproc" (process attributes), "passthrough", "replay".
std::unique_ptr<Component> make_component(const std::string& name);

} // namespace mcrv
