#pragma once

#include <memory>
#include <string>
#include <vector>

#include "common.hpp"
#include "syscalls.hpp"

namespace mcrv {

// One metadata-tagged argument of a marshalled call. Per the wire contract,
// a real argument expands to tag (+size) (+payload): scalar-in carries its
// value, buffer-in carries payload bytes, outputs carry only a declared size.
struct TaggedArg {
    ArgSpec::Kind tag = ArgSpec::Kind::ScalarIn64;
    u64 scalar = 0;           // scalar-in value
    std::vector<u8> bytes;    // buffer-in payload
    u32 declared_size = 0;    // buffer lengths and scalar-out widths

    bool is_output() const {
        return tag == ArgSpec::Kind::ScalarOut32 || tag == ArgSpec::Kind::ScalarOut64 ||
               tag == ArgSpec::Kind::BufferOut;
    }

    bool operator==(const TaggedArg&) const = default;
};

struct MarshalledCall {
    u32 number = 0;
    std::vector<TaggedArg> args;

    bool operator==(const MarshalledCall&) const = default;
};

struct SysResult {
    i64 retval = -1;
    i32 err = 0;
    // One entry per output argument, in argument order; after vm_syscall
    // each is exactly declared-size bytes (zero-filled past what the host
    // wrote).
    std::vector<std::vector<u8>> outputs;

    bool operator==(const SysResult&) const = default;
};

// Executes one marshalled call somewhere: the real host, or a script.
class HostBackend {
public:
    virtual ~HostBackend() = default;
    virtual const char* name() const = 0;
    virtual SysResult execute(const MarshalledCall& call) = 0;
};

// Concrete argument for build_marshalled: the guest-side value of one
// spec argument after buffer payloads have been copied out of the guest heap.
struct ConcreteArg {
    u64 scalar = 0;        // scalar-in
    std::vector<u8> bytes; // buffer-in payload
    u64 buffer_len = 0;    // buffer-in/out length (resolved from size-from)
};

// Builds the tagged-argument call; deterministic and lossless.
MarshalledCall build_marshalled(const SyscallSpec& spec, const std::vector<ConcreteArg>& args);

// The single model-checker primitive: validates the metadata, runs the call
// on the backend, and normalizes outputs to their declared sizes. Consults
// only tags and sizes, never the syscall's meaning. A malformed call is a
// MarshalError and never reaches the backend.
Result<SysResult> vm_syscall(const MarshalledCall& call, HostBackend& backend);

// Scalar-in values rendered with 32-bit truncation applied, as the backend
// will see them.
u64 scalar_arg_value(const TaggedArg& a);

std::string render_call(const MarshalledCall& call);

std::unique_ptr<HostBackend> make_real_backend();

// Table-driven backend for hermetic tests: pops one scripted result per
// call and remembers what it was asked to do.
class MockBackend : public HostBackend {
public:
    const char* name() const override { return "scripted-mock"; }
    SysResult execute(const MarshalledCall& call) override;

    std::vector<SysResult> script;
    std::vector<MarshalledCall> calls_seen;

private:
    size_t next_ = 0;
};

// Backend that must never be reached; trips a flag if it is.
class PoisonBackend : public HostBackend {
public:
    const char* name() const override { return "poisoned"; }
    SysResult execute(const MarshalledCall&) override {
        invocations++;
        return SysResult{-1, PE_ENOSYS, {}};
    }

    int invocations = 0;
};

} // namespace mcrv
