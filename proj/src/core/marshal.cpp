#include "marshal.hpp"

namespace mcrv {

u64 scalar_arg_value(const TaggedArg& a) {
    return a.tag == ArgSpec::Kind::ScalarIn32 ? (a.scalar & 0xffffffffull) : a.scalar;
}

MarshalledCall build_marshalled(const SyscallSpec& spec, const std::vector<ConcreteArg>& args) {
    MarshalledCall call;
    call.number = spec.number;
    call.args.resize(spec.args.size());
    for (size_t i = 0; i < spec.args.size(); i++) {
        const ArgSpec& as = spec.args[i];
        TaggedArg& ta = call.args[i];
        ta.tag = as.kind;
        switch (as.kind) {
        case ArgSpec::Kind::ScalarIn32:
            ta.scalar = args[i].scalar & 0xffffffffull;
            ta.declared_size = 4;
            break;
        case ArgSpec::Kind::ScalarIn64:
            ta.scalar = args[i].scalar;
            ta.declared_size = 8;
            break;
        case ArgSpec::Kind::ScalarOut32:
            ta.declared_size = 4;
            break;
        case ArgSpec::Kind::ScalarOut64:
            ta.declared_size = 8;
            break;
        case ArgSpec::Kind::BufferIn:
            ta.bytes = args[i].bytes;
            ta.declared_size = static_cast<u32>(args[i].buffer_len);
            break;
        case ArgSpec::Kind::BufferOut:
            ta.declared_size = static_cast<u32>(args[i].buffer_len);
            break;
        }
    }
    return call;
}

Result<SysResult> vm_syscall(const MarshalledCall& call, HostBackend& backend) {
    size_t n_outputs = 0;
    for (size_t i = 0; i < call.args.size(); i++) {
        const TaggedArg& a = call.args[i];
        switch (a.tag) {
        case ArgSpec::Kind::ScalarIn32:
        case ArgSpec::Kind::ScalarIn64:
            if (!a.bytes.empty())
                return Err{"MarshalError: scalar argument " + std::to_string(i) + " carries a payload"};
            break;
        case ArgSpec::Kind::ScalarOut32:
            if (a.declared_size != 4)
                return Err{"MarshalError: scalar-out-32 argument " + std::to_string(i) + " declares width " +
                           std::to_string(a.declared_size)};
            n_outputs++;
            break;
        case ArgSpec::Kind::ScalarOut64:
            if (a.declared_size != 8)
                return Err{"MarshalError: scalar-out-64 argument " + std::to_string(i) + " declares width " +
                           std::to_string(a.declared_size)};
            n_outputs++;
            break;
        case ArgSpec::Kind::BufferIn:
            if (a.bytes.size() != a.declared_size)
                return Err{"MarshalError: buffer-in argument " + std::to_string(i) + " payload length " +
                           std::to_string(a.bytes.size()) + " != declared size " + std::to_string(a.declared_size)};
            break;
        case ArgSpec::Kind::BufferOut:
            if (!a.bytes.empty())
                return Err{"MarshalError: buffer-out argument " + std::to_string(i) + " carries an input payload"};
            n_outputs++;
            break;
        default:
            return Err{"MarshalError: unknown tag in argument " + std::to_string(i)};
        }
    }

    SysResult res = backend.execute(call);

    // Normalize: one entry per output, exactly declared-size bytes.
    if (res.outputs.size() > n_outputs)
        return Err{"MarshalError: backend produced " + std::to_string(res.outputs.size()) + " outputs, expected " +
                   std::to_string(n_outputs)};
    res.outputs.resize(n_outputs);
    size_t k = 0;
    for (const TaggedArg& a : call.args) {
        if (!a.is_output())
            continue;
        std::vector<u8>& out = res.outputs[k++];
        if (out.size() > a.declared_size)
            return Err{"MarshalError: backend output exceeds declared size"};
        out.resize(a.declared_size, 0);
    }
    return res;
}

SysResult MockBackend::execute(const MarshalledCall& call) {
    calls_seen.push_back(call);
    if (next_ >= script.size())
        return SysResult{-1, PE_ENOSYS, {}};
    return script[next_++];
}

std::string render_call(const MarshalledCall& call) {
    std::string s = "syscall " + std::to_string(call.number);
    const SyscallSpec* spec = find_syscall(call.number);
    if (spec)
        s += " (" + spec->name + ")";
    s += " [";
    for (size_t i = 0; i < call.args.size(); i++) {
        const TaggedArg& a = call.args[i];
        if (i)
            s += ", ";
        s += arg_kind_name(a.tag);
        switch (a.tag) {
        case ArgSpec::Kind::ScalarIn32:
        case ArgSpec::Kind::ScalarIn64:
            s += " " + std::to_string(static_cast<i64>(scalar_arg_value(a)));
            break;
        case ArgSpec::Kind::BufferIn: {
            std::string hex = hex_bytes(a.bytes.data(), a.bytes.size() > 16 ? 16 : a.bytes.size());
            s += " size " + std::to_string(a.declared_size) + " 0x" + hex;
            if (a.bytes.size() > 16)
                s += "...";
            break;
        }
        default:
            s += " size " + std::to_string(a.declared_size);
            break;
        }
    }
    return s + "]";
}

} // namespace mcrv
