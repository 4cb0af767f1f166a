#include "syscalls.hpp"

namespace mcrv {

const char* arg_kind_name(ArgSpec::Kind k) {
    switch (k) {
    case ArgSpec::Kind::ScalarIn32: return "scalar-in-32";
    case ArgSpec::Kind::ScalarIn64: return "scalar-in-64";
    case ArgSpec::Kind::ScalarOut32: return "scalar-out-32";
    case ArgSpec::Kind::ScalarOut64: return "scalar-out-64";
    case ArgSpec::Kind::BufferIn: return "buffer-in";
    case ArgSpec::Kind::BufferOut: return "buffer-out";
    }
    return "?";
}

namespace {

ArgSpec s32() { return ArgSpec{ArgSpec::Kind::ScalarIn32, -1, 0}; }
ArgSpec s64() { return ArgSpec{ArgSpec::Kind::ScalarIn64, -1, 0}; }
ArgSpec buf_in(int size_from) { return ArgSpec{ArgSpec::Kind::BufferIn, size_from, 0}; }
ArgSpec buf_out(int size_from) { return ArgSpec{ArgSpec::Kind::BufferOut, size_from, 0}; }
ArgSpec buf_out_fixed(u32 n) { return ArgSpec{ArgSpec::Kind::BufferOut, -1, n}; }

std::vector<SyscallSpec> build_table() {
    return {
        {PSYS_open, "open", {buf_in(1), s64(), s32(), s32()}},
        {PSYS_close, "close", {s32()}},
        {PSYS_read, "read", {s32(), buf_out(2), s64()}},
        {PSYS_write, "write", {s32(), buf_in(2), s64()}},
        {PSYS_lseek, "lseek", {s32(), s64(), s32()}},
        {PSYS_unlink, "unlink", {buf_in(1), s64()}},
        {PSYS_mkdir, "mkdir", {buf_in(1), s64(), s32()}},
        {PSYS_stat, "stat", {buf_in(1), s64(), buf_out_fixed(kStatBufSize)}},
        {PSYS_pipe, "pipe", {buf_out_fixed(8)}},
        {PSYS_socket, "socket", {s32(), s32(), s32()}},
        {PSYS_connect, "connect", {s32(), buf_in(2), s64()}},
        {PSYS_send, "send", {s32(), buf_in(2), s64(), s32()}},
        {PSYS_recv, "recv", {s32(), buf_out(2), s64(), s32()}},
        {PSYS_getpid, "getpid", {}},
    };
}

} // namespace

const std::vector<SyscallSpec>& syscall_table() {
    static const std::vector<SyscallSpec> table = build_table();
    return table;
}

const SyscallSpec* find_syscall(u32 number) {
    for (const auto& spec : syscall_table())
        if (spec.number == number)
            return &spec;
    return nullptr;
}

const Digest& syscall_table_hash() {
    static const Digest d = [] {
        std::string desc;
        for (const auto& spec : syscall_table()) {
            desc += std::to_string(spec.number) + " " + spec.name + "(";
            for (size_t i = 0; i < spec.args.size(); i++) {
                const ArgSpec& a = spec.args[i];
                if (i)
                    desc += ", ";
                desc += arg_kind_name(a.kind);
                if (a.is_buffer()) {
                    if (a.size_from >= 0)
                        desc += " size-from " + std::to_string(a.size_from);
                    else
                        desc += " fixed " + std::to_string(a.fixed_size);
                }
            }
            desc += ") -> signed-64\n";
        }
        return sha256(desc.data(), desc.size());
    }();
    return d;
}

} // namespace mcrv
