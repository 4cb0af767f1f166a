#pragma once

#include <string>
#include <vector>

#include "common.hpp"
#include "digest.hpp"

namespace mcrv {

// Portable syscall numbers; traces store these, never host numbers.
enum Sys : u32 {
    PSYS_open = 1,
    PSYS_close = 2,
    PSYS_read = 3,
    PSYS_write = 4,
    PSYS_lseek = 5,
    PSYS_unlink = 6,
    PSYS_mkdir = 7,
    PSYS_stat = 8,
    PSYS_pipe = 9,
    PSYS_socket = 10,
    PSYS_connect = 11,
    PSYS_send = 12,
    PSYS_recv = 13,
    PSYS_getpid = 14,
};

// Portable open(2) flags (see docs/os.md).
enum OpenFlags : u32 {
    MO_ACCMODE = 3,
    MO_RDONLY = 0,
    MO_WRONLY = 1,
    MO_RDWR = 2,
    MO_CREAT = 4,
    MO_TRUNC = 8,
    MO_APPEND = 16,
    MO_EXCL = 32,
};

enum SeekWhence : u32 { SEEK_W_SET = 0, SEEK_W_CUR = 1, SEEK_W_END = 2 };

// Portable stat buffer: u64 size, u32 kind (0 file, 1 dir, 2 pipe), u32 zero.
constexpr u32 kStatBufSize = 16;

// Argument metadata: what vm_syscall needs to move bytes without knowing
// what the call means.
struct ArgSpec {
    enum class Kind : u8 {
        ScalarIn32 = 1,
        ScalarIn64 = 2,
        ScalarOut32 = 3,
        ScalarOut64 = 4,
        BufferIn = 5,
        BufferOut = 6,
    };
    Kind kind;
    // Buffers: size taken from the scalar-in argument at `size_from`, or
    // `fixed_size` when size_from < 0.
    int size_from = -1;
    u32 fixed_size = 0;

    bool is_buffer() const { return kind == Kind::BufferIn || kind == Kind::BufferOut; }
    bool is_output() const {
        return kind == Kind::ScalarOut32 || kind == Kind::ScalarOut64 || kind == Kind::BufferOut;
    }
    bool is_scalar_in() const { return kind == Kind::ScalarIn32 || kind == Kind::ScalarIn64; }
};

const char* arg_kind_name(ArgSpec::Kind k);

struct SyscallSpec {
    u32 number;
    std::string name;
    std::vector<ArgSpec> args;
};

// The fixed supported set; identical in every OS mode.
const std::vector<SyscallSpec>& syscall_table();

const SyscallSpec* find_syscall(u32 number);

// Digest of the canonical table description, stored in trace headers to
// guard against drift between record and replay.
const Digest& syscall_table_hash();

} // namespace mcrv
