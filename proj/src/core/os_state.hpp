#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "bytes.hpp"
#include "common.hpp"

namespace mcrv {

enum class OsMode : u8 { Virtual = 0, Passthrough = 1, Replay = 2 };

const char* os_mode_name(OsMode m);

constexpr u64 kPipeCapacity = 64 * 1024;

struct FileNode {
    bool is_dir = false;
    std::vector<u8> bytes;

    void write(ByteWriter& w) const;
    bool read(ByteReader& r);
};

struct PipeState {
    std::vector<u8> data; // FIFO, bounded by kPipeCapacity
    bool read_open = true;
    bool write_open = true;

    void write(ByteWriter& w) const;
    bool read(ByteReader& r);
};

// One end of a guest file descriptor in virtual mode.
struct OpenFile {
    enum class Kind : u8 { File = 0, PipeRead = 1, PipeWrite = 2, Socket = 3 };
    Kind kind = Kind::File;
    std::string path;
    u64 cursor = 0;
    u32 flags = 0;
    u64 pipe_id = 0;

    void write(ByteWriter& w) const;
    bool read(ByteReader& r);
};

// Scripted virtual socket peer: responses queue up as request patterns match.
struct SockSession {
    bool connected = false;
    std::string addr;
    std::vector<u8> rx;
    std::vector<u8> request;
    std::vector<bool> entry_used; // per script entry for this session's addr

    void write(ByteWriter& w) const;
    bool read(ByteReader& r);
};

struct VfsState {
    std::map<std::string, FileNode> files;
    std::map<i32, OpenFile> open_table;
    std::map<u64, PipeState> pipes;
    std::map<i32, SockSession> sockets;
    u64 next_pipe = 1;

    i32 lowest_free_fd() const;

    void write(ByteWriter& w) const;
    bool read(ByteReader& r);
};

// Replay position: consumed-record bitset plus count. Exact matching keeps
// the set a prefix; causal matching consumes out of order.
struct ReplayCursorState {
    std::vector<bool> consumed;
    u64 consumed_count = 0;

    void write(ByteWriter& w) const;
    bool read(ByteReader& r);
};

// Stand-in OS state owned by the machine: snapshotted with it.
struct OsState {
    OsMode mode = OsMode::Virtual;
    VfsState vfs;
    ReplayCursorState cursor;

    void write(ByteWriter& w) const;
    bool read(ByteReader& r);
};

} // namespace mcrv
