#include "os_state.hpp"

namespace mcrv {

const char* os_mode_name(OsMode m) {
    switch (m) {
    case OsMode::Virtual: return "virtual";
    case OsMode::Passthrough: return "passthrough";
    case OsMode::Replay: return "replay";
    }
    return "?";
}

void FileNode::write(ByteWriter& w) const {
    w.boolean(is_dir);
    w.blob(bytes);
}

bool FileNode::read(ByteReader& r) {
    is_dir = r.boolean();
    bytes = r.blob();
    return !r.failed();
}

void PipeState::write(ByteWriter& w) const {
    w.blob(data);
    w.boolean(read_open);
    w.boolean(write_open);
}

bool PipeState::read(ByteReader& r) {
    data = r.blob(kPipeCapacity);
    read_open = r.boolean();
    write_open = r.boolean();
    return !r.failed();
}

void OpenFile::write(ByteWriter& w) const {
    w.u8v(static_cast<u8>(kind));
    w.str(path);
    w.u64v(cursor);
    w.u32v(flags);
    w.u64v(pipe_id);
}

bool OpenFile::read(ByteReader& r) {
    u8 k = r.u8v();
    if (k > 3)
        return false;
    kind = static_cast<Kind>(k);
    path = r.str();
    cursor = r.u64v();
    flags = r.u32v();
    pipe_id = r.u64v();
    return !r.failed();
}

void SockSession::write(ByteWriter& w) const {
    w.boolean(connected);
    w.str(addr);
    w.blob(rx);
    w.blob(request);
    w.u64v(entry_used.size());
    for (bool b : entry_used)
        w.boolean(b);
}

bool SockSession::read(ByteReader& r) {
    connected = r.boolean();
    addr = r.str();
    rx = r.blob();
    request = r.blob();
    u64 n = r.u64v();
    if (r.failed() || n > (1u << 20))
        return false;
    entry_used.assign(n, false);
    for (u64 i = 0; i < n; i++)
        entry_used[i] = r.boolean();
    return !r.failed();
}

i32 VfsState::lowest_free_fd() const {
    i32 fd = 3;
    for (auto& [k, v] : open_table) {
        if (k < fd)
            continue;
        if (k > fd)
            break;
        fd++;
    }
    return fd;
}

void VfsState::write(ByteWriter& w) const {
    w.u64v(files.size());
    for (const auto& [path, node] : files) {
        w.str(path);
        node.write(w);
    }
    w.u64v(open_table.size());
    for (const auto& [fd, of] : open_table) {
        w.i32v(fd);
        of.write(w);
    }
    w.u64v(pipes.size());
    for (const auto& [id, p] : pipes) {
        w.u64v(id);
        p.write(w);
    }
    w.u64v(sockets.size());
    for (const auto& [fd, s] : sockets) {
        w.i32v(fd);
        s.write(w);
    }
    w.u64v(next_pipe);
}

bool VfsState::read(ByteReader& r) {
    u64 n = r.u64v();
    if (r.failed() || n > (1u << 24))
        return false;
    files.clear();
    for (u64 i = 0; i < n; i++) {
        std::string path = r.str();
        FileNode node;
        if (!node.read(r))
            return false;
        files.emplace(std::move(path), std::move(node));
    }
    n = r.u64v();
    if (r.failed() || n > (1u << 24))
        return false;
    open_table.clear();
    for (u64 i = 0; i < n; i++) {
        i32 fd = r.i32v();
        OpenFile of;
        if (!of.read(r))
            return false;
        open_table.emplace(fd, std::move(of));
    }
    n = r.u64v();
    if (r.failed() || n > (1u << 24))
        return false;
    pipes.clear();
    for (u64 i = 0; i < n; i++) {
        u64 id = r.u64v();
        PipeState p;
        if (!p.read(r))
            return false;
        pipes.emplace(id, std::move(p));
    }
    n = r.u64v();
    if (r.failed() || n > (1u << 24))
        return false;
    sockets.clear();
    for (u64 i = 0; i < n; i++) {
        i32 fd = r.i32v();
        SockSession s;
        if (!s.read(r))
            return false;
        sockets.emplace(fd, std::move(s));
    }
    next_pipe = r.u64v();
    return !r.failed();
}

void ReplayCursorState::write(ByteWriter& w) const {
    w.u64v(consumed.size());
    for (bool b : consumed)
        w.boolean(b);
    w.u64v(consumed_count);
}

bool ReplayCursorState::read(ByteReader& r) {
    u64 n = r.u64v();
    if (r.failed() || n > (1u << 26))
        return false;
    consumed.assign(n, false);
    for (u64 i = 0; i < n; i++)
        consumed[i] = r.boolean();
    consumed_count = r.u64v();
    return !r.failed();
}

void OsState::write(ByteWriter& w) const {
    w.u8v(static_cast<u8>(mode));
    vfs.write(w);
    cursor.write(w);
}

bool OsState::read(ByteReader& r) {
    u8 m = r.u8v();
    if (m > 2)
        return false;
    mode = static_cast<OsMode>(m);
    return vfs.read(r) && cursor.read(r) && !r.failed();
}

} // namespace mcrv
