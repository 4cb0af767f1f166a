#include "os.hpp"

#include <algorithm>
#include <cstring>
#include <string_view>

#include "engine.hpp"

namespace mcrv {

namespace {

std::string path_of(const DecodedArg& a) {
    return std::string(reinterpret_cast<const char*>(a.bytes.data()), a.bytes.size());
}

// Paths are literal '/'-separated byte strings; empty components, leading
// or trailing slashes, "." and ".." are rejected.
bool path_valid(const std::string& p) {
    if (p.empty() || p.front() == '/' || p.back() == '/')
        return false;
    size_t start = 0;
    while (start <= p.size()) {
        size_t end = p.find('/', start);
        if (end == std::string::npos)
            end = p.size();
        std::string_view comp(p.data() + start, end - start);
        if (comp.empty() || comp == "." || comp == "..")
            return false;
        start = end + 1;
        if (end == p.size())
            break;
    }
    return true;
}

// Every proper prefix must exist as a directory.
i32 check_parents(const VfsState& vfs, const std::string& p) {
    size_t pos = 0;
    for (;;) {
        pos = p.find('/', pos);
        if (pos == std::string::npos)
            return 0;
        std::string prefix = p.substr(0, pos);
        auto it = vfs.files.find(prefix);
        if (it == vfs.files.end())
            return PE_ENOENT;
        if (!it->second.is_dir)
            return PE_ENOTDIR;
        pos++;
    }
}

std::vector<u8> padded(const std::vector<u8>& data, u64 declared) {
    std::vector<u8> out(declared, 0);
    std::memcpy(out.data(), data.data(), data.size() < declared ? data.size() : declared);
    return out;
}

class VfsComponent : public Component {
public:
    const char* name() const override { return "vfs"; }

    bool implements(u32 number) const override {
        switch (number) {
        case PSYS_open:
        case PSYS_close:
        case PSYS_read:
        case PSYS_write:
        case PSYS_lseek:
        case PSYS_unlink:
        case PSYS_mkdir:
        case PSYS_stat:
        case PSYS_pipe:
            return true;
        default:
            return false;
        }
    }

    Disposition handle(CallContext& ctx) override {
        VfsState& vfs = ctx.s.os.vfs;
        const auto& args = ctx.call.args;
        switch (ctx.call.spec->number) {
        case PSYS_open: return do_open(vfs, args);
        case PSYS_close: return do_close(vfs, args);
        case PSYS_read: return do_read(vfs, args);
        case PSYS_write: return do_write(vfs, args);
        case PSYS_lseek: return do_lseek(vfs, args);
        case PSYS_unlink: return do_unlink(vfs, args);
        case PSYS_mkdir: return do_mkdir(vfs, args);
        case PSYS_stat: return do_stat(vfs, args);
        case PSYS_pipe: return do_pipe(vfs, args);
        default: return Disposition::failure(PE_ENOSYS);
        }
    }

private:
    static Disposition do_open(VfsState& vfs, const std::vector<DecodedArg>& args) {
        std::string path = path_of(args[0]);
        u32 flags = static_cast<u32>(args[2].scalar);
        if (!path_valid(path))
            return Disposition::failure(PE_EINVAL);
        if (i32 e = check_parents(vfs, path))
            return Disposition::failure(e);
        auto it = vfs.files.find(path);
        bool wants_write = (flags & MO_ACCMODE) != MO_RDONLY;
        if (it == vfs.files.end()) {
            if (!(flags & MO_CREAT))
                return Disposition::failure(PE_ENOENT);
            it = vfs.files.emplace(path, FileNode{}).first;
        } else {
            if ((flags & MO_CREAT) && (flags & MO_EXCL))
                return Disposition::failure(PE_EEXIST);
            if (it->second.is_dir && wants_write)
                return Disposition::failure(PE_EISDIR);
        }
        if ((flags & MO_TRUNC) && wants_write)
            it->second.bytes.clear();
        i32 fd = vfs.lowest_free_fd();
        OpenFile of;
        of.kind = OpenFile::Kind::File;
        of.path = path;
        of.flags = flags;
        vfs.open_table.emplace(fd, std::move(of));
        return Disposition::ok(fd);
    }

    static Disposition do_close(VfsState& vfs, const std::vector<DecodedArg>& args) {
        i32 fd = static_cast<i32>(args[0].scalar);
        auto it = vfs.open_table.find(fd);
        if (it == vfs.open_table.end())
            return Disposition::failure(PE_EBADF);
        const OpenFile& of = it->second;
        if (of.kind == OpenFile::Kind::PipeRead || of.kind == OpenFile::Kind::PipeWrite) {
            auto pit = vfs.pipes.find(of.pipe_id);
            if (pit != vfs.pipes.end()) {
                if (of.kind == OpenFile::Kind::PipeRead)
                    pit->second.read_open = false;
                else
                    pit->second.write_open = false;
                if (!pit->second.read_open && !pit->second.write_open)
                    vfs.pipes.erase(pit);
            }
        } else if (of.kind == OpenFile::Kind::Socket) {
            vfs.sockets.erase(fd);
        }
        vfs.open_table.erase(it);
        return Disposition::ok(0);
    }

    static Disposition do_read(VfsState& vfs, const std::vector<DecodedArg>& args) {
        i32 fd = static_cast<i32>(args[0].scalar);
        u64 want = args[1].len;
        auto it = vfs.open_table.find(fd);
        if (it == vfs.open_table.end())
            return Disposition::failure(PE_EBADF);
        OpenFile& of = it->second;
        if (of.kind == OpenFile::Kind::File) {
            if ((of.flags & MO_ACCMODE) == MO_WRONLY)
                return Disposition::failure(PE_EBADF);
            auto fit = vfs.files.find(of.path);
            if (fit == vfs.files.end())
                return Disposition::failure(PE_EBADF); // unlinked while open; see docs/os.md
            const auto& bytes = fit->second.bytes;
            u64 avail = of.cursor < bytes.size() ? bytes.size() - of.cursor : 0;
            u64 n = want < avail ? want : avail;
            std::vector<u8> data(bytes.begin() + of.cursor, bytes.begin() + of.cursor + n);
            of.cursor += n;
            Disposition d = Disposition::ok(static_cast<i64>(n));
            d.outputs.push_back(padded(data, want));
            return d;
        }
        if (of.kind == OpenFile::Kind::PipeRead) {
            auto pit = vfs.pipes.find(of.pipe_id);
            if (pit == vfs.pipes.end())
                return Disposition::failure(PE_EBADF);
            PipeState& pipe = pit->second;
            if (pipe.data.empty()) {
                if (pipe.write_open)
                    return Disposition::block(WaitKey{WaitKey::Kind::PipeRead, of.pipe_id});
                Disposition d = Disposition::ok(0); // EOF
                d.outputs.push_back(padded({}, want));
                return d;
            }
            u64 n = want < pipe.data.size() ? want : pipe.data.size();
            std::vector<u8> data(pipe.data.begin(), pipe.data.begin() + n);
            pipe.data.erase(pipe.data.begin(), pipe.data.begin() + n);
            Disposition d = Disposition::ok(static_cast<i64>(n));
            d.outputs.push_back(padded(data, want));
            return d;
        }
        return Disposition::failure(PE_EBADF);
    }

    static Disposition do_write(VfsState& vfs, const std::vector<DecodedArg>& args) {
        i32 fd = static_cast<i32>(args[0].scalar);
        const std::vector<u8>& data = args[1].bytes;
        auto it = vfs.open_table.find(fd);
        if (it == vfs.open_table.end())
            return Disposition::failure(PE_EBADF);
        OpenFile& of = it->second;
        if (of.kind == OpenFile::Kind::File) {
            if ((of.flags & MO_ACCMODE) == MO_RDONLY)
                return Disposition::failure(PE_EBADF);
            auto fit = vfs.files.find(of.path);
            if (fit == vfs.files.end())
                return Disposition::failure(PE_EBADF);
            auto& bytes = fit->second.bytes;
            if (of.flags & MO_APPEND)
                of.cursor = bytes.size();
            if (of.cursor + data.size() > bytes.size())
                bytes.resize(of.cursor + data.size(), 0);
            std::memcpy(bytes.data() + of.cursor, data.data(), data.size());
            of.cursor += data.size();
            return Disposition::ok(static_cast<i64>(data.size()));
        }
        if (of.kind == OpenFile::Kind::PipeWrite) {
            auto pit = vfs.pipes.find(of.pipe_id);
            if (pit == vfs.pipes.end())
                return Disposition::failure(PE_EBADF);
            PipeState& pipe = pit->second;
            if (!pipe.read_open)
                return Disposition::failure(PE_EPIPE);
            u64 space = kPipeCapacity - pipe.data.size();
            if (space == 0 && !data.empty())
                return Disposition::block(WaitKey{WaitKey::Kind::PipeWrite, of.pipe_id});
            u64 n = data.size() < space ? data.size() : space;
            pipe.data.insert(pipe.data.end(), data.begin(), data.begin() + n);
            return Disposition::ok(static_cast<i64>(n));
        }
        return Disposition::failure(PE_EBADF);
    }

    static Disposition do_lseek(VfsState& vfs, const std::vector<DecodedArg>& args) {
        i32 fd = static_cast<i32>(args[0].scalar);
        i64 off = static_cast<i64>(args[1].scalar);
        u32 whence = static_cast<u32>(args[2].scalar);
        auto it = vfs.open_table.find(fd);
        if (it == vfs.open_table.end())
            return Disposition::failure(PE_EBADF);
        OpenFile& of = it->second;
        if (of.kind != OpenFile::Kind::File)
            return Disposition::failure(PE_EINVAL);
        auto fit = vfs.files.find(of.path);
        if (fit == vfs.files.end())
            return Disposition::failure(PE_EBADF);
        i64 base;
        switch (whence) {
        case SEEK_W_SET: base = 0; break;
        case SEEK_W_CUR: base = static_cast<i64>(of.cursor); break;
        case SEEK_W_END: base = static_cast<i64>(fit->second.bytes.size()); break;
        default: return Disposition::failure(PE_EINVAL);
        }
        i64 pos = base + off;
        if (pos < 0)
            return Disposition::failure(PE_EINVAL);
        of.cursor = static_cast<u64>(pos);
        return Disposition::ok(pos);
    }

    static Disposition do_unlink(VfsState& vfs, const std::vector<DecodedArg>& args) {
        std::string path = path_of(args[0]);
        if (!path_valid(path))
            return Disposition::failure(PE_EINVAL);
        auto it = vfs.files.find(path);
        if (it == vfs.files.end())
            return Disposition::failure(PE_ENOENT);
        if (it->second.is_dir)
            return Disposition::failure(PE_EISDIR);
        vfs.files.erase(it);
        return Disposition::ok(0);
    }

    static Disposition do_mkdir(VfsState& vfs, const std::vector<DecodedArg>& args) {
        std::string path = path_of(args[0]);
        if (!path_valid(path))
            return Disposition::failure(PE_EINVAL);
        if (vfs.files.count(path))
            return Disposition::failure(PE_EEXIST);
        if (i32 e = check_parents(vfs, path))
            return Disposition::failure(e);
        FileNode dir;
        dir.is_dir = true;
        vfs.files.emplace(path, std::move(dir));
        return Disposition::ok(0);
    }

    static Disposition do_stat(VfsState& vfs, const std::vector<DecodedArg>& args) {
        std::string path = path_of(args[0]);
        if (!path_valid(path))
            return Disposition::failure(PE_EINVAL);
        auto it = vfs.files.find(path);
        if (it == vfs.files.end())
            return Disposition::failure(PE_ENOENT);
        std::vector<u8> buf(kStatBufSize, 0);
        u64 size = it->second.bytes.size();
        u32 kind = it->second.is_dir ? 1 : 0;
        std::memcpy(buf.data(), &size, 8);
        std::memcpy(buf.data() + 8, &kind, 4);
        Disposition d = Disposition::ok(0);
        d.outputs.push_back(std::move(buf));
        return d;
    }

    static Disposition do_pipe(VfsState& vfs, const std::vector<DecodedArg>&) {
        u64 id = vfs.next_pipe++;
        vfs.pipes.emplace(id, PipeState{});
        i32 rfd = vfs.lowest_free_fd();
        OpenFile rend;
        rend.kind = OpenFile::Kind::PipeRead;
        rend.pipe_id = id;
        vfs.open_table.emplace(rfd, std::move(rend));
        i32 wfd = vfs.lowest_free_fd();
        OpenFile wend;
        wend.kind = OpenFile::Kind::PipeWrite;
        wend.pipe_id = id;
        vfs.open_table.emplace(wfd, std::move(wend));
        std::vector<u8> out(8, 0);
        u32 r = static_cast<u32>(rfd), w = static_cast<u32>(wfd);
        std::memcpy(out.data(), &r, 4);
        std::memcpy(out.data() + 4, &w, 4);
        Disposition d = Disposition::ok(0);
        d.outputs.push_back(std::move(out));
        return d;
    }
};

class VsockComponent : public Component {
public:
    const char* name() const override { return "vsock"; }

    bool implements(u32 number) const override {
        return number == PSYS_socket || number == PSYS_connect || number == PSYS_send || number == PSYS_recv;
    }

    Disposition handle(CallContext& ctx) override {
        VfsState& vfs = ctx.s.os.vfs;
        const auto& args = ctx.call.args;
        switch (ctx.call.spec->number) {
        case PSYS_socket: {
            if (args[0].scalar != 1 || args[1].scalar != 1)
                return Disposition::failure(PE_EINVAL);
            i32 fd = vfs.lowest_free_fd();
            OpenFile of;
            of.kind = OpenFile::Kind::Socket;
            vfs.open_table.emplace(fd, std::move(of));
            vfs.sockets.emplace(fd, SockSession{});
            return Disposition::ok(fd);
        }
        case PSYS_connect: {
            i32 fd = static_cast<i32>(args[0].scalar);
            auto it = vfs.sockets.find(fd);
            if (it == vfs.sockets.end())
                return Disposition::failure(PE_EBADF);
            SockSession& sess = it->second;
            if (sess.connected)
                return Disposition::failure(PE_EINVAL);
            std::string addr = path_of(args[1]);
            auto entries = ctx.eng.script_for(addr);
            if (entries.empty())
                return Disposition::failure(PE_ECONNREFUSED);
            sess.connected = true;
            sess.addr = addr;
            sess.entry_used.assign(entries.size(), false);
            return Disposition::ok(0);
        }
        case PSYS_send: {
            i32 fd = static_cast<i32>(args[0].scalar);
            auto it = vfs.sockets.find(fd);
            if (it == vfs.sockets.end())
                return Disposition::failure(PE_EBADF);
            SockSession& sess = it->second;
            if (!sess.connected)
                return Disposition::failure(PE_ENOTCONN);
            const auto& data = args[1].bytes;
            sess.request.insert(sess.request.end(), data.begin(), data.end());
            match_script(ctx.eng, sess);
            return Disposition::ok(static_cast<i64>(data.size()));
        }
        case PSYS_recv: {
            i32 fd = static_cast<i32>(args[0].scalar);
            u64 want = args[1].len;
            auto it = vfs.sockets.find(fd);
            if (it == vfs.sockets.end())
                return Disposition::failure(PE_EBADF);
            SockSession& sess = it->second;
            if (!sess.connected)
                return Disposition::failure(PE_ENOTCONN);
            if (sess.rx.empty()) {
                if (pending_entries(ctx.eng, sess))
                    return Disposition::block(WaitKey{WaitKey::Kind::SockRecv, static_cast<u64>(fd)});
                Disposition d = Disposition::ok(0); // peer closed
                d.outputs.push_back(padded({}, want));
                return d;
            }
            u64 n = want < sess.rx.size() ? want : sess.rx.size();
            std::vector<u8> data(sess.rx.begin(), sess.rx.begin() + n);
            sess.rx.erase(sess.rx.begin(), sess.rx.begin() + n);
            Disposition d = Disposition::ok(static_cast<i64>(n));
            d.outputs.push_back(padded(data, want));
            return d;
        }
        default:
            return Disposition::failure(PE_ENOSYS);
        }
    }

    // The first unused pattern contained in the accumulated request fires
    // and consumes the request buffer; repeats until nothing matches.
    static void match_script(Engine& eng, SockSession& sess) {
        auto entries = eng.script_for(sess.addr);
        bool fired = true;
        while (fired) {
            fired = false;
            for (size_t i = 0; i < entries.size(); i++) {
                if (sess.entry_used[i])
                    continue;
                const auto& pat = entries[i]->req;
                bool hit = pat.empty() ||
                           std::search(sess.request.begin(), sess.request.end(), pat.begin(), pat.end()) !=
                               sess.request.end();
                if (hit) {
                    sess.entry_used[i] = true;
                    sess.rx.insert(sess.rx.end(), entries[i]->resp.begin(), entries[i]->resp.end());
                    sess.request.clear();
                    fired = true;
                    break;
                }
            }
        }
    }

    static bool pending_entries(const Engine& eng, const SockSession& sess) {
        auto entries = eng.script_for(sess.addr);
        for (size_t i = 0; i < entries.size() && i < sess.entry_used.size(); i++)
            if (!sess.entry_used[i])
                return true;
        return false;
    }
};

class VprocComponent : public Component {
public:
    const char* name() const override { return "vproc"; }
    bool implements(u32 number) const override { return number == PSYS_getpid; }
    Disposition handle(CallContext&) override { return Disposition::ok(1); }
};

std::vector<ConcreteArg> concrete_args(const DecodedCall& call) {
    std::vector<ConcreteArg> out(call.args.size());
    for (size_t i = 0; i < call.args.size(); i++) {
        out[i].scalar = call.args[i].scalar;
        out[i].bytes = call.args[i].bytes;
        out[i].buffer_len = call.args[i].len;
    }
    return out;
}

// Marshals the call, runs it on the host backend, appends the record.
class PassthroughComponent : public Component {
public:
    const char* name() const override { return "passthrough"; }
    bool implements(u32 number) const override { return find_syscall(number) != nullptr; }

    Disposition handle(CallContext& ctx) override {
        MarshalledCall call = build_marshalled(*ctx.call.spec, concrete_args(ctx.call));
        Result<SysResult> res = vm_syscall(call, *ctx.eng.backend());
        if (!res)
            return Disposition::fatal(res.error());
        Status rec = ctx.eng.writer().append(call, res.value());
        if (!rec.ok())
            return Disposition::fatal(rec.error());
        Disposition d;
        d.retval = res.value().retval;
        d.err = res.value().err;
        d.outputs = std::move(res.value().outputs);
        return d;
    }
};

// Matches the call against the loaded trace and plays back the recorded
// effects; a mismatch becomes assume(false).
class ReplayComponent : public Component {
public:
    const char* name() const override { return "replay"; }
    bool implements(u32 number) const override { return find_syscall(number) != nullptr; }

    Disposition handle(CallContext& ctx) override {
        const Trace* t = ctx.eng.trace();
        if (!t)
            return Disposition::fatal("replay component without a loaded trace");
        MarshalledCall call = build_marshalled(*ctx.call.spec, concrete_args(ctx.call));
        ReplayOutcome ro =
            replay_syscall(ctx.s.os.cursor, *t, ctx.eng.order(), ctx.eng.config().matching, call);
        if (!ro.matched)
            return Disposition::fault(FaultKind::AssumeViolation, "replay mismatch: " + ro.mismatch);
        Disposition d;
        d.retval = ro.rec->retval;
        d.err = ro.rec->err;
        d.outputs = ro.rec->outputs;
        // Defensive: recorded outputs should already be declared-size.
        size_t k = 0;
        for (const TaggedArg& a : ro.rec->args) {
            if (!a.is_output())
                continue;
            if (k < d.outputs.size())
                d.outputs[k].resize(a.declared_size, 0);
            k++;
        }
        return d;
    }
};

} // namespace

std::unique_ptr<Component> make_component(const std::string& name) {
    if (name == "vfs")
        return std::make_unique<VfsComponent>();
    if (name == "vsock")
        return std::make_unique<VsockComponent>();
    if (name == "vproc")
        return std::make_unique<VprocComponent>();
    if (name == "passthrough")
        return std::make_unique<PassthroughComponent>();
    if (name == "replay")
        return std::make_unique<ReplayComponent>();
    return nullptr;
}

} // namespace mcrv
