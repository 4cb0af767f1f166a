#include <cerrno>
#include <cstring>

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <sys/stat.h>
#include <sys/types.h>
#include <unistd.h>

#include "marshal.hpp"

namespace mcrv {

namespace {

i32 map_host_errno(int e) {
    switch (e) {
    case 0: return PE_OK;
    case ENOENT: return PE_ENOENT;
    case EBADF: return PE_EBADF;
#if EAGAIN != EWOULDBLOCK
    case EWOULDBLOCK:
#endif
    case EAGAIN: return PE_EAGAIN;
    case EACCES: return PE_EACCES;
    case EEXIST: return PE_EEXIST;
    case ENOTDIR: return PE_ENOTDIR;
    case EISDIR: return PE_EISDIR;
    case EINVAL: return PE_EINVAL;
    case ENOSPC: return PE_ENOSPC;
    case EPIPE: return PE_EPIPE;
    case ENOSYS: return PE_ENOSYS;
    case ENOTCONN: return PE_ENOTCONN;
    case ECONNREFUSED: return PE_ECONNREFUSED;
    default: return PE_EINVAL;
    }
}

int map_open_flags(u32 flags) {
    int f;
    switch (flags & MO_ACCMODE) {
    case MO_WRONLY: f = O_WRONLY; break;
    case MO_RDWR: f = O_RDWR; break;
    default: f = O_RDONLY; break;
    }
    if (flags & MO_CREAT)
        f |= O_CREAT;
    if (flags & MO_TRUNC)
        f |= O_TRUNC;
    if (flags & MO_APPEND)
        f |= O_APPEND;
    if (flags & MO_EXCL)
        f |= O_EXCL;
    return f;
}

// Executes real syscalls for the portable numbers. All host-specific
// knowledge lives here; the marshalling layer above stays metadata-only.
class RealBackend : public HostBackend {
public:
    const char* name() const override { return "real-host"; }

    SysResult execute(const MarshalledCall& call) override {
        const auto& a = call.args;
        switch (call.number) {
        case PSYS_open: {
            std::string path = path_arg(a[0]);
            int fd;
            do {
                fd = ::open(path.c_str(), map_open_flags(static_cast<u32>(scalar_arg_value(a[2]))),
                            static_cast<mode_t>(scalar_arg_value(a[3])));
            } while (fd < 0 && errno == EINTR);
            return plain(fd);
        }
        case PSYS_close:
            return plain(::close(static_cast<int>(scalar_arg_value(a[0]))));
        case PSYS_read: {
            std::vector<u8> buf(a[1].declared_size);
            ssize_t n;
            do {
                n = ::read(static_cast<int>(scalar_arg_value(a[0])), buf.data(), buf.size());
            } while (n < 0 && errno == EINTR);
            return with_count_buffer(n, std::move(buf));
        }
        case PSYS_write: {
            ssize_t n;
            do {
                n = ::write(static_cast<int>(scalar_arg_value(a[0])), a[1].bytes.data(), a[1].bytes.size());
            } while (n < 0 && errno == EINTR);
            return plain(n);
        }
        case PSYS_lseek: {
            off_t pos = ::lseek(static_cast<int>(scalar_arg_value(a[0])),
                                static_cast<off_t>(scalar_arg_value(a[1])),
                                whence(static_cast<u32>(scalar_arg_value(a[2]))));
            return plain(pos);
        }
        case PSYS_unlink:
            return plain(::unlink(path_arg(a[0]).c_str()));
        case PSYS_mkdir:
            return plain(::mkdir(path_arg(a[0]).c_str(), static_cast<mode_t>(scalar_arg_value(a[1]))));
        case PSYS_stat: {
            struct stat st{};
            int rv = ::stat(path_arg(a[0]).c_str(), &st);
            std::vector<u8> out(kStatBufSize, 0);
            if (rv == 0) {
                u64 size = static_cast<u64>(st.st_size);
                u32 kind = S_ISDIR(st.st_mode) ? 1u : (S_ISFIFO(st.st_mode) ? 2u : 0u);
                std::memcpy(out.data(), &size, 8);
                std::memcpy(out.data() + 8, &kind, 4);
            }
            return with_buffer(rv, std::move(out));
        }
        case PSYS_pipe: {
            int fds[2];
            int rv = ::pipe(fds);
            std::vector<u8> out(8, 0);
            if (rv == 0) {
                set_nonblocking(fds[0]);
                set_nonblocking(fds[1]);
                u32 r = static_cast<u32>(fds[0]), w = static_cast<u32>(fds[1]);
                std::memcpy(out.data(), &r, 4);
                std::memcpy(out.data() + 4, &w, 4);
            }
            return with_buffer(rv, std::move(out));
        }
        case PSYS_socket: {
            if (scalar_arg_value(a[0]) != 1 || scalar_arg_value(a[1]) != 1)
                return SysResult{-1, PE_EINVAL, {}};
            int fd = ::socket(AF_INET, SOCK_STREAM, 0);
            return plain(fd);
        }
        case PSYS_connect: {
            int fd = static_cast<int>(scalar_arg_value(a[0]));
            sockaddr_in sa{};
            if (!parse_addr(a[1].bytes, &sa))
                return SysResult{-1, PE_EINVAL, {}};
            int rv;
            do {
                rv = ::connect(fd, reinterpret_cast<sockaddr*>(&sa), sizeof(sa));
            } while (rv < 0 && errno == EINTR);
            if (rv == 0)
                set_nonblocking(fd); // data path is non-blocking; see docs/os.md
            return plain(rv);
        }
        case PSYS_send: {
            ssize_t n;
            do {
                n = ::send(static_cast<int>(scalar_arg_value(a[0])), a[1].bytes.data(), a[1].bytes.size(),
                           MSG_NOSIGNAL);
            } while (n < 0 && errno == EINTR);
            return plain(n);
        }
        case PSYS_recv: {
            std::vector<u8> buf(a[1].declared_size);
            ssize_t n;
            do {
                n = ::recv(static_cast<int>(scalar_arg_value(a[0])), buf.data(), buf.size(), 0);
            } while (n < 0 && errno == EINTR);
            return with_count_buffer(n, std::move(buf));
        }
        case PSYS_getpid:
            return plain(::getpid());
        default:
            return SysResult{-1, PE_ENOSYS, {}};
        }
    }

private:
    static std::string path_arg(const TaggedArg& a) {
        return std::string(reinterpret_cast<const char*>(a.bytes.data()), a.bytes.size());
    }

    static int whence(u32 w) {
        switch (w) {
        case SEEK_W_CUR: return SEEK_CUR;
        case SEEK_W_END: return SEEK_END;
        default: return SEEK_SET;
        }
    }

    static void set_nonblocking(int fd) {
        int fl = ::fcntl(fd, F_GETFL, 0);
        if (fl >= 0)
            ::fcntl(fd, F_SETFL, fl | O_NONBLOCK);
    }

    // "ip:port" in ASCII; the portable wire format for connect.
    static bool parse_addr(const std::vector<u8>& bytes, sockaddr_in* sa) {
        std::string s(reinterpret_cast<const char*>(bytes.data()), bytes.size());
        size_t colon = s.rfind(':');
        if (colon == std::string::npos)
            return false;
        std::string host = s.substr(0, colon);
        int port = 0;
        for (size_t i = colon + 1; i < s.size(); i++) {
            if (s[i] < '0' || s[i] > '9')
                return false;
            port = port * 10 + (s[i] - '0');
        }
        if (port <= 0 || port > 65535)
            return false;
        sa->sin_family = AF_INET;
        sa->sin_port = htons(static_cast<uint16_t>(port));
        return ::inet_pton(AF_INET, host.c_str(), &sa->sin_addr) == 1;
    }

    static SysResult plain(i64 rv) {
        if (rv < 0)
            return SysResult{-1, map_host_errno(errno), {}};
        return SysResult{rv, 0, {}};
    }

    // For read/recv: the host wrote rv bytes; vm_syscall zero-fills the tail.
    static SysResult with_count_buffer(i64 rv, std::vector<u8> buf) {
        if (rv < 0)
            return SysResult{-1, map_host_errno(errno), {}};
        if (static_cast<u64>(rv) < buf.size())
            buf.resize(static_cast<size_t>(rv));
        return SysResult{rv, 0, {std::move(buf)}};
    }

    // For stat/pipe: the whole buffer is meaningful regardless of rv.
    static SysResult with_buffer(i64 rv, std::vector<u8> buf) {
        if (rv < 0)
            return SysResult{-1, map_host_errno(errno), {}};
        return SysResult{rv, 0, {std::move(buf)}};
    }
};

} // namespace

std::unique_ptr<HostBackend> make_real_backend() {
    return std::make_unique<RealBackend>();
}

} // namespace mcrv
