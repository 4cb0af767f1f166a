#include "causal.hpp"

#include <cstring>

namespace mcrv {

void Footprint::read(Res r, i64 num, std::string str) {
    access.emplace(Key{r, num, std::move(str)}, false); // keep an existing mutate
}

void Footprint::mutate(Res r, i64 num, std::string str) {
    access[Key{r, num, std::move(str)}] = true;
}

namespace {

u64 scalar_at(const SyscallRecord& rec, size_t i) {
    return i < rec.args.size() ? scalar_arg_value(rec.args[i]) : 0;
}

std::string path_at(const SyscallRecord& rec, size_t i) {
    if (i >= rec.args.size())
        return {};
    const auto& b = rec.args[i].bytes;
    return std::string(reinterpret_cast<const char*>(b.data()), b.size());
}

} // namespace

Footprint footprint(const SyscallRecord& rec) {
    Footprint fp;
    using Res = Footprint::Res;
    i64 fd0 = static_cast<i64>(static_cast<i32>(scalar_at(rec, 0)));
    switch (rec.number) {
    case PSYS_open: {
        u32 flags = static_cast<u32>(scalar_at(rec, 2));
        if (rec.retval >= 0) {
            fp.mutate(Res::FdTable);
            fp.mutate(Res::Fd, rec.retval);
            if (flags & (MO_CREAT | MO_TRUNC))
                fp.mutate(Res::Path, 0, path_at(rec, 0));
            else
                fp.read(Res::Path, 0, path_at(rec, 0));
        } else {
            fp.read(Res::Path, 0, path_at(rec, 0));
        }
        break;
    }
    case PSYS_close:
        fp.mutate(Res::Fd, fd0);
        fp.mutate(Res::FdTable);
        break;
    case PSYS_read:
    case PSYS_write:
    case PSYS_lseek:
    case PSYS_connect:
    case PSYS_send:
    case PSYS_recv:
        fp.mutate(Res::Fd, fd0); // read/recv move a cursor; connect moves socket state
        break;
    case PSYS_unlink:
    case PSYS_mkdir:
        fp.mutate(Res::Path, 0, path_at(rec, 0));
        fp.mutate(Res::Namespace);
        break;
    case PSYS_stat:
        fp.read(Res::Path, 0, path_at(rec, 0));
        break;
    case PSYS_pipe: {
        fp.mutate(Res::FdTable);
        if (rec.retval == 0 && !rec.outputs.empty() && rec.outputs[0].size() >= 8) {
            u32 rfd = 0, wfd = 0;
            std::memcpy(&rfd, rec.outputs[0].data(), 4);
            std::memcpy(&wfd, rec.outputs[0].data() + 4, 4);
            fp.mutate(Res::Fd, rfd);
            fp.mutate(Res::Fd, wfd);
        }
        break;
    }
    case PSYS_socket:
        fp.mutate(Res::FdTable);
        if (rec.retval >= 0)
            fp.mutate(Res::Fd, rec.retval);
        break;
    case PSYS_getpid:
        fp.read(Res::Pid);
        break;
    default:
        fp.mutate(Res::Universe);
        break;
    }
    return fp;
}

bool commutes(const SyscallRecord& a, const SyscallRecord& b) {
    Footprint fa = footprint(a);
    Footprint fb = footprint(b);
    for (const auto& [key, a_mut] : fa.access) {
        if (key.res == Footprint::Res::Universe)
            return false;
        auto it = fb.access.find(key);
        if (it != fb.access.end() && (a_mut || it->second))
            return false;
    }
    for (const auto& [key, mut] : fb.access)
        if (key.res == Footprint::Res::Universe)
            return false;
    return true;
}

CausalOrder causal_order(const Trace& t) {
    CausalOrder co;
    co.n = static_cast<u32>(t.records.size());
    co.before.assign(co.n, std::vector<bool>(co.n, false));
    if (co.n == 0)
        return co;
    // Dependence edges between i < j that do not commute; `before` is their
    // reachability closure, which equals the all-swap-sequences definition.
    std::vector<std::vector<bool>> dep(co.n, std::vector<bool>(co.n, false));
    for (u32 i = 0; i < co.n; i++)
        for (u32 j = i + 1; j < co.n; j++)
            if (!commutes(t.records[i], t.records[j]))
                dep[i][j] = true;
    for (i64 i = co.n - 1; i >= 0; i--) {
        for (u32 j = static_cast<u32>(i) + 1; j < co.n; j++) {
            if (!dep[static_cast<u32>(i)][j])
                continue;
            co.before[static_cast<u32>(i)][j] = true;
            for (u32 k = j + 1; k < co.n; k++)
                if (co.before[j][k])
                    co.before[static_cast<u32>(i)][k] = true;
        }
    }
    return co;
}

std::vector<std::pair<u32, u32>> CausalOrder::edges() const {
    std::vector<std::pair<u32, u32>> out;
    for (u32 i = 0; i < n; i++)
        for (u32 j = 0; j < n; j++)
            if (before[i][j])
                out.emplace_back(i, j);
    return out;
}

std::vector<std::pair<u32, u32>> CausalOrder::hasse() const {
    std::vector<std::pair<u32, u32>> out;
    for (u32 i = 0; i < n; i++)
        for (u32 j = 0; j < n; j++) {
            if (!before[i][j])
                continue;
            bool direct = true;
            for (u32 k = 0; k < n && direct; k++)
                if (before[i][k] && before[k][j])
                    direct = false;
            if (direct)
                out.emplace_back(i, j);
        }
    return out;
}

bool CausalOrder::minimal_unconsumed(u32 j, const std::vector<bool>& consumed) const {
    for (u32 i = 0; i < n; i++)
        if (before[i][j] && !consumed[i])
            return false;
    return true;
}

} // namespace mcrv
