#include "digest.hpp"

#include <openssl/sha.h>

namespace mcrv {

Digest sha256(const void* data, size_t len) {
    Digest d{};
    SHA256(static_cast<const unsigned char*>(data), len, d.data());
    return d;
}

Digest sha256(const std::vector<u8>& v) {
    return sha256(v.data(), v.size());
}

std::string digest_hex(const Digest& d) {
    return hex_bytes(d.data(), d.size());
}

std::string hex_bytes(const u8* data, size_t len) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (size_t i = 0; i < len; i++) {
        out.push_back(digits[data[i] >> 4]);
        out.push_back(digits[data[i] & 0xf]);
    }
    return out;
}

const char* perrno_name(i32 e) {
    switch (e) {
    case PE_OK: return "OK";
    case PE_ENOENT: return "ENOENT";
    case PE_EBADF: return "EBADF";
    case PE_EAGAIN: return "EAGAIN";
    case PE_EACCES: return "EACCES";
    case PE_EEXIST: return "EEXIST";
    case PE_ENOTDIR: return "ENOTDIR";
    case PE_EISDIR: return "EISDIR";
    case PE_EINVAL: return "EINVAL";
    case PE_ENOSPC: return "ENOSPC";
    case PE_EPIPE: return "EPIPE";
    case PE_ENOSYS: return "ENOSYS";
    case PE_ENOTCONN: return "ENOTCONN";
    case PE_ECONNREFUSED: return "ECONNREFUSED";
    default: return "E?";
    }
}

} // namespace mcrv
