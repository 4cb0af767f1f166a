#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>

namespace mcrv {

using u8 = std::uint8_t;
using u16 = std::uint16_t;
using u32 = std::uint32_t;
using u64 = std::uint64_t;
using i32 = std::int32_t;
using i64 = std::int64_t;

// Portable errno values used by the stand-in OS and stored in traces.
// The real host backend maps host errno to these.
enum PErrno : i32 {
    PE_OK = 0,
    PE_ENOENT = 2,
    PE_EBADF = 9,
    PE_EAGAIN = 11,
    PE_EACCES = 13,
    PE_EEXIST = 17,
    PE_ENOTDIR = 20,
    PE_EISDIR = 21,
    PE_EINVAL = 22,
    PE_ENOSPC = 28,
    PE_EPIPE = 32,
    PE_ENOSYS = 38,
    PE_ENOTCONN = 107,
    PE_ECONNREFUSED = 111,
};

const char* perrno_name(i32 e);

struct Err {
    std::string msg;
};

// Minimal expected-like wrapper; the codebase returns errors as values.
template <typename T>
class Result {
public:
    Result(T v) : v_(std::move(v)) {}
    Result(Err e) : v_(std::move(e)) {}

    bool ok() const { return std::holds_alternative<T>(v_); }
    explicit operator bool() const { return ok(); }

    T& value() { return std::get<T>(v_); }
    const T& value() const { return std::get<T>(v_); }
    T take() { return std::move(std::get<T>(v_)); }

    const std::string& error() const { return std::get<Err>(v_).msg; }

private:
    std::variant<T, Err> v_;
};

struct Unit {};
using Status = Result<Unit>;

inline Status ok_status() { return Status(Unit{}); }

// splitmix64 finalizer; the run-mode scheduler derives picks from it.
inline u64 splitmix64(u64 x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Deterministic pick for run mode: splitmix64 over seed and step count.
inline u64 scheduler_pick(u64 seed, u64 step_count, u64 arity) {
    return splitmix64(seed ^ splitmix64(step_count)) % arity;
}

std::string hex_bytes(const u8* data, size_t len);

} // namespace mcrv
