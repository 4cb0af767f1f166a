#pragma once

#include <cstring>
#include <string>
#include <vector>

#include "common.hpp"

namespace mcrv {

// Little-endian byte stream writer; everything serialized (snapshots,
// digests, traces) goes through it so layouts stay canonical.
class ByteWriter {
public:
    void u8v(u8 v) { buf_.push_back(v); }
    void u16v(u16 v) { put(v, 2); }
    void u32v(u32 v) { put(v, 4); }
    void u64v(u64 v) { put(v, 8); }
    void i32v(i32 v) { put(static_cast<u32>(v), 4); }
    void i64v(i64 v) { put(static_cast<u64>(v), 8); }
    void boolean(bool v) { buf_.push_back(v ? 1 : 0); }

    void bytes(const void* data, size_t len) {
        const u8* p = static_cast<const u8*>(data);
        buf_.insert(buf_.end(), p, p + len);
    }
    void blob(const std::vector<u8>& b) {
        u64v(b.size());
        bytes(b.data(), b.size());
    }
    void str(const std::string& s) {
        u64v(s.size());
        bytes(s.data(), s.size());
    }

    const std::vector<u8>& data() const { return buf_; }
    std::vector<u8> take() { return std::move(buf_); }

private:
    template <typename T>
    void put(T v, int n) {
        for (int i = 0; i < n; i++)
            buf_.push_back(static_cast<u8>((static_cast<u64>(v) >> (8 * i)) & 0xff));
    }

    std::vector<u8> buf_;
};

// Reader with explicit failure state; offset() names the byte position of
// the first malformed field for diagnostics.
class ByteReader {
public:
    ByteReader(const u8* data, size_t len) : data_(data), len_(len) {}
    explicit ByteReader(const std::vector<u8>& v) : data_(v.data()), len_(v.size()) {}

    bool failed() const { return failed_; }
    size_t offset() const { return pos_; }
    bool at_end() const { return pos_ == len_; }

    u8 u8v() { return static_cast<u8>(get(1)); }
    u16 u16v() { return static_cast<u16>(get(2)); }
    u32 u32v() { return static_cast<u32>(get(4)); }
    u64 u64v() { return get(8); }
    i32 i32v() { return static_cast<i32>(get(4)); }
    i64 i64v() { return static_cast<i64>(get(8)); }
    bool boolean() { return get(1) != 0; }

    bool bytes(void* out, size_t len) {
        if (!ensure(len))
            return false;
        std::memcpy(out, data_ + pos_, len);
        pos_ += len;
        return true;
    }

    std::vector<u8> blob(u64 max_len = ~0ull) {
        u64 n = u64v();
        if (failed_ || n > max_len || !ensure(n)) {
            failed_ = true;
            return {};
        }
        std::vector<u8> out(data_ + pos_, data_ + pos_ + n);
        pos_ += n;
        return out;
    }

    std::string str(u64 max_len = ~0ull) {
        u64 n = u64v();
        if (failed_ || n > max_len || !ensure(n)) {
            failed_ = true;
            return {};
        }
        std::string out(reinterpret_cast<const char*>(data_ + pos_), n);
        pos_ += n;
        return out;
    }

private:
    u64 get(int n) {
        if (!ensure(n))
            return 0;
        u64 v = 0;
        for (int i = 0; i < n; i++)
            v |= static_cast<u64>(data_[pos_ + i]) << (8 * i);
        pos_ += n;
        return v;
    }

    bool ensure(size_t n) {
        if (failed_ || len_ - pos_ < n) {
            failed_ = true;
            return false;
        }
        return true;
    }

    const u8* data_;
    size_t len_;
    size_t pos_ = 0;
    bool failed_ = false;
};

} // namespace mcrv
