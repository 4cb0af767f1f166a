#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "marshal.hpp"

namespace mcrv {

// One recorded host interaction. Inputs identify the action; outputs,
// retval and errno are the environment's answer.
struct SyscallRecord {
    u32 seq = 0;
    u32 number = 0;
    std::vector<TaggedArg> args;          // tags + input payloads
    std::vector<std::vector<u8>> outputs; // one per output arg, declared-size bytes
    i64 retval = -1;
    i32 err = 0;

    bool operator==(const SyscallRecord&) const = default;
};

SyscallRecord make_record(u32 seq, const MarshalledCall& call, const SysResult& res);

// Inputs of `call` against the record: same number, same tags/sizes, equal
// scalar-in values and byte-identical buffer-in payloads.
bool inputs_equal(const SyscallRecord& rec, const MarshalledCall& call);

// Human-readable difference, including the first differing byte offset of
// the first differing input payload.
std::string input_diff(const SyscallRecord& rec, const MarshalledCall& call);

struct Trace {
    u32 version = 1;
    Digest table_hash{};
    std::vector<SyscallRecord> records;
};

// Normative layout (little-endian): magic "SCTR", u32 version, 32-byte
// table hash, then per record: u32 number, u16 argc, per arg {u8 tag,
// u32 size, payload for input tags, u32 out-size + payload for outputs},
// i64 retval, i32 errno.
constexpr char kTraceMagic[4] = {'S', 'C', 'T', 'R'};
constexpr u32 kTraceVersion = 1;

Result<Trace> load_trace(const std::string& path);

std::vector<u8> encode_record(const SyscallRecord& rec);

// Append-only writer; every record is flushed before the syscall result is
// released to the guest, so a trace on disk is always a prefix of reality.
class TraceWriter {
public:
    ~TraceWriter();

    // Opens (truncating) and writes the header.
    Status open(const std::string& path);
    Status append(const MarshalledCall& call, const SysResult& res);
    void close();

    u32 records_written() const { return next_seq_; }
    const std::string& path() const { return path_; }

private:
    std::FILE* f_ = nullptr;
    std::string path_;
    u32 next_seq_ = 0;
};

std::string render_record(const SyscallRecord& rec);

} // namespace mcrv
