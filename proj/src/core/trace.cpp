#include "trace.hpp"

#include <cstring>

#include "bytes.hpp"

namespace mcrv {

SyscallRecord make_record(u32 seq, const MarshalledCall& call, const SysResult& res) {
    SyscallRecord rec;
    rec.seq = seq;
    rec.number = call.number;
    rec.args = call.args;
    rec.outputs = res.outputs;
    rec.retval = res.retval;
    rec.err = res.err;
    return rec;
}

bool inputs_equal(const SyscallRecord& rec, const MarshalledCall& call) {
    if (rec.number != call.number || rec.args.size() != call.args.size())
        return false;
    for (size_t i = 0; i < rec.args.size(); i++) {
        const TaggedArg& a = rec.args[i];
        const TaggedArg& b = call.args[i];
        if (a.tag != b.tag || a.declared_size != b.declared_size)
            return false;
        if (a.is_output())
            continue;
        if (a.tag == ArgSpec::Kind::BufferIn) {
            if (a.bytes != b.bytes)
                return false;
        } else if (scalar_arg_value(a) != scalar_arg_value(b)) {
            return false;
        }
    }
    return true;
}

std::string input_diff(const SyscallRecord& rec, const MarshalledCall& call) {
    MarshalledCall expected{rec.number, rec.args};
    std::string s = "expected: " + render_call(expected) + "\n  actual: " + render_call(call);
    if (rec.number != call.number)
        return s + "\n  syscall numbers differ";
    if (rec.args.size() != call.args.size())
        return s + "\n  argument counts differ";
    for (size_t i = 0; i < rec.args.size(); i++) {
        const TaggedArg& a = rec.args[i];
        const TaggedArg& b = call.args[i];
        if (a.tag != b.tag)
            return s + "\n  argument " + std::to_string(i) + ": tags differ";
        if (a.declared_size != b.declared_size)
            return s + "\n  argument " + std::to_string(i) + ": declared sizes differ";
        if (a.is_output())
            continue;
        if (a.tag == ArgSpec::Kind::BufferIn) {
            if (a.bytes != b.bytes) {
                size_t n = a.bytes.size() < b.bytes.size() ? a.bytes.size() : b.bytes.size();
                size_t off = 0;
                while (off < n && a.bytes[off] == b.bytes[off])
                    off++;
                return s + "\n  argument " + std::to_string(i) + ": input payloads differ at byte offset " +
                       std::to_string(off);
            }
        } else if (scalar_arg_value(a) != scalar_arg_value(b)) {
            return s + "\n  argument " + std::to_string(i) + ": scalar values differ";
        }
    }
    return s;
}

std::vector<u8> encode_record(const SyscallRecord& rec) {
    ByteWriter w;
    w.u32v(rec.number);
    w.u16v(static_cast<u16>(rec.args.size()));
    size_t out_idx = 0;
    for (const TaggedArg& a : rec.args) {
        w.u8v(static_cast<u8>(a.tag));
        w.u32v(a.declared_size);
        switch (a.tag) {
        case ArgSpec::Kind::ScalarIn32:
            w.u32v(static_cast<u32>(a.scalar));
            break;
        case ArgSpec::Kind::ScalarIn64:
            w.u64v(a.scalar);
            break;
        case ArgSpec::Kind::BufferIn:
            w.bytes(a.bytes.data(), a.bytes.size());
            break;
        default:
            break; // outputs carry no payload on the input side
        }
        if (a.is_output()) {
            const std::vector<u8>& out = out_idx < rec.outputs.size() ? rec.outputs[out_idx] : std::vector<u8>{};
            w.u32v(static_cast<u32>(out.size()));
            w.bytes(out.data(), out.size());
            out_idx++;
        }
    }
    w.i64v(rec.retval);
    w.i32v(rec.err);
    return w.take();
}

namespace {

constexpr u32 kMaxArgSize = 16u << 20;

// Returns false on malformed input; `r` keeps the failure offset.
bool decode_record(ByteReader& r, u32 seq, SyscallRecord* rec, std::string* why) {
    rec->seq = seq;
    rec->number = r.u32v();
    u16 argc = r.u16v();
    if (r.failed()) {
        *why = "truncated record header";
        return false;
    }
    rec->args.resize(argc);
    for (u16 i = 0; i < argc; i++) {
        TaggedArg& a = rec->args[i];
        u8 tag = r.u8v();
        if (r.failed() || tag < 1 || tag > 6) {
            *why = "bad argument tag";
            return false;
        }
        a.tag = static_cast<ArgSpec::Kind>(tag);
        a.declared_size = r.u32v();
        if (r.failed() || a.declared_size > kMaxArgSize) {
            *why = "bad argument size";
            return false;
        }
        switch (a.tag) {
        case ArgSpec::Kind::ScalarIn32:
            if (a.declared_size != 4) {
                *why = "scalar-in-32 with size != 4";
                return false;
            }
            a.scalar = r.u32v();
            break;
        case ArgSpec::Kind::ScalarIn64:
            if (a.declared_size != 8) {
                *why = "scalar-in-64 with size != 8";
                return false;
            }
            a.scalar = r.u64v();
            break;
        case ArgSpec::Kind::BufferIn:
            a.bytes.resize(a.declared_size);
            if (!r.bytes(a.bytes.data(), a.bytes.size())) {
                *why = "truncated buffer-in payload";
                return false;
            }
            break;
        case ArgSpec::Kind::ScalarOut32:
            if (a.declared_size != 4) {
                *why = "scalar-out-32 with size != 4";
                return false;
            }
            break;
        case ArgSpec::Kind::ScalarOut64:
            if (a.declared_size != 8) {
                *why = "scalar-out-64 with size != 8";
                return false;
            }
            break;
        case ArgSpec::Kind::BufferOut:
            break;
        }
        if (a.is_output()) {
            u32 out_size = r.u32v();
            if (r.failed() || out_size > kMaxArgSize) {
                *why = "bad output size";
                return false;
            }
            std::vector<u8> out(out_size);
            if (!r.bytes(out.data(), out.size())) {
                *why = "truncated output payload";
                return false;
            }
            rec->outputs.push_back(std::move(out));
        }
    }
    rec->retval = r.i64v();
    rec->err = r.i32v();
    if (r.failed()) {
        *why = "truncated record tail";
        return false;
    }
    return true;
}

} // namespace

Result<Trace> load_trace(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f)
        return Err{"TraceFormatError: cannot open trace file '" + path + "'"};
    std::vector<u8> data;
    u8 chunk[65536];
    size_t n;
    while ((n = std::fread(chunk, 1, sizeof chunk, f)) > 0)
        data.insert(data.end(), chunk, chunk + n);
    std::fclose(f);

    ByteReader r(data);
    char magic[4];
    if (!r.bytes(magic, 4) || std::memcmp(magic, kTraceMagic, 4) != 0)
        return Err{"TraceFormatError: bad magic in '" + path + "'"};
    Trace t;
    t.version = r.u32v();
    if (r.failed())
        return Err{"TraceFormatError: truncated header in '" + path + "'"};
    if (t.version != kTraceVersion)
        return Err{"TraceVersionError: trace version " + std::to_string(t.version) + ", expected " +
                   std::to_string(kTraceVersion)};
    if (!r.bytes(t.table_hash.data(), t.table_hash.size()))
        return Err{"TraceFormatError: truncated table hash in '" + path + "'"};
    if (t.table_hash != syscall_table_hash())
        return Err{"TableHashMismatch: trace was recorded against a different syscall table"};

    u32 seq = 0;
    while (!r.at_end()) {
        size_t start = r.offset();
        SyscallRecord rec;
        std::string why;
        if (!decode_record(r, seq, &rec, &why)) {
            (void)start;
            return Err{"TraceFormatError: " + why + " in record " + std::to_string(seq) + " at byte offset " +
                       std::to_string(r.offset())};
        }
        t.records.push_back(std::move(rec));
        seq++;
    }
    return t;
}

TraceWriter::~TraceWriter() {
    close();
}

Status TraceWriter::open(const std::string& path) {
    close();
    path_ = path;
    f_ = std::fopen(path.c_str(), "wb");
    if (!f_)
        return Err{"TraceIoError: cannot open '" + path + "' for writing"};
    ByteWriter w;
    w.bytes(kTraceMagic, 4);
    w.u32v(kTraceVersion);
    w.bytes(syscall_table_hash().data(), 32);
    if (std::fwrite(w.data().data(), 1, w.data().size(), f_) != w.data().size() || std::fflush(f_) != 0)
        return Err{"TraceIoError: failed to write trace header to '" + path + "'"};
    next_seq_ = 0;
    return ok_status();
}

Status TraceWriter::append(const MarshalledCall& call, const SysResult& res) {
    if (!f_)
        return Err{"TraceIoError: trace file is not open"};
    SyscallRecord rec = make_record(next_seq_, call, res);
    std::vector<u8> bytes = encode_record(rec);
    if (std::fwrite(bytes.data(), 1, bytes.size(), f_) != bytes.size() || std::fflush(f_) != 0)
        return Err{"TraceIoError: failed to append record " + std::to_string(next_seq_) + " to '" + path_ + "'"};
    next_seq_++;
    return ok_status();
}

void TraceWriter::close() {
    if (f_) {
        std::fclose(f_);
        f_ = nullptr;
    }
}

std::string render_record(const SyscallRecord& rec) {
    std::string s = "#" + std::to_string(rec.seq) + " ";
    MarshalledCall call{rec.number, rec.args};
    s += render_call(call);
    s += " -> retval " + std::to_string(rec.retval);
    if (rec.err != 0)
        s += ", errno " + std::to_string(rec.err) + " (" + perrno_name(rec.err) + ")";
    size_t k = 0;
    for (const TaggedArg& a : rec.args) {
        if (!a.is_output() || k >= rec.outputs.size())
            continue;
        const auto& out = rec.outputs[k];
        std::string hex = hex_bytes(out.data(), out.size() > 16 ? 16 : out.size());
        s += "\n    out[" + std::to_string(k) + "] " + std::to_string(out.size()) + " bytes 0x" + hex +
             (out.size() > 16 ? "..." : "");
        k++;
    }
    return s;
}

} // namespace mcrv
