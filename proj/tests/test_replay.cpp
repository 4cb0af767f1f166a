#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <unistd.h>

#include "helpers.hpp"

using namespace testutil;
using namespace mcrv;

TEST_CASE("exact replay: matching call consumes the next record verbatim") {
    Trace t;
    t.records.push_back(rec_read(0, 3, 16, {'a', 'b', 'c'}));
    CausalOrder co = causal_order(t);
    ReplayCursorState cur = replay_cursor(t);
    auto out = replay_syscall(cur, t, co, Matching::Exact, call_of(t.records[0]));
    REQUIRE(out.matched);
    CHECK(out.seq == 0);
    CHECK(out.rec->retval == 3);
    std::vector<u8> expect{'a', 'b', 'c'};
    expect.resize(16, 0);
    CHECK(out.rec->outputs[0] == expect);
    CHECK(cur.consumed_count == 1);
}

TEST_CASE("exact replay: wrong call reports both sides") {
    Trace t;
    t.records.push_back(rec_read(0, 3, 8));
    CausalOrder co = causal_order(t);
    ReplayCursorState cur = replay_cursor(t);
    MarshalledCall wr;
    {
        std::vector<ConcreteArg> args(3);
        args[0].scalar = 3;
        args[1].bytes = {'z'};
        args[1].buffer_len = 1;
        args[2].scalar = 1;
        wr = build_marshalled(*find_syscall(PSYS_write), args);
    }
    auto out = replay_syscall(cur, t, co, Matching::Exact, wr);
    REQUIRE(!out.matched);
    CHECK(out.mismatch.find("expected") != std::string::npos);
    CHECK(out.mismatch.find("read") != std::string::npos);
    CHECK(out.mismatch.find("write") != std::string::npos);
    CHECK(cur.consumed_count == 0);
}

TEST_CASE("mismatch diff names the first differing input byte") {
    Trace t;
    t.records.push_back(rec_write(0, 3, {'a', 'b', 'c', 'd'}));
    CausalOrder co = causal_order(t);
    ReplayCursorState cur = replay_cursor(t);
    MarshalledCall actual = call_of(t.records[0]);
    actual.args[1].bytes[2] = 'X';
    auto out = replay_syscall(cur, t, co, Matching::Exact, actual);
    REQUIRE(!out.matched);
    CHECK(out.mismatch.find("byte offset 2") != std::string::npos);
}

TEST_CASE("causal replay accepts commuting reorder that exact rejects") {
    Trace t;
    t.records.push_back(rec_read(0, 3, 100));
    t.records.push_back(rec_read(1, 4, 101));
    CausalOrder co = causal_order(t);

    ReplayCursorState exact_cur = replay_cursor(t);
    auto rejected = replay_syscall(exact_cur, t, co, Matching::Exact, call_of(t.records[1]));
    CHECK(!rejected.matched);

    ReplayCursorState causal_cur = replay_cursor(t);
    auto first = replay_syscall(causal_cur, t, co, Matching::Causal, call_of(t.records[1]));
    REQUIRE(first.matched);
    CHECK(first.seq == 1);
    auto second = replay_syscall(causal_cur, t, co, Matching::Causal, call_of(t.records[0]));
    REQUIRE(second.matched);
    CHECK(second.seq == 0);
    CHECK(causal_cur.consumed_count == 2);
}

TEST_CASE("commutes: documented examples") {
    SyscallRecord r3 = rec_read(0, 3, 100);
    SyscallRecord r4 = rec_read(1, 4, 101);
    SyscallRecord w3 = rec_write(2, 3, {'x'});
    CHECK(commutes(r3, r4));
    CHECK(!commutes(w3, r3));
    CHECK(commutes(rec_getpid(3), rec_getpid(4)));
    CHECK(!commutes(r3, r3)); // same fd: shared cursor
    CHECK(commutes(rec_stat(5, "a"), rec_stat(6, "a"))); // read-only, cursor-free
    CHECK(!commutes(rec_unknown(7, 1), rec_getpid(8)));  // unknown never commutes
    CHECK(!commutes(rec_open(9, "a", MO_RDONLY, 0, 10), rec_close(10, 11))); // fd-table
}

TEST_CASE("causal_order: documented examples") {
    Trace single;
    single.records.push_back(rec_getpid(0));
    CHECK(causal_order(single).edges().empty());

    Trace t;
    t.records.push_back(rec_read(0, 3, 100));
    t.records.push_back(rec_read(1, 4, 101));
    t.records.push_back(rec_write(2, 3, {'x'}));
    CausalOrder co = causal_order(t);
    auto edges = co.edges();
    REQUIRE(edges.size() == 1);
    CHECK(edges[0] == std::pair<u32, u32>{0, 2});
}

TEST_CASE("causal_order equals the swap oracle on random traces") {
    Rng rng(0xCAFE);
    for (int iter = 0; iter < 150; iter++) {
        u32 len = 2 + static_cast<u32>(rng.below(6)); // up to 7 records here
        Trace t = random_trace(rng, len, false);
        CausalOrder co = causal_order(t);
        auto oracle = oracle_order(t.records);
        for (u32 i = 0; i < len; i++)
            for (u32 j = 0; j < len; j++)
                CHECK_MESSAGE(co.before[i][j] == oracle[i][j],
                              ("iter " + std::to_string(iter) + ": pair " + std::to_string(i) + "," +
                               std::to_string(j)));
    }
}

TEST_CASE("causal replay accepts exactly the linear extensions") {
    Rng rng(0xBEEF);
    int accepted = 0, rejected = 0;
    for (int iter = 0; iter < 120; iter++) {
        u32 len = 2 + static_cast<u32>(rng.below(5));
        Trace t = random_trace(rng, len, true);
        CausalOrder co = causal_order(t);
        // Random permutation.
        std::vector<u32> perm(len);
        for (u32 i = 0; i < len; i++)
            perm[i] = i;
        for (u32 i = len; i > 1; i--)
            std::swap(perm[i - 1], perm[rng.below(i)]);

        bool is_linear_ext = true;
        for (u32 a = 0; a < len && is_linear_ext; a++)
            for (u32 b = a + 1; b < len; b++)
                if (co.precedes(perm[b], perm[a])) {
                    is_linear_ext = false;
                    break;
                }

        ReplayCursorState cur = replay_cursor(t);
        bool all_matched = true;
        for (u32 k = 0; k < len && all_matched; k++) {
            auto out = replay_syscall(cur, t, co, Matching::Causal, call_of(t.records[perm[k]]));
            if (!out.matched)
                all_matched = false;
            else
                CHECK(out.seq == perm[k]); // unique inputs: matches itself
        }
        CHECK(all_matched == is_linear_ext);
        (all_matched ? accepted : rejected)++;
    }
    CHECK(accepted > 10);
    CHECK(rejected > 10);
}

TEST_CASE("causal replay accepts everything exact replay accepts") {
    Rng rng(0x5EED);
    for (int iter = 0; iter < 60; iter++) {
        Trace t = random_trace(rng, 1 + static_cast<u32>(rng.below(7)), false);
        CausalOrder co = causal_order(t);
        ReplayCursorState exact_cur = replay_cursor(t);
        ReplayCursorState causal_cur = replay_cursor(t);
        for (const auto& rec : t.records) {
            auto e = replay_syscall(exact_cur, t, co, Matching::Exact, call_of(rec));
            REQUIRE(e.matched); // the original order always replays exactly
            auto c = replay_syscall(causal_cur, t, co, Matching::Causal, call_of(rec));
            REQUIRE(c.matched);
            CHECK(c.rec->retval == e.rec->retval);
        }
    }
}

TEST_CASE("trace exhausted: further calls mismatch") {
    Trace t;
    t.records.push_back(rec_getpid(0));
    CausalOrder co = causal_order(t);
    ReplayCursorState cur = replay_cursor(t);
    REQUIRE(replay_syscall(cur, t, co, Matching::Exact, call_of(t.records[0])).matched);
    auto out = replay_syscall(cur, t, co, Matching::Exact, call_of(t.records[0]));
    REQUIRE(!out.matched);
    CHECK(out.mismatch.find("exhausted") != std::string::npos);
}

TEST_CASE("record-then-replay: rw corpus round-trips through a scripted host") {
    // Script a mock so the rw corpus completes in passthrough, then replay
    // the trace with a poisoned backend: zero host syscalls, same verdict.
    char tmpl[] = "/tmp/mcrv_rt_XXXXXX";
    REQUIRE(mkdtemp(tmpl) != nullptr);
    std::string trace_path = std::string(tmpl) + "/rw.sctr";

    GuestProgram p = must_parse(read_file(corpus_path("rw.mir")));
    std::vector<u8> content;
    for (const char* c = "hello from rw\n"; *c; c++)
        content.push_back(static_cast<u8>(*c));
    auto mock = std::make_unique<MockBackend>();
    mock->script.push_back(SysResult{3, 0, {}});                       // open
    mock->script.push_back(SysResult{14, 0, {}});                      // write
    mock->script.push_back(SysResult{0, 0, {}});                       // close
    mock->script.push_back(SysResult{3, 0, {}});                       // open
    mock->script.push_back(SysResult{14, 0, {content}});               // read
    mock->script.push_back(SysResult{0, 0, {}});                       // close
    mock->script.push_back(SysResult{0, 0, {}});                       // unlink
    {
        OsConfig cfg;
        cfg.mode = OsMode::Passthrough;
        cfg.trace_path = trace_path;
        auto eng = must_engine(p, cfg, EngineMode::Run, std::move(mock));
        auto r = run_program(*eng, 0);
        REQUIRE(r.ok());
        REQUIRE(r.value().verdict == Verdict::Ok);
    }
    {
        OsConfig cfg;
        cfg.mode = OsMode::Replay;
        cfg.trace_path = trace_path;
        auto poison = std::make_unique<PoisonBackend>();
        PoisonBackend* raw = poison.get();
        auto eng = must_engine(p, cfg, EngineMode::Run, std::move(poison));
        auto r = run_program(*eng, 0);
        REQUIRE(r.ok());
        CHECK(r.value().verdict == Verdict::Ok);
        CHECK(r.value().trace_consumed == 7);
        CHECK(r.value().trace_total == 7);
        CHECK(r.value().unconsumed.empty());
        CHECK(raw->invocations == 0);
    }
}

TEST_CASE("unconsumed records at exit are a warning, not a violation") {
    char tmpl[] = "/tmp/mcrv_uc_XXXXXX";
    REQUIRE(mkdtemp(tmpl) != nullptr);
    std::string trace_path = std::string(tmpl) + "/t.sctr";
    TraceWriter w;
    REQUIRE(w.open(trace_path).ok());
    for (i32 fd = 5; fd <= 7; fd++) {
        SyscallRecord rec = rec_close(static_cast<u32>(fd - 5), fd);
        MarshalledCall call = call_of(rec);
        REQUIRE(w.append(call, SysResult{rec.retval, rec.err, rec.outputs}).ok());
    }
    w.close();

    GuestProgram p = must_parse(R"(fn main/0 regs 2 {
b0:
  const r0 5
  syscall r1 2(r0)
  exit 0
}
)");
    OsConfig cfg;
    cfg.mode = OsMode::Replay;
    cfg.trace_path = trace_path;
    auto eng = must_engine(p, cfg, EngineMode::Run);
    auto r = run_program(*eng, 0);
    REQUIRE(r.ok());
    CHECK(r.value().verdict == Verdict::Ok);
    CHECK(r.value().trace_consumed == 1);
    CHECK(r.value().trace_total == 3);
    CHECK(r.value().unconsumed == std::vector<u32>{1, 2});
}

TEST_CASE("run-mode replay mismatch is a violation carrying the diff") {
    char tmpl[] = "/tmp/mcrv_mm_XXXXXX";
    REQUIRE(mkdtemp(tmpl) != nullptr);
    std::string trace_path = std::string(tmpl) + "/t.sctr";
    TraceWriter w;
    REQUIRE(w.open(trace_path).ok());
    SyscallRecord rec = rec_close(0, 5);
    REQUIRE(w.append(call_of(rec), SysResult{0, 0, {}}).ok());
    w.close();

    GuestProgram p = must_parse(R"(fn main/0 regs 2 {
b0:
  syscall r1 14()
  exit 0
}
)");
    OsConfig cfg;
    cfg.mode = OsMode::Replay;
    cfg.trace_path = trace_path;
    auto eng = must_engine(p, cfg, EngineMode::Run);
    auto r = run_program(*eng, 0);
    REQUIRE(r.ok());
    CHECK(r.value().verdict == Verdict::Violation);
    CHECK(r.value().fault.kind == FaultKind::AssumeViolation);
    CHECK(r.value().fault_kind_str == "assume-violation-in-run-mode");
    CHECK(r.value().fault.detail.find("replay mismatch") != std::string::npos);
    CHECK(r.value().fault.detail.find("getpid") != std::string::npos);
}

TEST_CASE("trace loader survives random corruption without crashing") {
    char tmpl[] = "/tmp/mcrv_fz_XXXXXX";
    REQUIRE(mkdtemp(tmpl) != nullptr);
    std::string path = std::string(tmpl) + "/base.sctr";
    TraceWriter w;
    REQUIRE(w.open(path).ok());
    Rng rng(0xF022);
    for (u32 i = 0; i < 5; i++) {
        SyscallRecord rec = rec_read(i, 3, 8 + i, {static_cast<u8>(i)});
        REQUIRE(w.append(call_of(rec), SysResult{rec.retval, rec.err, rec.outputs}).ok());
    }
    w.close();
    std::string base = read_file(path);

    for (int iter = 0; iter < 300; iter++) {
        std::string mutated = base;
        if (rng.chance(40)) {
            mutated = mutated.substr(0, rng.below(mutated.size() + 1));
        } else {
            u64 flips = 1 + rng.below(4);
            for (u64 k = 0; k < flips; k++)
                mutated[rng.below(mutated.size())] ^= static_cast<char>(1 + rng.below(255));
        }
        std::string mpath = std::string(tmpl) + "/m.sctr";
        write_file(mpath, mutated);
        auto t = load_trace(mpath); // must not crash; errors are fine
        if (t.ok()) {
            // Whatever loads must be internally consistent.
            for (u32 i = 0; i < t.value().records.size(); i++)
                CHECK(t.value().records[i].seq == i);
        }
    }
}
