#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "helpers.hpp"

using namespace testutil;
using namespace mcrv;

namespace {

struct Vm {
    GuestProgram prog;
    std::unique_ptr<Engine> eng;
    MachineState state;

    Vm(const std::string& src, OsConfig cfg = {}, EngineMode mode = EngineMode::Run)
        : prog(must_parse(src)) {
        eng = must_engine(prog, cfg, mode);
        state = must_boot(*eng);
    }
};

} // namespace

TEST_CASE("boot: minimal program has one running thread") {
    Vm vm("fn main/0 regs 1 { b0: exit 0 }");
    CHECK(vm.state.threads.size() == 1);
    CHECK(vm.state.status == VmStatus::Running);
    CHECK(vm.state.heap.empty());
}

TEST_CASE("boot: replay mode with a missing trace file names the path") {
    GuestProgram p = must_parse("fn main/0 regs 1 { b0: exit 0 }");
    OsConfig cfg;
    cfg.mode = OsMode::Replay;
    cfg.trace_path = "/nonexistent/trace.sctr";
    auto r = Engine::create(p, cfg, EngineMode::Run);
    REQUIRE(!r.ok());
    CHECK(r.error().find("OsInitError") != std::string::npos);
    CHECK(r.error().find("/nonexistent/trace.sctr") != std::string::npos);
}

TEST_CASE("boot: vfs preload is visible after boot") {
    OsConfig cfg;
    cfg.vfs_preload.emplace_back("in.txt", std::vector<u8>{'h', 'i'});
    Vm vm(read_file(corpus_path("rw.mir")), cfg);
    REQUIRE(vm.state.os.vfs.files.count("in.txt") == 1);
    CHECK(vm.state.os.vfs.files.at("in.txt").bytes == std::vector<u8>{'h', 'i'});
}

TEST_CASE("step: exit 0 yields exited status") {
    Vm vm("fn main/0 regs 1 { b0: exit 0 }");
    StepOutcome o = vm.eng->step(vm.state);
    CHECK(o.event == StepEvent::Exited);
    CHECK(vm.state.status == VmStatus::Exited);
    CHECK(vm.state.exit_code == 0);
}

TEST_CASE("step: failed assert reports kind and location") {
    Vm vm("fn main/0 regs 1 { b0: const r0 0\n assert r0\n exit 0 }");
    vm.eng->step(vm.state); // const
    StepOutcome o = vm.eng->step(vm.state);
    CHECK(o.event == StepEvent::Faulted);
    REQUIRE(vm.state.status == VmStatus::Faulted);
    CHECK(vm.state.fault.kind == FaultKind::AssertionFailure);
    CHECK(fault_location(vm.prog, vm.state.fault) == "main:b0:1");
    CHECK(vm.state.fault.thread == 0);
}

TEST_CASE("step: choose blocks on a choice without advancing") {
    Vm vm("fn main/0 regs 1 { b0: choose r0 3\n exit 0 }");
    StepOutcome o = vm.eng->step(vm.state);
    CHECK(o.event == StepEvent::Choice);
    REQUIRE(vm.state.status == VmStatus::Choice);
    CHECK(vm.state.choice.arity == 3);
    CHECK(vm.state.choice.origin == ChoiceRequest::Origin::GuestChoose);
    CHECK(vm.state.threads[0].frames.back().instr == 0); // not advanced
}

TEST_CASE("resolve_choice: pick range and continuation") {
    Vm vm("fn main/0 regs 1 { b0: choose r0 3\n exit 0 }");
    vm.eng->step(vm.state);
    CHECK(!vm.eng->resolve_choice(vm.state, 3).ok()); // ChoiceOutOfRange
    REQUIRE(vm.eng->resolve_choice(vm.state, 2).ok());
    CHECK(vm.state.status == VmStatus::Running);
    CHECK(vm.state.threads[0].frames.back().regs[0].raw == 2);

    Vm one("fn main/0 regs 1 { b0: choose r0 1\n exit 0 }");
    one.eng->step(one.state);
    CHECK(one.state.choice.arity == 1);
    REQUIRE(one.eng->resolve_choice(one.state, 0).ok());
    CHECK(one.state.status == VmStatus::Running);
}

TEST_CASE("resolve_choice: scheduler picks differ exactly in which thread advanced") {
    // Two spawned threads race on a shared cell; the syscall-free racy
    // stores create a scheduler choice via the shared-object rule.
    const char* src = R"(fn main/0 regs 4 {
b0:
  const r0 8
  alloc r1 r0
  const r2 1
  store r1 r2 8
  spawn t(r1)
  spawn t(r1)
  const r3 0
  ret r3
}
fn t/1 regs 2 {
b0:
  load r1 r0 8
  const r1 7
  store r0 r1 8
  ret r1
}
)";
    Vm vm(src);
    StepEvent ev = settle(*vm.eng, vm.state);
    REQUIRE(ev == StepEvent::Choice);
    REQUIRE(vm.state.choice.origin == ChoiceRequest::Origin::Scheduler);
    REQUIRE(vm.state.choice.arity >= 2);
    auto snap = vm.eng->snapshot(vm.state);
    REQUIRE(snap.ok());

    MachineState s0 = vm.eng->restore(snap.value()).take();
    REQUIRE(vm.eng->resolve_choice(s0, 0).ok());
    vm.eng->step(s0);
    MachineState s1 = vm.eng->restore(snap.value()).take();
    REQUIRE(vm.eng->resolve_choice(s1, 1).ok());
    vm.eng->step(s1);
    CHECK(s0.current != s1.current);
    CHECK(vm_snapshot(s0) != vm_snapshot(s1));
}

TEST_CASE("snapshot/restore/snapshot is byte-identical") {
    Vm vm(read_file(corpus_path("pipe.mir")));
    for (int i = 0; i < 5; i++)
        vm.eng->step(vm.state);
    auto b1 = vm.eng->snapshot(vm.state);
    REQUIRE(b1.ok());
    auto restored = vm.eng->restore(b1.value());
    REQUIRE(restored.ok());
    auto b2 = vm.eng->snapshot(restored.value());
    REQUIRE(b2.ok());
    CHECK(b1.value() == b2.value());
}

TEST_CASE("snapshot in passthrough mode is forbidden") {
    GuestProgram p = must_parse("fn main/0 regs 1 { b0: exit 0 }");
    OsConfig cfg;
    cfg.mode = OsMode::Passthrough;
    cfg.trace_path = "/tmp/mcrv_test_forbidden.sctr";
    auto eng = must_engine(p, cfg, EngineMode::Run, std::make_unique<MockBackend>());
    MachineState s = must_boot(*eng);
    auto snap = eng->snapshot(s);
    REQUIRE(!snap.ok());
    CHECK(snap.error().find("SnapshotForbidden") != std::string::npos);
    auto rest = eng->restore({});
    REQUIRE(!rest.ok());
    CHECK(rest.error().find("SnapshotForbidden") != std::string::npos);
}

TEST_CASE("restore rejects corrupt and cross-version bytes") {
    Vm vm("fn main/0 regs 1 { b0: exit 0 }");
    auto snap = vm.eng->snapshot(vm.state);
    REQUIRE(snap.ok());
    std::vector<u8> bytes = snap.value();

    std::vector<u8> truncated(bytes.begin(), bytes.begin() + bytes.size() / 2);
    CHECK(!vm.eng->restore(truncated).ok());

    std::vector<u8> wrong_version = bytes;
    wrong_version[4] = 99; // version field after magic
    auto r = vm.eng->restore(wrong_version);
    REQUIRE(!r.ok());
    CHECK(r.error().find("version") != std::string::npos);

    std::vector<u8> bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK(!vm.eng->restore(bad_magic).ok());
}

TEST_CASE("midpoint restore and straight run end in identical OS state") {
    std::string src = read_file(corpus_path("rw.mir"));
    GuestProgram p = must_parse(src);
    auto eng = must_engine(p, {}, EngineMode::Run);

    MachineState straight = must_boot(*eng);
    StepEvent ev = settle(*eng, straight);
    REQUIRE(ev == StepEvent::Exited);

    MachineState half = must_boot(*eng);
    for (int i = 0; i < 12; i++)
        eng->step(half);
    auto snap = eng->snapshot(half);
    REQUIRE(snap.ok());
    MachineState resumed = eng->restore(snap.value()).take();
    ev = settle(*eng, resumed);
    REQUIRE(ev == StepEvent::Exited);

    ByteWriter w1, w2;
    straight.os.write(w1);
    resumed.os.write(w2);
    CHECK(w1.data() == w2.data());
    CHECK(digest_hex(eng->digest(straight)) == digest_hex(eng->digest(resumed)));
}

TEST_CASE("digest: allocation order does not matter when structure matches") {
    // choose picks which of two objects is allocated first; both branches
    // then store distinguishable contents through stable register roles.
    const char* src = R"(fn main/0 regs 6 {
b0:
  const r0 8
  choose r1 2
  br r1 one two
one:
  alloc r2 r0
  alloc r3 r0
  jmp join
two:
  alloc r3 r0
  alloc r2 r0
  jmp join
join:
  const r1 0           # forget which branch ran
  const r4 17
  store r2 r4 8
  const r5 99
  store r3 r5 8
  exit 0
}
)";
    Vm vm(src, {}, EngineMode::Verify);
    StepEvent ev = settle(*vm.eng, vm.state);
    REQUIRE(ev == StepEvent::Choice);
    auto snap = vm.eng->snapshot(vm.state);
    REQUIRE(snap.ok());

    auto run_branch = [&](u64 pick) {
        MachineState s = vm.eng->restore(snap.value()).take();
        REQUIRE(vm.eng->resolve_choice(s, pick).ok());
        REQUIRE(settle(*vm.eng, s) == StepEvent::Exited);
        return s;
    };
    MachineState a = run_branch(0);
    MachineState b = run_branch(1);
    CHECK(vm_snapshot(a) != vm_snapshot(b));         // raw ids differ
    CHECK(vm_state_digest(a) == vm_state_digest(b)); // canonical form collides

    // One differing heap byte separates digests again.
    b.heap.begin()->second.bytes[0] ^= 1;
    CHECK(vm_state_digest(a) != vm_state_digest(b));
}

TEST_CASE("digest: restore round-trip preserves the digest") {
    Vm vm(read_file(corpus_path("rw_par.mir")));
    for (int i = 0; i < 6; i++)
        vm.eng->step(vm.state);
    Digest d1 = vm.eng->digest(vm.state);
    auto snap = vm.eng->snapshot(vm.state);
    REQUIRE(snap.ok());
    MachineState back = vm.eng->restore(snap.value()).take();
    CHECK(vm.eng->digest(back) == d1);
}

TEST_CASE("faults: division by zero, uninitialized register, bounds") {
    Vm div("fn main/0 regs 3 { b0: const r0 1\n const r1 0\n divu r2 r0 r1\n exit 0 }");
    settle(*div.eng, div.state);
    REQUIRE(div.state.status == VmStatus::Faulted);
    CHECK(div.state.fault.kind == FaultKind::DivisionByZero);

    Vm uninit("fn main/0 regs 2 { b0: mov r0 r1\n exit 0 }");
    settle(*uninit.eng, uninit.state);
    REQUIRE(uninit.state.status == VmStatus::Faulted);
    CHECK(uninit.state.fault.kind == FaultKind::UninitializedRegister);

    Vm oob("fn main/0 regs 3 { b0: const r0 4\n alloc r1 r0\n const r2 1\n add r1 r1 r2\n store r1 r0 8\n exit 0 }");
    settle(*oob.eng, oob.state);
    REQUIRE(oob.state.status == VmStatus::Faulted);
    CHECK(oob.state.fault.kind == FaultKind::MemoryError);
}

TEST_CASE("faults: pointer misuse rules") {
    // Ordered comparison of pointers.
    Vm lt("fn main/0 regs 3 { b0: const r0 4\n alloc r1 r0\n cmp-lt r2 r1 r1\n exit 0 }");
    settle(*lt.eng, lt.state);
    CHECK(lt.state.fault.kind == FaultKind::MemoryError);

    // Pointer arithmetic escaping the object id.
    Vm esc("fn main/0 regs 3 { b0: const r0 8\n alloc r1 r0\n const r2 0\n sub r2 r2 r0\n add r1 r1 r2\n exit 0 }");
    settle(*esc.eng, esc.state);
    CHECK(esc.state.fault.kind == FaultKind::MemoryError);

    // Partial load of a stored pointer slot.
    Vm part(
        "fn main/0 regs 3 { b0: const r0 16\n alloc r1 r0\n store r1 r1 8\n load r2 r1 4\n exit 0 }");
    settle(*part.eng, part.state);
    CHECK(part.state.fault.kind == FaultKind::MemoryError);

    // Pointer round-trip through memory keeps working.
    Vm ok("fn main/0 regs 4 { b0: const r0 16\n alloc r1 r0\n store r1 r1 8\n load r2 r1 8\n load r3 r2 8\n exit 0 }");
    settle(*ok.eng, ok.state);
    CHECK(ok.state.status == VmStatus::Exited);
}

TEST_CASE("deadlock: reader holding both pipe ends blocks forever") {
    const char* src = R"(fn main/0 regs 6 {
b0:
  const r0 8
  alloc r1 r0
  syscall r2 9(r1)
  load r3 r1 4
  alloc r4 r0
  syscall r5 3(r3, r4, r0)
  exit 0
}
)";
    Vm vm(src);
    StepEvent ev = settle(*vm.eng, vm.state);
    REQUIRE(ev == StepEvent::Faulted);
    CHECK(vm.state.fault.kind == FaultKind::Deadlock);
}

TEST_CASE("determinism: fixed seed yields byte-identical runs") {
    GuestProgram p = must_parse(read_file(corpus_path("pipe.mir")));
    for (u64 seed : {0ull, 1ull, 12345ull}) {
        auto e1 = must_engine(p, {}, EngineMode::Run);
        auto r1 = run_program(*e1, seed);
        REQUIRE(r1.ok());
        auto e2 = must_engine(p, {}, EngineMode::Run);
        auto r2 = run_program(*e2, seed);
        REQUIRE(r2.ok());
        CHECK(r1.value().verdict == r2.value().verdict);
        CHECK(render_report(r1.value(), true) == render_report(r2.value(), true));
    }
}

TEST_CASE("determinism: per-step snapshots agree across replays of the same picks") {
    GuestProgram p = must_parse(read_file(corpus_path("rw_par.mir")));
    auto eng = must_engine(p, {}, EngineMode::Run);

    // First pass: record picks while running to completion with seed 7.
    std::vector<u64> picks;
    MachineState s = must_boot(*eng);
    for (;;) {
        eng->step(s);
        if (s.status == VmStatus::Choice) {
            u64 pick = scheduler_pick(7, s.step_count, s.choice.arity);
            picks.push_back(pick);
            REQUIRE(eng->resolve_choice(s, pick).ok());
        } else if (s.status != VmStatus::Running) {
            break;
        }
    }
    REQUIRE(s.status == VmStatus::Exited);

    // Two more passes replaying the recorded picks; snapshots must agree
    // at every step.
    auto run_with_picks = [&](std::vector<std::vector<u8>>* snaps) {
        MachineState t = must_boot(*eng);
        size_t used = 0;
        for (;;) {
            eng->step(t);
            snaps->push_back(vm_snapshot(t));
            if (t.status == VmStatus::Choice) {
                REQUIRE(used < picks.size());
                REQUIRE(eng->resolve_choice(t, picks[used++]).ok());
            } else if (t.status != VmStatus::Running) {
                break;
            }
        }
        REQUIRE(t.status == VmStatus::Exited);
    };
    std::vector<std::vector<u8>> run_a, run_b;
    run_with_picks(&run_a);
    run_with_picks(&run_b);
    CHECK(run_a == run_b);
}

TEST_CASE("root-frame return value becomes the machine exit code") {
    Vm vm("fn main/0 regs 1 { b0: const r0 7\n ret r0 }");
    REQUIRE(settle(*vm.eng, vm.state) == StepEvent::Exited);
    CHECK(vm.state.exit_code == 7);
}

TEST_CASE("memcpy within one object behaves like memmove") {
    Vm vm(R"(str s "abcdef"
fn main/0 regs 5 {
b0:
  const r0 $s
  const r1 2
  add r2 r0 r1          # s+2
  const r3 4
  memcpy r2 r0 r3       # overlap: s[2..6) = s[0..4)
  exit 0
}
)");
    REQUIRE(settle(*vm.eng, vm.state) == StepEvent::Exited);
    std::vector<u8> expect{'a', 'b', 'a', 'b', 'c', 'd'};
    CHECK(vm.state.heap.at(1).bytes == expect);
}

TEST_CASE("unbounded recursion faults instead of exhausting the host stack") {
    Vm vm(R"(fn main/0 regs 2 {
b0:
  const r0 0
  call r1 f(r0)
  exit 0
}
fn f/1 regs 2 {
b0:
  call r1 f(r0)
  ret r1
}
)");
    REQUIRE(settle(*vm.eng, vm.state) == StepEvent::Faulted);
    CHECK(vm.state.fault.kind == FaultKind::MemoryError);
    CHECK(vm.state.fault.detail.find("stack overflow") != std::string::npos);
}

TEST_CASE("snapshot restore survives random corruption without crashing") {
    Vm vm(read_file(corpus_path("pipe.mir")));
    for (int i = 0; i < 8; i++)
        vm.eng->step(vm.state);
    auto snap = vm.eng->snapshot(vm.state);
    REQUIRE(snap.ok());
    const std::vector<u8>& base = snap.value();
    Rng rng(0xF0F0);
    for (int iter = 0; iter < 300; iter++) {
        std::vector<u8> mutated = base;
        if (rng.chance(40)) {
            mutated.resize(rng.below(mutated.size() + 1));
        } else {
            u64 flips = 1 + rng.below(4);
            for (u64 k = 0; k < flips; k++)
                mutated[rng.below(mutated.size())] ^= static_cast<u8>(1 + rng.below(255));
        }
        auto r = vm.eng->restore(mutated); // must not crash
        if (r.ok()) {
            // A state that passes validation must serialize cleanly again.
            auto again = vm.eng->snapshot(r.value());
            CHECK(again.ok());
        }
    }
}

TEST_CASE("restore at every step does not perturb execution") {
    Rng rng(0xAB5E);
    for (int iter = 0; iter < 6; iter++) {
        GuestProgram p = must_parse(random_safe_program(rng));
        auto eng = must_engine(p, {}, EngineMode::Run);

        auto run_once = [&](bool churn) {
            MachineState s = must_boot(*eng);
            std::vector<std::vector<u8>> snaps;
            for (int guard = 0; guard < 4000; guard++) {
                eng->step(s);
                snaps.push_back(vm_snapshot(s));
                if (churn) {
                    auto r = eng->restore(snaps.back());
                    REQUIRE(r.ok());
                    s = r.take(); // replace the state wholesale
                }
                if (s.status == VmStatus::Choice) {
                    REQUIRE(eng->resolve_choice(s, scheduler_pick(9, s.step_count, s.choice.arity)).ok());
                } else if (s.status != VmStatus::Running) {
                    break;
                }
            }
            REQUIRE(s.status == VmStatus::Exited);
            return snaps;
        };
        CHECK(run_once(false) == run_once(true));
    }
}
