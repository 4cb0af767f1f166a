#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>

#include "helpers.hpp"

using namespace testutil;

namespace {

struct CmdResult {
    int exit_code = -1;
    std::string out;
};

CmdResult cli(const std::string& dir, const std::string& args) {
    std::string cmd = "cd '" + dir + "' && '" + MCRV_CLI_PATH + "' " + args + " 2>&1";
    std::FILE* p = popen(cmd.c_str(), "r");
    REQUIRE(p != nullptr);
    CmdResult r;
    char buf[4096];
    size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, p)) > 0)
        r.out.append(buf, n);
    int status = pclose(p);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string fresh_dir() {
    char tmpl[] = "/tmp/mcrv_cli_XXXXXX";
    REQUIRE(mkdtemp(tmpl) != nullptr);
    return tmpl;
}

} // namespace

TEST_CASE("exit codes: ok, violation, usage, replay mismatch, limits") {
    std::string dir = fresh_dir();
    std::string rw = corpus_path("rw.mir");

    CHECK(cli(dir, "run --os virtual '" + rw + "'").exit_code == 0);

    write_file(dir + "/bad.mir", "fn main/0 regs 1 { b0: boom }");
    CmdResult parse_err = cli(dir, "run --os virtual bad.mir");
    CHECK(parse_err.exit_code == 2);
    CHECK(parse_err.out.find("unknown opcode") != std::string::npos);

    write_file(dir + "/fail.mir", "fn main/0 regs 1 { b0: const r0 0\n assert r0\n exit 0 }");
    CmdResult viol = cli(dir, "run --os virtual fail.mir");
    CHECK(viol.exit_code == 1);
    CHECK(viol.out.find("assertion-failure") != std::string::npos);
    CHECK(viol.out.find("counterexample saved") != std::string::npos);
    CHECK(read_file(dir + "/mcrv.ce").find("#") == 0); // default path, comment header

    // Record rw, then replay a different program: exit 3.
    CHECK(cli(dir, "run --os passthrough --trace rw.sctr '" + rw + "'").exit_code == 0);
    write_file(dir + "/other.mir", "fn main/0 regs 2 { b0: syscall r0 14()\n exit 0 }");
    CmdResult mm = cli(dir, "run --os replay --trace rw.sctr other.mir");
    CHECK(mm.exit_code == 3);
    CHECK(mm.out.find("assume-violation-in-run-mode") != std::string::npos);
    CHECK(mm.out.find("replay mismatch") != std::string::npos);

    CmdResult lim = cli(dir, "verify --os virtual --max-states 3 '" + corpus_path("pipe.mir") + "'");
    CHECK(lim.exit_code == 4);
    CHECK(lim.out.find("limit-exceeded") != std::string::npos);
}

TEST_CASE("flag matrix: conflicts exit 2 naming the flags, before execution") {
    std::string dir = fresh_dir();
    std::string rw = corpus_path("rw.mir");
    struct Case {
        std::string args;
        std::string needle;
    };
    std::vector<Case> cases = {
        {"verify --os passthrough --trace t.sctr", "mode matrix"},
        {"sim --os passthrough --trace t.sctr", "--os passthrough"},
        {"run --os replay", "--trace"},
        {"run --os passthrough", "--trace"},
        {"run --os virtual --trace t.sctr", "--trace"},
        {"run --os virtual --matching causal", "--matching causal"},
        {"run --os passthrough --trace t.sctr --file a=b", "--file"},
        {"run --os replay --trace t.sctr --socket-script s", "--socket-script"},
        {"run --os nonsense", "--os"},
    };
    for (const Case& c : cases) {
        CmdResult r = cli(dir, c.args + " '" + rw + "'");
        CHECK_MESSAGE(r.exit_code == 2, (c.args + " -> " + std::to_string(r.exit_code) + "\n" + r.out));
        CHECK_MESSAGE(r.out.find(c.needle) != std::string::npos, (c.args + " output: " + r.out));
        CHECK(r.out.find("verdict") == std::string::npos); // nothing executed
    }
}

TEST_CASE("config file mirrors flags and flags win") {
    std::string dir = fresh_dir();
    write_file(dir + "/in.txt", "hi");
    write_file(dir + "/prog.mir", R"(str path "in.txt"
fn main/0 regs 10 {
b0:
  const r0 $path
  const r1 6
  const r2 0
  const r3 0
  syscall r4 1(r0, r1, r2, r3)
  const r5 2
  alloc r6 r5
  syscall r7 3(r4, r6, r5)
  cmp-eq r8 r7 r5
  assert r8
  exit 0
}
)");
    write_file(dir + "/run.cfg", "os = virtual\nfile = in.txt=in.txt\nseed = 5\n");
    CmdResult ok = cli(dir, "run --config run.cfg prog.mir");
    CHECK(ok.exit_code == 0);

    // A config error (bad preload path) is overridden by the flag.
    write_file(dir + "/bad.cfg", "os = replay\ntrace = missing.sctr\n");
    CmdResult flags_win = cli(dir, "run --config bad.cfg --os virtual --file in.txt=in.txt prog.mir");
    CHECK(flags_win.exit_code == 2); // trace from config conflicts with --os virtual: named conflict
    CHECK(flags_win.out.find("--trace") != std::string::npos);

    CmdResult full_override =
        cli(dir, "run --config bad.cfg --os virtual --trace '' --file in.txt=in.txt prog.mir");
    // Empty --trace clears the config value; virtual run proceeds.
    CHECK(full_override.exit_code == 0);

    write_file(dir + "/junk.cfg", "nonsense = 1\n");
    CmdResult junk = cli(dir, "run --config junk.cfg prog.mir");
    CHECK(junk.exit_code == 2);
    CHECK(junk.out.find("unknown key") != std::string::npos);
}

TEST_CASE("report file carries the stable field set") {
    std::string dir = fresh_dir();
    CmdResult r = cli(dir, "run --os virtual --report rep.kv '" + corpus_path("rw.mir") + "'");
    REQUIRE(r.exit_code == 0);
    std::string rep = read_file(dir + "/rep.kv");
    for (const char* key : {"verdict=", "states=", "transitions=", "fault-kind=", "fault-location=",
                            "trace-consumed=", "trace-total="})
        CHECK_MESSAGE(rep.find(key) != std::string::npos, key);
}

TEST_CASE("trace show and trace order render a recorded trace") {
    std::string dir = fresh_dir();
    std::string rw = corpus_path("rw.mir");
    REQUIRE(cli(dir, "run --os passthrough --trace rw.sctr '" + rw + "'").exit_code == 0);
    CmdResult show = cli(dir, "trace show rw.sctr");
    CHECK(show.exit_code == 0);
    CHECK(show.out.find("7 record(s)") != std::string::npos);
    CHECK(show.out.find("open") != std::string::npos);
    CmdResult order = cli(dir, "trace order rw.sctr");
    CHECK(order.exit_code == 0);
    CHECK(order.out.find("->") != std::string::npos);
    CmdResult dot = cli(dir, "trace order --dot rw.sctr");
    CHECK(dot.exit_code == 0);
    CHECK(dot.out.find("digraph trace {") != std::string::npos);
    CmdResult missing = cli(dir, "trace show nothere.sctr");
    CHECK(missing.exit_code == 2);
}

TEST_CASE("sim follow lands on the recorded violation") {
    std::string dir = fresh_dir();
    write_file(dir + "/fail.mir", R"(fn main/0 regs 3 {
b0:
  choose r0 2
  const r1 0
  cmp-eq r2 r0 r1
  assert r2
  exit 0
}
)");
    CmdResult v = cli(dir, "verify --os virtual --ce fail.ce fail.mir");
    REQUIRE(v.exit_code == 1);
    std::string sim_input = "status\nquit\n";
    write_file(dir + "/.in", sim_input);
    CmdResult sim = cli(dir, "sim --os virtual --follow fail.ce fail.mir < .in");
    CHECK(sim.exit_code == 0);
    CHECK(sim.out.find("assertion-failure at main:b0:3") != std::string::npos);
}
