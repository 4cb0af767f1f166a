#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstring>
#include <string>
#include <vector>

#include "doctest.h"
#include "mcrv/mcrv.h"

namespace {

std::string corpus(const std::string& name) {
    return std::string(MCRV_CORPUS_DIR) + "/" + name;
}

struct Str {
    char* s = nullptr;
    ~Str() { mcrv_string_free(s); }
    std::string view() const { return s ? s : ""; }
};

} // namespace

TEST_CASE("parse, print, and parse errors") {
    mcrv_program* p = nullptr;
    char* err = nullptr;
    REQUIRE(mcrv_program_parse_text("fn main/0 regs 1 { b0: exit 0 }", &p, &err) == MCRV_OK);
    Str printed;
    printed.s = mcrv_program_print(p);
    CHECK(printed.view().find("fn main/0 regs 1") != std::string::npos);
    mcrv_program_free(p);

    REQUIRE(mcrv_program_parse_text("fn main/0 regs 1 { b0: jmp nowhere }", &p, &err) == MCRV_ERR_PARSE);
    REQUIRE(err != nullptr);
    CHECK(std::string(err).find("nowhere") != std::string::npos);
    mcrv_string_free(err);
}

TEST_CASE("run and verify via the C surface") {
    mcrv_program* p = nullptr;
    char* err = nullptr;
    REQUIRE(mcrv_program_parse_file(corpus("rw.mir").c_str(), &p, &err) == MCRV_OK);
    mcrv_config* cfg = mcrv_config_new();
    REQUIRE(mcrv_config_set_mode(cfg, "virtual", &err) == MCRV_OK);

    mcrv_report* rep = nullptr;
    REQUIRE(mcrv_run(p, cfg, 0, &rep, &err) == MCRV_OK);
    CHECK(std::string(mcrv_report_verdict(rep)) == "ok");
    CHECK(mcrv_report_exit_code(rep) == 0);
    Str kv;
    kv.s = mcrv_report_render_kv(rep);
    CHECK(kv.view().find("verdict=ok") == 0);
    CHECK(kv.view().find("trace-consumed=-1") != std::string::npos);
    mcrv_report_free(rep);

    REQUIRE(mcrv_verify(p, cfg, 0, 0, &rep, &err) == MCRV_OK);
    CHECK(std::string(mcrv_report_verdict(rep)) == "ok");
    mcrv_report_free(rep);
    mcrv_config_free(cfg);
    mcrv_program_free(p);
}

TEST_CASE("verify in passthrough is a config error") {
    mcrv_program* p = nullptr;
    char* err = nullptr;
    REQUIRE(mcrv_program_parse_text("fn main/0 regs 1 { b0: exit 0 }", &p, &err) == MCRV_OK);
    mcrv_config* cfg = mcrv_config_new();
    REQUIRE(mcrv_config_set_mode(cfg, "passthrough", &err) == MCRV_OK);
    mcrv_config_set_trace_path(cfg, "/tmp/mcrv_capi.sctr");
    mcrv_report* rep = nullptr;
    CHECK(mcrv_verify(p, cfg, 0, 0, &rep, &err) == MCRV_ERR_CONFIG);
    REQUIRE(err != nullptr);
    CHECK(std::string(err).find("mode matrix") != std::string::npos);
    mcrv_string_free(err);
    mcrv_config_free(cfg);
    mcrv_program_free(p);
}

TEST_CASE("engine: step, back and digest obey the snapshot contract") {
    mcrv_program* p = nullptr;
    char* err = nullptr;
    REQUIRE(mcrv_program_parse_file(corpus("rw.mir").c_str(), &p, &err) == MCRV_OK);
    mcrv_config* cfg = mcrv_config_new();
    mcrv_engine* e = nullptr;
    REQUIRE(mcrv_engine_new(p, cfg, 0, &e, &err) == MCRV_OK);

    Str boot_digest;
    boot_digest.s = mcrv_engine_digest_hex(e);

    int stepped = 0;
    for (int i = 0; i < 50; i++) {
        char* ev = nullptr;
        if (mcrv_engine_step(e, &ev) != MCRV_OK)
            break;
        mcrv_string_free(ev);
        stepped++;
    }
    CHECK(stepped > 10);
    CHECK(mcrv_engine_steps_taken(e) == static_cast<uint64_t>(stepped));
    Str mid_digest;
    mid_digest.s = mcrv_engine_digest_hex(e);
    CHECK(mid_digest.view() != boot_digest.view());

    for (int i = 0; i < stepped; i++)
        REQUIRE(mcrv_engine_back(e) == MCRV_OK);
    Str back_digest;
    back_digest.s = mcrv_engine_digest_hex(e);
    CHECK(back_digest.view() == boot_digest.view());
    CHECK(mcrv_engine_back(e) == MCRV_ERR_RANGE); // step 0
    mcrv_engine_free(e);
    mcrv_config_free(cfg);
    mcrv_program_free(p);
}

TEST_CASE("engine: memory and register rendering") {
    mcrv_program* p = nullptr;
    char* err = nullptr;
    REQUIRE(mcrv_program_parse_text("str s \"hi\"\nfn main/0 regs 2 { b0: const r0 $s\n exit 0 }", &p, &err) ==
            MCRV_OK);
    mcrv_config* cfg = mcrv_config_new();
    mcrv_engine* e = nullptr;
    REQUIRE(mcrv_engine_new(p, cfg, 0, &e, &err) == MCRV_OK);
    char* ev = nullptr;
    REQUIRE(mcrv_engine_step(e, &ev) == MCRV_OK);
    mcrv_string_free(ev);
    Str regs;
    regs.s = mcrv_engine_regs(e);
    CHECK(regs.view().find("ptr obj 1 off 0") != std::string::npos);
    char* dump = nullptr;
    REQUIRE(mcrv_engine_mem(e, 1, 0, 2, &dump, &err) == MCRV_OK);
    CHECK(std::string(dump).find("68 69") != std::string::npos);
    mcrv_string_free(dump);
    CHECK(mcrv_engine_mem(e, 1, 0, 99, &dump, &err) == MCRV_ERR_RANGE);
    mcrv_string_free(err);
    err = nullptr;
    mcrv_engine_free(e);
    mcrv_config_free(cfg);
    mcrv_program_free(p);
}

TEST_CASE("engine in passthrough mode is rejected") {
    mcrv_program* p = nullptr;
    char* err = nullptr;
    REQUIRE(mcrv_program_parse_text("fn main/0 regs 1 { b0: exit 0 }", &p, &err) == MCRV_OK);
    mcrv_config* cfg = mcrv_config_new();
    REQUIRE(mcrv_config_set_mode(cfg, "passthrough", &err) == MCRV_OK);
    mcrv_config_set_trace_path(cfg, "/tmp/mcrv_capi2.sctr");
    mcrv_engine* e = nullptr;
    CHECK(mcrv_engine_new(p, cfg, 0, &e, &err) == MCRV_ERR_CONFIG);
    mcrv_string_free(err);
    mcrv_config_free(cfg);
    mcrv_program_free(p);
}

TEST_CASE("trace handles: load failure and rendering") {
    mcrv_trace* t = nullptr;
    char* err = nullptr;
    CHECK(mcrv_trace_load("/nonexistent.sctr", &t, &err) == MCRV_ERR_IO);
    mcrv_string_free(err);
}

TEST_CASE("component stack override through the C surface") {
    // Without vproc in the stack, getpid is unimplemented: -ENOSYS.
    mcrv_program* p = nullptr;
    char* err = nullptr;
    REQUIRE(mcrv_program_parse_text("fn main/0 regs 4 {\nb0:\n  syscall r0 14()\n  const r1 -38\n"
                                    "  cmp-eq r2 r0 r1\n  assert r2\n  exit 0\n}\n",
                                    &p, &err) == MCRV_OK);
    mcrv_config* cfg = mcrv_config_new();
    REQUIRE(mcrv_config_set_components(cfg, "vsock,vfs") == MCRV_OK);
    mcrv_report* rep = nullptr;
    REQUIRE(mcrv_run(p, cfg, 0, &rep, &err) == MCRV_OK);
    CHECK(std::string(mcrv_report_verdict(rep)) == "ok");
    mcrv_report_free(rep);

    // An unknown component name is rejected.
    REQUIRE(mcrv_config_set_components(cfg, "nonsense") == MCRV_OK);
    mcrv_status st = mcrv_run(p, cfg, 0, &rep, &err);
    CHECK(st == MCRV_ERR_CONFIG);
    mcrv_string_free(err);
    mcrv_config_free(cfg);
    mcrv_program_free(p);
}
