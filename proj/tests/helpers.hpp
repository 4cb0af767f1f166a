#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "testsupport.hpp"

namespace testutil {

using namespace mcrv;

inline GuestProgram must_parse(const std::string& src) {
    ParseResult pr = parse_program(src);
    if (std::holds_alternative<ParseError>(pr)) {
        FAIL(std::get<ParseError>(pr).render());
    }
    return std::get<GuestProgram>(std::move(pr));
}

inline std::string parse_error_of(const std::string& src) {
    ParseResult pr = parse_program(src);
    REQUIRE(std::holds_alternative<ParseError>(pr));
    return std::get<ParseError>(pr).render();
}

inline std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE_MESSAGE(f.good(), ("cannot open " + path));
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& data) {
    std::ofstream f(path, std::ios::binary);
    REQUIRE(f.good());
    f << data;
}

inline std::string corpus_path(const std::string& name) {
    return std::string(MCRV_CORPUS_DIR) + "/" + name;
}

inline std::unique_ptr<Engine> must_engine(const GuestProgram& p, const OsConfig& cfg, EngineMode mode,
                                           std::unique_ptr<HostBackend> backend = nullptr,
                                           std::vector<std::unique_ptr<Component>> extra = {}) {
    auto r = Engine::create(p, cfg, mode, std::move(backend), std::move(extra));
    if (!r)
        FAIL(r.error());
    return r.take();
}

inline MachineState must_boot(Engine& eng) {
    auto r = eng.boot();
    if (!r)
        FAIL(r.error());
    return r.take();
}

// Steps until choice or terminal.
inline StepEvent settle(Engine& eng, MachineState& s) {
    for (;;) {
        eng.step(s);
        if (s.status != VmStatus::Running)
            break;
    }
    switch (s.status) {
    case VmStatus::Choice: return StepEvent::Choice;
    case VmStatus::Exited: return StepEvent::Exited;
    default: return StepEvent::Faulted;
    }
}

} // namespace testutil
