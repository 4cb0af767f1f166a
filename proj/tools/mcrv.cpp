// mcrv command-line front end: run / verify / sim / trace subcommands over
// the libmcrv C API.

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mcrv/mcrv.h"

namespace {

struct Options {
    std::string program_path;
    std::string os_mode = "virtual";
    std::string trace_path;
    std::string matching = "exact";
    uint64_t seed = 0;
    uint64_t max_states = 0;
    uint64_t max_depth = 0;
    std::vector<std::string> preloads; // guest=host
    std::string socket_script;
    std::string report_path;
    std::string ce_path;
    std::string follow_path;
    std::string config_path;
    uint64_t snapshots = 10000;
    bool dot = false;
};

[[noreturn]] void usage_error(const std::string& msg) {
    std::cerr << "error: " << msg << "\n";
    std::exit(2);
}

std::string take_error(char* err) {
    std::string msg = err ? err : "unknown error";
    mcrv_string_free(err);
    return msg;
}

// key=value lines; '#' comments. Flags set on the command line win.
void apply_config_file(Options& o, const std::set<std::string>& explicit_flags) {
    std::ifstream f(o.config_path);
    if (!f)
        usage_error("cannot open config file '" + o.config_path + "'");
    std::string line;
    int line_no = 0;
    auto overridden = [&](const char* key) { return explicit_flags.count(key) > 0; };
    while (std::getline(f, line)) {
        line_no++;
        size_t comment = line.find('#');
        if (comment != std::string::npos)
            line = line.substr(0, comment);
        size_t a = line.find_first_not_of(" \t\r");
        if (a == std::string::npos)
            continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            usage_error("config line " + std::to_string(line_no) + ": expected key=value");
        std::string key = line.substr(a, eq - a);
        std::string value = line.substr(eq + 1);
        while (!key.empty() && (key.back() == ' ' || key.back() == '\t'))
            key.pop_back();
        while (!value.empty() && (value.back() == ' ' || value.back() == '\t' || value.back() == '\r'))
            value.pop_back();
        size_t v = value.find_first_not_of(" \t");
        value = v == std::string::npos ? "" : value.substr(v);
        if (key == "os") {
            if (!overridden("--os"))
                o.os_mode = value;
        } else if (key == "trace") {
            if (!overridden("--trace"))
                o.trace_path = value;
        } else if (key == "matching") {
            if (!overridden("--matching"))
                o.matching = value;
        } else if (key == "seed") {
            if (!overridden("--seed"))
                o.seed = std::stoull(value);
        } else if (key == "max-states") {
            if (!overridden("--max-states"))
                o.max_states = std::stoull(value);
        } else if (key == "max-depth") {
            if (!overridden("--max-depth"))
                o.max_depth = std::stoull(value);
        } else if (key == "file") {
            o.preloads.push_back(value);
        } else if (key == "socket-script") {
            if (!overridden("--socket-script"))
                o.socket_script = value;
        } else if (key == "report") {
            if (!overridden("--report"))
                o.report_path = value;
        } else if (key == "ce") {
            if (!overridden("--ce"))
                o.ce_path = value;
        } else if (key == "snapshots") {
            if (!overridden("--snapshots"))
                o.snapshots = std::stoull(value);
        } else {
            usage_error("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
    }
}

void check_flag_matrix(const Options& o, const std::string& subcommand) {
    if (o.os_mode != "virtual" && o.os_mode != "passthrough" && o.os_mode != "replay")
        usage_error("--os must be virtual, passthrough or replay");
    if (o.matching != "exact" && o.matching != "causal")
        usage_error("--matching must be exact or causal");
    if (subcommand == "verify" && o.os_mode == "passthrough")
        usage_error("--os passthrough conflicts with verify: the passthrough OS mode can only be used in the "
                    "run mode of the checker (mode matrix)");
    if (subcommand == "sim" && o.os_mode == "passthrough")
        usage_error("--os passthrough conflicts with sim: stepping backward is snapshot-based and snapshots "
                    "are forbidden in passthrough mode");
    if ((o.os_mode == "passthrough" || o.os_mode == "replay") && o.trace_path.empty())
        usage_error("--os " + o.os_mode + " requires --trace");
    if (o.os_mode == "virtual" && !o.trace_path.empty())
        usage_error("--trace conflicts with --os virtual");
    if (o.os_mode != "replay" && o.matching == "causal")
        usage_error("--matching causal conflicts with --os " + o.os_mode + "; it applies to replay only");
    if (o.os_mode != "virtual" && !o.preloads.empty())
        usage_error("--file preloads conflict with --os " + o.os_mode + "; the VFS exists in virtual mode only");
    if (o.os_mode != "virtual" && !o.socket_script.empty())
        usage_error("--socket-script conflicts with --os " + o.os_mode + "; scripted peers are virtual-mode only");
}

struct ProgramHandle {
    mcrv_program* p = nullptr;
    ~ProgramHandle() { mcrv_program_free(p); }
};
struct ConfigHandle {
    mcrv_config* c = nullptr;
    ~ConfigHandle() { mcrv_config_free(c); }
};
struct ReportHandle {
    mcrv_report* r = nullptr;
    ~ReportHandle() { mcrv_report_free(r); }
};

void load_program(const Options& o, ProgramHandle& prog) {
    char* err = nullptr;
    if (mcrv_program_parse_file(o.program_path.c_str(), &prog.p, &err) != MCRV_OK)
        usage_error(take_error(err));
}

void build_config(const Options& o, ConfigHandle& cfg) {
    cfg.c = mcrv_config_new();
    char* err = nullptr;
    if (mcrv_config_set_mode(cfg.c, o.os_mode.c_str(), &err) != MCRV_OK)
        usage_error(take_error(err));
    if (mcrv_config_set_matching(cfg.c, o.matching.c_str(), &err) != MCRV_OK)
        usage_error(take_error(err));
    if (!o.trace_path.empty())
        mcrv_config_set_trace_path(cfg.c, o.trace_path.c_str());
    for (const std::string& spec : o.preloads) {
        size_t eq = spec.find('=');
        if (eq == std::string::npos)
            usage_error("--file expects guest-path=host-path, got '" + spec + "'");
        std::string guest = spec.substr(0, eq), host = spec.substr(eq + 1);
        if (mcrv_config_add_preload_file(cfg.c, guest.c_str(), host.c_str(), &err) != MCRV_OK)
            usage_error(take_error(err));
    }
    if (!o.socket_script.empty())
        if (mcrv_config_load_socket_script(cfg.c, o.socket_script.c_str(), &err) != MCRV_OK)
            usage_error(take_error(err));
}

void write_text_file(const std::string& path, const std::string& text, const char* what) {
    std::ofstream f(path, std::ios::binary);
    if (!f)
        usage_error(std::string("cannot write ") + what + " file '" + path + "'");
    f << text;
}

int finish_report(const Options& o, mcrv_report* rep) {
    char* human = mcrv_report_render(rep);
    std::cout << human;
    mcrv_string_free(human);
    if (!o.report_path.empty()) {
        char* kv = mcrv_report_render_kv(rep);
        write_text_file(o.report_path, kv, "report");
        mcrv_string_free(kv);
    }
    std::string verdict = mcrv_report_verdict(rep);
    if (verdict == "violation" && mcrv_report_has_counterexample(rep)) {
        std::string ce = "# counterexample picks, one per line\n";
        for (size_t i = 0; i < mcrv_report_counterexample_len(rep); i++)
            ce += std::to_string(mcrv_report_counterexample_pick(rep, i)) + "\n";
        std::string path = o.ce_path.empty() ? "mcrv.ce" : o.ce_path;
        write_text_file(path, ce, "counterexample");
        std::cout << "counterexample saved to " << path << "\n";
    }
    if (verdict == "ok")
        return 0;
    if (verdict == "limit-exceeded")
        return 4;
    if (verdict == "trace-incompatible-everywhere")
        return 3;
    std::string kind = mcrv_report_fault_kind(rep);
    return kind == "assume-violation-in-run-mode" ? 3 : 1;
}

int cmd_run(const Options& o) {
    ProgramHandle prog;
    ConfigHandle cfg;
    load_program(o, prog);
    build_config(o, cfg);
    ReportHandle rep;
    char* err = nullptr;
    if (mcrv_run(prog.p, cfg.c, o.seed, &rep.r, &err) != MCRV_OK)
        usage_error(take_error(err));
    return finish_report(o, rep.r);
}

int cmd_verify(const Options& o) {
    ProgramHandle prog;
    ConfigHandle cfg;
    load_program(o, prog);
    build_config(o, cfg);
    ReportHandle rep;
    char* err = nullptr;
    if (mcrv_verify(prog.p, cfg.c, o.max_states, o.max_depth, &rep.r, &err) != MCRV_OK)
        usage_error(take_error(err));
    return finish_report(o, rep.r);
}

// ---- interactive simulator ----

struct EngineHandle {
    mcrv_engine* e = nullptr;
    ~EngineHandle() { mcrv_engine_free(e); }
};

void sim_show_line(mcrv_engine* e) {
    char* loc = mcrv_engine_location(e);
    std::cout << "#" << mcrv_engine_steps_taken(e) << " [" << mcrv_engine_status(e) << "] " << loc << "\n";
    mcrv_string_free(loc);
}

bool sim_follow(mcrv_engine* e, const std::string& path) {
    std::ifstream f(path);
    if (!f) {
        std::cout << "cannot open '" << path << "'\n";
        return false;
    }
    std::vector<uint64_t> picks;
    std::string tok;
    while (f >> tok) {
        if (tok[0] == '#') {
            std::getline(f, tok);
            continue;
        }
        picks.push_back(std::stoull(tok));
    }
    size_t used = 0;
    for (;;) {
        if (std::strcmp(mcrv_engine_status(e), "running") == 0) {
            char* ev = nullptr;
            if (mcrv_engine_run_to_choice(e, &ev) != MCRV_OK)
                break;
            mcrv_string_free(ev);
            continue;
        }
        if (std::strcmp(mcrv_engine_status(e), "choice") != 0)
            break;
        if (used >= picks.size())
            break;
        char* err = nullptr;
        if (mcrv_engine_pick(e, picks[used++], &err) != MCRV_OK) {
            std::cout << "follow: " << take_error(err) << "\n";
            return false;
        }
    }
    std::cout << "followed " << used << " pick(s)\n";
    sim_show_line(e);
    if (std::strcmp(mcrv_engine_status(e), "faulted") == 0) {
        char* fault = mcrv_engine_fault(e);
        std::cout << fault << "\n";
        mcrv_string_free(fault);
    }
    return true;
}

int cmd_sim(const Options& o) {
    ProgramHandle prog;
    ConfigHandle cfg;
    load_program(o, prog);
    build_config(o, cfg);
    EngineHandle eng;
    char* err = nullptr;
    if (mcrv_engine_new(prog.p, cfg.c, o.snapshots, &eng.e, &err) != MCRV_OK)
        usage_error(take_error(err));

    if (!o.follow_path.empty())
        sim_follow(eng.e, o.follow_path);
    else
        sim_show_line(eng.e);

    std::string line;
    while (std::cout << "(mcrv) " << std::flush, std::getline(std::cin, line)) {
        std::istringstream in(line);
        std::string cmd;
        if (!(in >> cmd))
            continue;
        if (cmd == "quit" || cmd == "exit")
            break;
        if (cmd == "help") {
            std::cout << "commands: step [n], back [n], run-to-syscall, run-to-choice, pick N, regs,\n"
                         "          mem OBJ OFF LEN, trace-pos, follow FILE, digest, status, quit\n";
        } else if (cmd == "step") {
            uint64_t n = 1;
            in >> n;
            for (uint64_t i = 0; i < n; i++) {
                char* ev = nullptr;
                if (mcrv_engine_step(eng.e, &ev) != MCRV_OK) {
                    std::cout << "cannot step: state is " << mcrv_engine_status(eng.e)
                              << (mcrv_engine_choice_arity(eng.e) ? " (use pick N)" : "") << "\n";
                    break;
                }
                std::cout << ev << "\n";
                mcrv_string_free(ev);
            }
        } else if (cmd == "back") {
            uint64_t n = 1;
            in >> n;
            for (uint64_t i = 0; i < n; i++) {
                if (mcrv_engine_back(eng.e) != MCRV_OK) {
                    std::cout << (mcrv_engine_steps_taken(eng.e) == 0 ? "already at step 0"
                                                                      : "snapshot history exhausted")
                              << "\n";
                    break;
                }
            }
            sim_show_line(eng.e);
        } else if (cmd == "run-to-syscall" || cmd == "run-to-choice") {
            char* ev = nullptr;
            mcrv_status st = cmd == "run-to-syscall" ? mcrv_engine_run_to_syscall(eng.e, &ev)
                                                     : mcrv_engine_run_to_choice(eng.e, &ev);
            if (st != MCRV_OK) {
                std::cout << "cannot run: state is " << mcrv_engine_status(eng.e) << "\n";
            } else {
                std::cout << ev << "\n";
                mcrv_string_free(ev);
            }
        } else if (cmd == "pick") {
            uint64_t n;
            if (!(in >> n)) {
                std::cout << "usage: pick N\n";
                continue;
            }
            char* perr = nullptr;
            if (mcrv_engine_pick(eng.e, n, &perr) != MCRV_OK)
                std::cout << take_error(perr) << "\n";
            else
                sim_show_line(eng.e);
        } else if (cmd == "regs") {
            char* regs = mcrv_engine_regs(eng.e);
            std::cout << regs;
            mcrv_string_free(regs);
        } else if (cmd == "mem") {
            uint64_t obj, off, len;
            if (!(in >> obj >> off >> len)) {
                std::cout << "usage: mem OBJ OFF LEN\n";
                continue;
            }
            char* dump = nullptr;
            char* merr = nullptr;
            if (mcrv_engine_mem(eng.e, obj, off, len, &dump, &merr) != MCRV_OK) {
                std::cout << take_error(merr) << "\n";
            } else {
                std::cout << dump;
                mcrv_string_free(dump);
            }
        } else if (cmd == "trace-pos") {
            int64_t consumed, total;
            mcrv_engine_trace_pos(eng.e, &consumed, &total);
            if (total < 0)
                std::cout << "no trace in this mode\n";
            else
                std::cout << consumed << "/" << total << " records consumed\n";
        } else if (cmd == "follow") {
            std::string path;
            if (!(in >> path)) {
                std::cout << "usage: follow FILE\n";
                continue;
            }
            sim_follow(eng.e, path);
        } else if (cmd == "digest") {
            char* d = mcrv_engine_digest_hex(eng.e);
            std::cout << d << "\n";
            mcrv_string_free(d);
        } else if (cmd == "status") {
            sim_show_line(eng.e);
            if (std::strcmp(mcrv_engine_status(eng.e), "faulted") == 0) {
                char* fault = mcrv_engine_fault(eng.e);
                std::cout << fault << "\n";
                mcrv_string_free(fault);
            }
        } else {
            std::cout << "unknown command '" << cmd << "' (try help)\n";
        }
    }
    return 0;
}

int cmd_trace(const std::string& path, bool order, bool dot) {
    mcrv_trace* t = nullptr;
    char* err = nullptr;
    if (mcrv_trace_load(path.c_str(), &t, &err) != MCRV_OK)
        usage_error(take_error(err));
    char* text = order ? mcrv_trace_order(t, dot ? 1 : 0) : mcrv_trace_show(t);
    std::cout << text;
    mcrv_string_free(text);
    mcrv_trace_free(t);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"mcrv: a verification VM with virtual, passthrough and replay OS modes"};
    app.set_version_flag("--version", mcrv_version());
    app.require_subcommand(1);
    Options o;

    auto add_common = [&](CLI::App* sub, bool with_exec_flags) {
        sub->add_option("program", o.program_path, "guest IR file (.mir)")->required();
        sub->add_option("--os", o.os_mode, "OS mode: virtual|passthrough|replay");
        sub->add_option("--trace", o.trace_path, "trace file (passthrough output / replay input)");
        sub->add_option("--matching", o.matching, "replay matching: exact|causal");
        sub->add_option("--file", o.preloads, "preload guest-path=host-path into the VFS");
        sub->add_option("--socket-script", o.socket_script, "scripted peers for virtual sockets");
        sub->add_option("--config", o.config_path, "key=value config file; flags win");
        if (with_exec_flags) {
            sub->add_option("--report", o.report_path, "write a machine-readable key=value report");
            sub->add_option("--ce", o.ce_path, "counterexample output path (default mcrv.ce)");
        }
    };

    CLI::App* run = app.add_subcommand("run", "single execution with full checking");
    add_common(run, true);
    run->add_option("--seed", o.seed, "scheduler seed");

    CLI::App* verify = app.add_subcommand("verify", "explore all interleavings");
    add_common(verify, true);
    verify->add_option("--max-states", o.max_states, "state budget");
    verify->add_option("--max-depth", o.max_depth, "choice depth budget");

    CLI::App* sim = app.add_subcommand("sim", "interactive reversible debugger");
    add_common(sim, false);
    sim->add_option("--snapshots", o.snapshots, "step-back ring size");
    sim->add_option("--follow", o.follow_path, "drive picks from a counterexample file");

    CLI::App* trace = app.add_subcommand("trace", "inspect trace files");
    std::string trace_file;
    CLI::App* show = trace->add_subcommand("show", "print records");
    show->add_option("file", trace_file, "trace file")->required();
    CLI::App* order = trace->add_subcommand("order", "print the causal order");
    order->add_option("file", trace_file, "trace file")->required();
    order->add_flag("--dot", o.dot, "emit a DOT digraph");
    trace->require_subcommand(1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (show->parsed())
        return cmd_trace(trace_file, false, false);
    if (order->parsed())
        return cmd_trace(trace_file, true, o.dot);

    std::set<std::string> explicit_flags;
    CLI::App* active = run->parsed() ? run : verify->parsed() ? verify : sim;
    for (const auto* opt : active->get_options())
        if (opt->count() > 0)
            explicit_flags.insert(opt->get_name());
    if (!o.config_path.empty())
        apply_config_file(o, explicit_flags);

    const std::string sub = run->parsed() ? "run" : verify->parsed() ? "verify" : "sim";
    check_flag_matrix(o, sub);
    if (sub == "run")
        return cmd_run(o);
    if (sub == "verify")
        return cmd_verify(o);
    return cmd_sim(o);
}
