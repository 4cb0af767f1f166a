/*
 * mcrv — verification virtual machine with a stand-in OS.
 *
 * C API over the engine: opaque handles, integer status codes, malloc'd
 * strings released with mcrv_string_free. Every function returning
 * mcrv_status accepts a nullable char** that receives an error message on
 * failure.
 */

#ifndef MCRV_H
#define MCRV_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mcrv_status {
    MCRV_OK = 0,
    MCRV_ERR_PARSE = 1,     /* guest IR rejected */
    MCRV_ERR_CONFIG = 2,    /* bad configuration / mode matrix violation */
    MCRV_ERR_IO = 3,        /* file or trace I/O */
    MCRV_ERR_STATE = 4,     /* operation invalid in the current state */
    MCRV_ERR_RANGE = 5,     /* index out of range */
    MCRV_ERR_FORBIDDEN = 6, /* snapshots in passthrough mode */
} mcrv_status;

typedef struct mcrv_program mcrv_program;
typedef struct mcrv_config mcrv_config;
typedef struct mcrv_report mcrv_report;
typedef struct mcrv_engine mcrv_engine;
typedef struct mcrv_trace mcrv_trace;

const char* mcrv_version(void);
void mcrv_string_free(char* s);

/* ---- guest programs ---- */

mcrv_status mcrv_program_parse_text(const char* source, mcrv_program** out, char** errmsg);
mcrv_status mcrv_program_parse_file(const char* path, mcrv_program** out, char** errmsg);
/* Canonical assembly; parses back to a structurally equal program. */
char* mcrv_program_print(const mcrv_program* p);
void mcrv_program_free(mcrv_program* p);

/* ---- OS configuration ---- */

mcrv_config* mcrv_config_new(void);
/* mode: "virtual" | "passthrough" | "replay" */
mcrv_status mcrv_config_set_mode(mcrv_config* c, const char* mode, char** errmsg);
/* matching: "exact" | "causal" */
mcrv_status mcrv_config_set_matching(mcrv_config* c, const char* matching, char** errmsg);
mcrv_status mcrv_config_set_trace_path(mcrv_config* c, const char* path);
/* Preloads a file into the virtual file system. */
mcrv_status mcrv_config_add_preload(mcrv_config* c, const char* guest_path, const uint8_t* data, size_t len);
mcrv_status mcrv_config_add_preload_file(mcrv_config* c, const char* guest_path, const char* host_path,
                                         char** errmsg);
/* Scripted virtual socket peers; see docs/os.md for the file format. */
mcrv_status mcrv_config_load_socket_script(mcrv_config* c, const char* path, char** errmsg);
/* Comma-separated component stack override, topmost first. */
mcrv_status mcrv_config_set_components(mcrv_config* c, const char* csv);
void mcrv_config_free(mcrv_config* c);

/* ---- checking ---- */

/* Single execution; scheduler and guest choices derive from the seed. */
mcrv_status mcrv_run(const mcrv_program* p, const mcrv_config* c, uint64_t seed, mcrv_report** out,
                     char** errmsg);
/* Exhaustive exploration (virtual or replay OS modes only). */
mcrv_status mcrv_verify(const mcrv_program* p, const mcrv_config* c, uint64_t max_states, uint64_t max_depth,
                        mcrv_report** out, char** errmsg);

/* "ok" | "violation" | "trace-incompatible-everywhere" | "limit-exceeded" */
const char* mcrv_report_verdict(const mcrv_report* r);
uint64_t mcrv_report_states(const mcrv_report* r);
uint64_t mcrv_report_transitions(const mcrv_report* r);
const char* mcrv_report_fault_kind(const mcrv_report* r);     /* "" when no fault */
const char* mcrv_report_fault_location(const mcrv_report* r); /* "" when no fault */
int64_t mcrv_report_exit_code(const mcrv_report* r);
int64_t mcrv_report_trace_consumed(const mcrv_report* r); /* -1 when not replaying */
int64_t mcrv_report_trace_total(const mcrv_report* r);
int mcrv_report_has_counterexample(const mcrv_report* r);
size_t mcrv_report_counterexample_len(const mcrv_report* r);
uint64_t mcrv_report_counterexample_pick(const mcrv_report* r, size_t i);
size_t mcrv_report_unconsumed_len(const mcrv_report* r);
uint32_t mcrv_report_unconsumed_seq(const mcrv_report* r, size_t i);
char* mcrv_report_render(const mcrv_report* r);    /* human-readable */
char* mcrv_report_render_kv(const mcrv_report* r); /* stable key=value lines */
void mcrv_report_free(mcrv_report* r);

/* ---- interactive engine (simulator / reversible debugger) ---- */

/* Virtual or replay modes only; keeps one snapshot per executed step in a
 * ring of `snapshot_ring` entries so steps can be undone. */
mcrv_status mcrv_engine_new(const mcrv_program* p, const mcrv_config* c, size_t snapshot_ring,
                            mcrv_engine** out, char** errmsg);
/* "running" | "choice" | "exited" | "faulted" */
const char* mcrv_engine_status(const mcrv_engine* e);
/* One VM step; event_line receives a short description. MCRV_ERR_STATE at a
 * choice or terminal state. */
mcrv_status mcrv_engine_step(mcrv_engine* e, char** event_line);
/* Undo one step; MCRV_ERR_RANGE at step 0 or past the ring. */
mcrv_status mcrv_engine_back(mcrv_engine* e);
mcrv_status mcrv_engine_pick(mcrv_engine* e, uint64_t pick, char** errmsg);
/* Run until a syscall completes / a choice or terminal state is reached. */
mcrv_status mcrv_engine_run_to_syscall(mcrv_engine* e, char** event_line);
mcrv_status mcrv_engine_run_to_choice(mcrv_engine* e, char** event_line);
uint32_t mcrv_engine_choice_arity(const mcrv_engine* e); /* 0 when not at a choice */
uint64_t mcrv_engine_steps_taken(const mcrv_engine* e);
char* mcrv_engine_location(const mcrv_engine* e);
char* mcrv_engine_regs(const mcrv_engine* e);
/* Hexdump of guest heap memory; obj as shown by regs. */
mcrv_status mcrv_engine_mem(const mcrv_engine* e, uint64_t obj, uint64_t off, uint64_t len, char** dump,
                            char** errmsg);
char* mcrv_engine_digest_hex(const mcrv_engine* e);
void mcrv_engine_trace_pos(const mcrv_engine* e, int64_t* consumed, int64_t* total);
char* mcrv_engine_fault(const mcrv_engine* e); /* "" when not faulted */
void mcrv_engine_free(mcrv_engine* e);

/* ---- traces ---- */

mcrv_status mcrv_trace_load(const char* path, mcrv_trace** out, char** errmsg);
size_t mcrv_trace_record_count(const mcrv_trace* t);
char* mcrv_trace_show(const mcrv_trace* t);
/* Causal-order rendering: Hasse edges as "i -> j" lines, or a DOT digraph. */
char* mcrv_trace_order(const mcrv_trace* t, int as_dot);
void mcrv_trace_free(mcrv_trace* t);

#ifdef __cplusplus
}
#endif

#endif /* MCRV_H */
