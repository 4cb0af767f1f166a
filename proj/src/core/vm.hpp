#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "digest.hpp"
#include "ir.hpp"
#include "os_state.hpp"

namespace mcrv {

// Guest pointers are (object-id, offset) packed into a tagged 64-bit value.
inline u64 make_ptr(u32 obj, u32 off) { return (static_cast<u64>(obj) << 32) | off; }
inline u32 ptr_obj(u64 raw) { return static_cast<u32>(raw >> 32); }
inline u32 ptr_off(u64 raw) { return static_cast<u32>(raw & 0xffffffffu); }

struct RegValue {
    u64 raw = 0;
    bool is_ptr = false;
    bool init = false;
};

struct Frame {
    u32 fn = 0;
    u32 block = 0;
    u32 instr = 0;
    u32 ret_reg = 0; // register in the caller frame receiving our return value
    std::vector<RegValue> regs;
};

struct WaitKey {
    enum class Kind : u8 { None = 0, PipeRead = 1, PipeWrite = 2, SockRecv = 3, HostRetry = 4 };
    Kind kind = Kind::None;
    u64 id = 0;
};

struct ThreadState {
    enum class Status : u8 { Runnable = 0, Waiting = 1, Exited = 2 };
    Status status = Status::Runnable;
    std::vector<Frame> frames;
    WaitKey wait;
    u64 result = 0; // return value of the root frame
};

struct HeapObject {
    std::vector<u8> bytes;
    std::set<u32> ptr_marks;  // offsets of stored 8-byte pointer slots
    std::set<u32> touched_by; // thread indices that accessed this object
};

enum class FaultKind : u8 {
    AssertionFailure = 0,
    MemoryError = 1,
    UninitializedRegister = 2,
    DivisionByZero = 3,
    Deadlock = 4,
    AssumeViolation = 5, // reported as assume-violation-in-run-mode; pruned in verify
    InvalidSyscall = 6,
};

const char* fault_kind_name(FaultKind k);

struct FaultInfo {
    FaultKind kind = FaultKind::AssertionFailure;
    u32 fn = 0, block = 0, instr = 0;
    i32 thread = 0;
    std::string detail;
};

std::string fault_location(const GuestProgram& p, const FaultInfo& f);

struct ChoiceRequest {
    enum class Origin : u8 { GuestChoose = 0, Scheduler = 1 };
    Origin origin = Origin::GuestChoose;
    u32 arity = 1;
    u32 thread = 0;
};

enum class VmStatus : u8 { Running = 0, Exited = 1, Faulted = 2, Choice = 3 };

struct MachineState {
    VmStatus status = VmStatus::Running;
    i64 exit_code = 0;
    FaultInfo fault;
    ChoiceRequest choice;
    std::vector<ThreadState> threads;
    std::map<u32, HeapObject> heap;
    u32 next_obj = 1;
    u32 current = 0;
    bool preempt_cleared = false; // next instruction of `current` runs without a scheduler decision
    bool resched = false;         // force a scheduler decision before the next instruction
    u64 step_count = 0;
    OsState os;

    const Frame& top(u32 thread) const { return threads[thread].frames.back(); }
    Frame& top(u32 thread) { return threads[thread].frames.back(); }
};

// Result of dispatching one guest syscall through the stand-in OS.
struct SyscallOutcome {
    enum class Kind : u8 { Done, Block, Fault } kind = Kind::Done;
    i64 guest_rd = 0; // value written to the destination register (-errno on failure)
    i32 err = 0;
    i64 retval = 0;
    WaitKey wait;
    FaultKind fault_kind = FaultKind::MemoryError;
    std::string fault_detail;
};

// Implemented by the engine; routes `syscall` instructions into the
// stand-in OS and answers wakeup queries for parked threads.
class SyscallPort {
public:
    virtual ~SyscallPort() = default;
    virtual SyscallOutcome guest_syscall(MachineState& s, u32 thread, u32 number,
                                         const std::vector<RegValue>& args) = 0;
    virtual bool wait_ready(const MachineState& s, const WaitKey& k) const = 0;
};

enum class StepEvent : u8 { Plain = 0, Choice = 1, Syscall = 2, Exited = 3, Faulted = 4 };

struct StepOutcome {
    StepEvent event = StepEvent::Plain;
    // Filled for Syscall events.
    u32 sys_number = 0;
    bool sys_completed = false;
    i64 sys_retval = 0;
    i32 sys_errno = 0;
};

// Initial state: one thread at the entry function, heap holding only the
// string pool (object ids 1..n). The engine initializes `os` afterwards.
MachineState vm_boot(const GuestProgram& p);

// Executes exactly one instruction of the scheduled thread, or reports a
// pending choice / terminal status without advancing. Deterministic.
StepOutcome vm_step(MachineState& s, const GuestProgram& p, SyscallPort& port);

// Resumes a state blocked on a choice along alternative `pick`.
Status vm_resolve_choice(MachineState& s, const GuestProgram& p, SyscallPort& port, u64 pick);

// Threads eligible for scheduling (runnable, or waiting with a ready wait),
// in ascending thread order.
std::vector<u32> vm_selectable(const MachineState& s, SyscallPort& port);

// Canonical snapshot bytes; restore validates against the program.
std::vector<u8> vm_snapshot(const MachineState& s);
Result<MachineState> vm_restore(const std::vector<u8>& bytes, const GuestProgram& p);

// Digest of the canonical serialization with heap ids renumbered in
// first-reference order; step count excluded.
Digest vm_state_digest(const MachineState& s);

} // namespace mcrv
