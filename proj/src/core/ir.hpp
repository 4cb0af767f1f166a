#pragma once

#include <map>
#include <string>
#include <vector>

#include "common.hpp"

namespace mcrv {

// Register-based guest IR: functions of basic blocks, explicit terminators,
// 64-bit registers, heap addressed as (object, offset) pairs.

enum class Op : u8 {
    Const,
    Mov,
    Add,
    Sub,
    Mul,
    Divu,
    CmpEq,
    CmpLt,
    Jmp,
    Br,
    Call,
    Ret,
    Alloc,
    Load,
    Store,
    Memcpy,
    Spawn,
    Yield,
    Choose,
    Assume,
    Assert,
    Syscall,
    Exit,
};

constexpr int kOpCount = 23;
const char* op_name(Op op);

// Operand that may be written either as a register or an immediate (exit).
struct RegOrImm {
    bool is_reg = false;
    u64 value = 0; // register index or immediate bits

    bool operator==(const RegOrImm&) const = default;
};

struct Instruction {
    Op op = Op::Exit;
    // Register operands in positional order (meaning depends on op).
    std::vector<u32> regs;
    // Immediate payload: const value, choose arity, load/store width,
    // syscall number.
    u64 imm = 0;
    bool imm_is_pool = false; // const $name: imm is a string-pool index
    RegOrImm exit_val;        // exit only
    u32 block_a = 0;          // jmp/br targets (block indices after resolution)
    u32 block_b = 0;
    u32 callee = 0; // call/spawn target (function index)
    u32 line = 0;   // source line, for fault locations

    // Structural equality; source line numbers are not part of the structure.
    bool operator==(const Instruction& o) const {
        return op == o.op && regs == o.regs && imm == o.imm && imm_is_pool == o.imm_is_pool &&
               exit_val == o.exit_val && block_a == o.block_a && block_b == o.block_b && callee == o.callee;
    }
};

struct BasicBlock {
    std::string label;
    std::vector<Instruction> instrs;

    bool operator==(const BasicBlock&) const = default;
};

struct Function {
    std::string name;
    u32 num_params = 0;
    u32 num_regs = 0;
    std::vector<BasicBlock> blocks;

    bool operator==(const Function&) const = default;
};

struct PoolEntry {
    std::string name;
    std::vector<u8> bytes;

    bool operator==(const PoolEntry&) const = default;
};

struct GuestProgram {
    std::vector<PoolEntry> pool;
    std::vector<Function> functions; // source order
    u32 entry = 0;                   // function index, zero params

    const Function* find(const std::string& name) const;
    int function_index(const std::string& name) const;

    bool operator==(const GuestProgram&) const = default;
};

struct ParseError {
    u32 line = 0;
    u32 col = 0;
    std::string msg;

    std::string render() const;
};

using ParseResult = std::variant<GuestProgram, ParseError>;

// Total: any byte string yields either a fully validated program or an error.
ParseResult parse_program(const std::string& source);

// Canonical text; parse_program(print_program(p)) is structurally equal to p.
std::string print_program(const GuestProgram& p);

// Render one instruction in canonical assembly (used by print and the REPL).
std::string print_instruction(const GuestProgram& p, const Function& f, const Instruction& in);

std::string escape_bytes(const std::vector<u8>& bytes);

} // namespace mcrv
