#include <cstdio>
#include <map>
#include <set>

#include "ir.hpp"

namespace mcrv {

const char* op_name(Op op) {
    switch (op) {
    case Op::Const: return "const";
    case Op::Mov: return "mov";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Divu: return "divu";
    case Op::CmpEq: return "cmp-eq";
    case Op::CmpLt: return "cmp-lt";
    case Op::Jmp: return "jmp";
    case Op::Br: return "br";
    case Op::Call: return "call";
    case Op::Ret: return "ret";
    case Op::Alloc: return "alloc";
    case Op::Load: return "load";
    case Op::Store: return "store";
    case Op::Memcpy: return "memcpy";
    case Op::Spawn: return "spawn";
    case Op::Yield: return "yield";
    case Op::Choose: return "choose";
    case Op::Assume: return "assume";
    case Op::Assert: return "assert";
    case Op::Syscall: return "syscall";
    case Op::Exit: return "exit";
    }
    return "?";
}

const Function* GuestProgram::find(const std::string& name) const {
    for (const auto& f : functions)
        if (f.name == name)
            return &f;
    return nullptr;
}

int GuestProgram::function_index(const std::string& name) const {
    for (size_t i = 0; i < functions.size(); i++)
        if (functions[i].name == name)
            return static_cast<int>(i);
    return -1;
}

std::string ParseError::render() const {
    return "parse error at line " + std::to_string(line) + ", col " + std::to_string(col) + ": " + msg;
}

namespace {

enum class Tok { Ident, Int, Str, PoolRef, LBrace, RBrace, LParen, RParen, Colon, Comma, Slash, End };

struct Token {
    Tok kind;
    std::string text;    // ident / pool-ref name
    u64 value = 0;       // int bits
    std::vector<u8> bytes; // string literal
    u32 line = 1, col = 1;
};

struct Lexer {
    const std::string& src;
    size_t pos = 0;
    u32 line = 1, col = 1;
    std::optional<ParseError> err;

    explicit Lexer(const std::string& s) : src(s) {}

    ParseError fail(u32 l, u32 c, std::string msg) {
        if (!err)
            err = ParseError{l, c, std::move(msg)};
        return *err;
    }

    int peek() const { return pos < src.size() ? static_cast<unsigned char>(src[pos]) : -1; }

    int advance() {
        int c = peek();
        if (c < 0)
            return c;
        pos++;
        if (c == '\n') {
            line++;
            col = 1;
        } else {
            col++;
        }
        return c;
    }

    void skip_space() {
        for (;;) {
            int c = peek();
            if (c == '#') {
                while (peek() >= 0 && peek() != '\n')
                    advance();
            } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                advance();
            } else {
                return;
            }
        }
    }

    static bool ident_start(int c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
    }
    static bool ident_char(int c) {
        return ident_start(c) || (c >= '0' && c <= '9') || c == '-';
    }

    Token next() {
        skip_space();
        Token t;
        t.line = line;
        t.col = col;
        int c = peek();
        if (c < 0) {
            t.kind = Tok::End;
            return t;
        }
        switch (c) {
        case '{': advance(); t.kind = Tok::LBrace; return t;
        case '}': advance(); t.kind = Tok::RBrace; return t;
        case '(': advance(); t.kind = Tok::LParen; return t;
        case ')': advance(); t.kind = Tok::RParen; return t;
        case ':': advance(); t.kind = Tok::Colon; return t;
        case ',': advance(); t.kind = Tok::Comma; return t;
        case '/': advance(); t.kind = Tok::Slash; return t;
        case '$': {
            advance();
            if (!ident_start(peek())) {
                fail(t.line, t.col, "malformed literal reference after '$'");
                t.kind = Tok::End;
                return t;
            }
            t.kind = Tok::PoolRef;
            while (ident_char(peek()))
                t.text.push_back(static_cast<char>(advance()));
            return t;
        }
        case '"':
            return string_token(t);
        default:
            break;
        }
        if (c == '-' || (c >= '0' && c <= '9'))
            return number_token(t);
        if (ident_start(c)) {
            t.kind = Tok::Ident;
            while (ident_char(peek()))
                t.text.push_back(static_cast<char>(advance()));
            return t;
        }
        fail(t.line, t.col, std::string("unexpected character '") + static_cast<char>(c) + "'");
        t.kind = Tok::End;
        return t;
    }

    Token number_token(Token t) {
        t.kind = Tok::Int;
        bool neg = false;
        if (peek() == '-') {
            advance();
            neg = true;
        }
        if (peek() < '0' || peek() > '9') {
            fail(t.line, t.col, "malformed number");
            t.kind = Tok::End;
            return t;
        }
        u64 v = 0;
        if (peek() == '0' && pos + 1 < src.size() && (src[pos + 1] == 'x' || src[pos + 1] == 'X')) {
            advance();
            advance();
            bool any = false;
            for (;;) {
                int c = peek();
                int d;
                if (c >= '0' && c <= '9') d = c - '0';
                else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
                else if (c >= 'A' && c <= 'F') d = c - 'A' + 10;
                else break;
                v = (v << 4) | static_cast<u64>(d);
                advance();
                any = true;
            }
            if (!any) {
                fail(t.line, t.col, "malformed hex literal");
                t.kind = Tok::End;
                return t;
            }
        } else {
            while (peek() >= '0' && peek() <= '9')
                v = v * 10 + static_cast<u64>(advance() - '0');
        }
        t.value = neg ? static_cast<u64>(-static_cast<i64>(v)) : v;
        return t;
    }

    Token string_token(Token t) {
        t.kind = Tok::Str;
        advance(); // opening quote
        for (;;) {
            int c = advance();
            if (c < 0 || c == '\n') {
                fail(t.line, t.col, "unterminated string literal");
                t.kind = Tok::End;
                return t;
            }
            if (c == '"')
                return t;
            if (c != '\\') {
                t.bytes.push_back(static_cast<u8>(c));
                continue;
            }
            int e = advance();
            switch (e) {
            case '\\': t.bytes.push_back('\\'); break;
            case '"': t.bytes.push_back('"'); break;
            case 'n': t.bytes.push_back('\n'); break;
            case 'r': t.bytes.push_back('\r'); break;
            case 't': t.bytes.push_back('\t'); break;
            case '0': t.bytes.push_back(0); break;
            case 'x': {
                int hi = advance(), lo = advance();
                auto hexval = [](int c) -> int {
                    if (c >= '0' && c <= '9') return c - '0';
                    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
                    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
                    return -1;
                };
                int h = hexval(hi), l = hexval(lo);
                if (h < 0 || l < 0) {
                    fail(t.line, t.col, "malformed \\xNN escape in literal");
                    t.kind = Tok::End;
                    return t;
                }
                t.bytes.push_back(static_cast<u8>(h * 16 + l));
                break;
            }
            default:
                fail(t.line, t.col, "malformed escape in literal");
                t.kind = Tok::End;
                return t;
            }
        }
    }
};

// Pending symbolic references resolved after all functions are parsed.
struct PendingCall {
    u32 fn, block, instr;
    std::string callee;
    u32 line, col;
    size_t argc;
};
struct PendingTarget {
    u32 fn, block, instr;
    std::string label;
    bool second_target;
    u32 line, col;
};
struct PendingPool {
    u32 fn, block, instr;
    std::string name;
    u32 line, col;
};

struct Parser {
    Lexer lex;
    Token tok;
    GuestProgram prog;
    std::optional<ParseError> err;
    std::optional<std::string> entry_name;
    u32 entry_line = 0, entry_col = 0;
    std::vector<PendingCall> calls;
    std::vector<PendingTarget> targets;
    std::vector<PendingPool> pools;

    explicit Parser(const std::string& src) : lex(src) { tok = lex.next(); }

    void fail(u32 line, u32 col, std::string msg) {
        if (!err)
            err = ParseError{line, col, std::move(msg)};
    }
    void fail_here(std::string msg) { fail(tok.line, tok.col, std::move(msg)); }

    bool bad() { return err.has_value() || lex.err.has_value(); }

    void bump() { tok = lex.next(); }

    bool expect(Tok k, const char* what) {
        if (bad())
            return false;
        if (tok.kind != k) {
            fail_here(std::string("expected ") + what);
            return false;
        }
        bump();
        return true;
    }

    u32 parse_reg(const Function& f) {
        if (bad())
            return 0;
        if (tok.kind != Tok::Ident || tok.text.size() < 2 || tok.text[0] != 'r') {
            fail_here("expected register operand");
            return 0;
        }
        u64 idx = 0;
        for (size_t i = 1; i < tok.text.size(); i++) {
            char c = tok.text[i];
            if (c < '0' || c > '9') {
                fail_here("expected register operand");
                return 0;
            }
            idx = idx * 10 + static_cast<u64>(c - '0');
        }
        if (idx >= f.num_regs) {
            fail_here("register r" + std::to_string(idx) + " out of range (function declares " +
                      std::to_string(f.num_regs) + " registers)");
            return 0;
        }
        bump();
        return static_cast<u32>(idx);
    }

    u64 parse_int(const char* what) {
        if (bad())
            return 0;
        if (tok.kind != Tok::Int) {
            fail_here(std::string("expected ") + what);
            return 0;
        }
        u64 v = tok.value;
        bump();
        return v;
    }

    std::string parse_ident(const char* what) {
        if (bad())
            return {};
        if (tok.kind != Tok::Ident) {
            fail_here(std::string("expected ") + what);
            return {};
        }
        std::string s = tok.text;
        bump();
        return s;
    }

    std::vector<u32> parse_arglist(const Function& f) {
        std::vector<u32> regs;
        if (!expect(Tok::LParen, "'('"))
            return regs;
        if (tok.kind == Tok::RParen) {
            bump();
            return regs;
        }
        for (;;) {
            regs.push_back(parse_reg(f));
            if (bad())
                return regs;
            if (tok.kind == Tok::Comma) {
                bump();
                continue;
            }
            expect(Tok::RParen, "')'");
            return regs;
        }
    }

    void run() {
        while (!bad() && tok.kind != Tok::End) {
            if (tok.kind != Tok::Ident) {
                fail_here("expected 'str', 'entry' or 'fn'");
                return;
            }
            if (tok.text == "str")
                parse_str();
            else if (tok.text == "entry")
                parse_entry();
            else if (tok.text == "fn")
                parse_fn();
            else
                fail_here("expected 'str', 'entry' or 'fn', got '" + tok.text + "'");
        }
        if (!bad())
            finish();
    }

    void parse_str() {
        bump();
        u32 line = tok.line, col = tok.col;
        std::string name = parse_ident("literal name");
        if (bad())
            return;
        for (const auto& e : prog.pool)
            if (e.name == name) {
                fail(line, col, "duplicate literal name '" + name + "'");
                return;
            }
        if (tok.kind != Tok::Str) {
            fail_here("expected quoted literal");
            return;
        }
        prog.pool.push_back(PoolEntry{name, tok.bytes});
        bump();
    }

    void parse_entry() {
        u32 line = tok.line, col = tok.col;
        bump();
        std::string name = parse_ident("entry function name");
        if (bad())
            return;
        if (entry_name) {
            fail(line, col, "duplicate entry directive");
            return;
        }
        entry_name = name;
        entry_line = line;
        entry_col = col;
    }

    void parse_fn() {
        bump();
        u32 fline = tok.line, fcol = tok.col;
        Function f;
        f.name = parse_ident("function name");
        if (bad())
            return;
        for (const auto& g : prog.functions)
            if (g.name == f.name) {
                fail(fline, fcol, "duplicate function name '" + f.name + "'");
                return;
            }
        if (!expect(Tok::Slash, "'/'"))
            return;
        f.num_params = static_cast<u32>(parse_int("parameter count"));
        if (tok.kind != Tok::Ident || tok.text != "regs") {
            fail_here("expected 'regs'");
            return;
        }
        bump();
        u32 rline = tok.line, rcol = tok.col;
        u64 nregs = parse_int("register count");
        if (bad())
            return;
        if (nregs == 0 || nregs > 4096) {
            fail(rline, rcol, "register count must be in 1..4096");
            return;
        }
        f.num_regs = static_cast<u32>(nregs);
        if (f.num_params > f.num_regs) {
            fail(fline, fcol, "function declares more parameters than registers");
            return;
        }
        if (!expect(Tok::LBrace, "'{'"))
            return;
        u32 fn_index = static_cast<u32>(prog.functions.size());
        prog.functions.push_back(std::move(f));
        Function& fr = prog.functions.back();

        while (!bad() && tok.kind != Tok::RBrace) {
            u32 bline = tok.line, bcol = tok.col;
            std::string label = parse_ident("block label");
            if (bad())
                return;
            if (!expect(Tok::Colon, "':' after block label"))
                return;
            for (const auto& b : fr.blocks)
                if (b.label == label) {
                    fail(bline, bcol, "duplicate block label '" + label + "'");
                    return;
                }
            fr.blocks.push_back(BasicBlock{label, {}});
            parse_block(fn_index, fr);
        }
        if (bad())
            return;
        expect(Tok::RBrace, "'}'");
        if (fr.blocks.empty())
            fail(fline, fcol, "function '" + fr.name + "' has an empty body");
        for (const auto& b : fr.blocks) {
            if (b.instrs.empty()) {
                fail(fline, fcol, "block '" + b.label + "' in '" + fr.name + "' has no terminator");
                return;
            }
            for (size_t i = 0; i < b.instrs.size(); i++) {
                Op op = b.instrs[i].op;
                bool term = op == Op::Jmp || op == Op::Br || op == Op::Ret || op == Op::Exit;
                if (i + 1 == b.instrs.size() && !term)
                    fail(b.instrs[i].line, 1, "block '" + b.label + "' does not end with a terminator");
                if (i + 1 < b.instrs.size() && term)
                    fail(b.instrs[i].line, 1, "terminator before end of block '" + b.label + "'");
            }
        }
    }

    // Instructions until the next block label or '}'.
    void parse_block(u32 fn_index, Function& f) {
        u32 block = static_cast<u32>(f.blocks.size() - 1);
        while (!bad()) {
            if (tok.kind == Tok::RBrace)
                return;
            if (tok.kind != Tok::Ident) {
                fail_here("expected instruction or block label");
                return;
            }
            // Lookahead: IDENT ':' starts a new block.
            size_t save_pos = lex.pos;
            u32 save_line = lex.line, save_col = lex.col;
            Token save_tok = tok;
            std::string word = tok.text;
            bump();
            if (tok.kind == Tok::Colon) {
                lex.pos = save_pos;
                lex.line = save_line;
                lex.col = save_col;
                tok = save_tok;
                return;
            }
            parse_instr(fn_index, f, block, word, save_tok.line, save_tok.col);
        }
    }

    void parse_instr(u32 fn_index, Function& f, u32 block, const std::string& word, u32 line, u32 col) {
        static const std::map<std::string, Op> ops = [] {
            std::map<std::string, Op> m;
            for (int i = 0; i < kOpCount; i++)
                m[op_name(static_cast<Op>(i))] = static_cast<Op>(i);
            return m;
        }();
        auto it = ops.find(word);
        if (it == ops.end()) {
            fail(line, col, "unknown opcode '" + word + "'");
            return;
        }
        Instruction in;
        in.op = it->second;
        in.line = line;
        auto emit = [&] {
            if (!bad())
                f.blocks[block].instrs.push_back(in);
        };
        u32 instr_idx = static_cast<u32>(f.blocks[block].instrs.size());

        switch (in.op) {
        case Op::Const: {
            in.regs.push_back(parse_reg(f));
            if (tok.kind == Tok::PoolRef) {
                in.imm_is_pool = true;
                pools.push_back(PendingPool{fn_index, block, instr_idx, tok.text, tok.line, tok.col});
                bump();
            } else {
                in.imm = parse_int("immediate or $literal");
            }
            emit();
            return;
        }
        case Op::Mov:
            in.regs = {parse_reg(f), parse_reg(f)};
            emit();
            return;
        case Op::Add:
        case Op::Sub:
        case Op::Mul:
        case Op::Divu:
        case Op::CmpEq:
        case Op::CmpLt:
        case Op::Memcpy:
            in.regs = {parse_reg(f), parse_reg(f), parse_reg(f)};
            emit();
            return;
        case Op::Jmp: {
            u32 l = tok.line, c = tok.col;
            std::string label = parse_ident("block label");
            targets.push_back(PendingTarget{fn_index, block, instr_idx, label, false, l, c});
            emit();
            return;
        }
        case Op::Br: {
            in.regs.push_back(parse_reg(f));
            u32 l1 = tok.line, c1 = tok.col;
            std::string t1 = parse_ident("block label");
            targets.push_back(PendingTarget{fn_index, block, instr_idx, t1, false, l1, c1});
            u32 l2 = tok.line, c2 = tok.col;
            std::string t2 = parse_ident("block label");
            targets.push_back(PendingTarget{fn_index, block, instr_idx, t2, true, l2, c2});
            emit();
            return;
        }
        case Op::Call: {
            in.regs.push_back(parse_reg(f));
            u32 l = tok.line, c = tok.col;
            std::string callee = parse_ident("function name");
            auto args = parse_arglist(f);
            in.regs.insert(in.regs.end(), args.begin(), args.end());
            calls.push_back(PendingCall{fn_index, block, instr_idx, callee, l, c, args.size()});
            emit();
            return;
        }
        case Op::Spawn: {
            u32 l = tok.line, c = tok.col;
            std::string callee = parse_ident("function name");
            auto args = parse_arglist(f);
            in.regs = args;
            calls.push_back(PendingCall{fn_index, block, instr_idx, callee, l, c, args.size()});
            emit();
            return;
        }
        case Op::Ret:
        case Op::Assume:
        case Op::Assert:
            in.regs = {parse_reg(f)};
            emit();
            return;
        case Op::Alloc:
            in.regs = {parse_reg(f), parse_reg(f)};
            emit();
            return;
        case Op::Load:
        case Op::Store: {
            in.regs = {parse_reg(f), parse_reg(f)};
            u32 l = tok.line, c = tok.col;
            in.imm = parse_int("access width");
            if (!bad() && in.imm != 1 && in.imm != 2 && in.imm != 4 && in.imm != 8)
                fail(l, c, "access width must be 1, 2, 4 or 8");
            emit();
            return;
        }
        case Op::Yield:
            emit();
            return;
        case Op::Choose: {
            in.regs = {parse_reg(f)};
            u32 l = tok.line, c = tok.col;
            in.imm = parse_int("alternative count");
            if (!bad() && (in.imm < 1 || in.imm > 0xffffffffull))
                fail(l, c, "choose arity must be in 1..2^32");
            emit();
            return;
        }
        case Op::Syscall: {
            in.regs.push_back(parse_reg(f));
            u32 l = tok.line, c = tok.col;
            in.imm = parse_int("syscall number");
            if (!bad() && in.imm > 0xffffffffull)
                fail(l, c, "syscall number out of range");
            auto args = parse_arglist(f);
            if (!bad() && args.size() > 6)
                fail(l, c, "syscall takes at most 6 arguments");
            in.regs.insert(in.regs.end(), args.begin(), args.end());
            emit();
            return;
        }
        case Op::Exit: {
            if (tok.kind == Tok::Int) {
                in.exit_val = RegOrImm{false, parse_int("exit code")};
            } else {
                in.exit_val = RegOrImm{true, parse_reg(f)};
            }
            emit();
            return;
        }
        }
    }

    void finish() {
        // Resolve symbolic references.
        for (const auto& pc : calls) {
            int idx = prog.function_index(pc.callee);
            if (idx < 0) {
                fail(pc.line, pc.col, "call to undefined function '" + pc.callee + "'");
                return;
            }
            const Function& callee = prog.functions[static_cast<size_t>(idx)];
            if (pc.argc != callee.num_params) {
                fail(pc.line, pc.col, "'" + pc.callee + "' takes " + std::to_string(callee.num_params) +
                                          " arguments, got " + std::to_string(pc.argc));
                return;
            }
            prog.functions[pc.fn].blocks[pc.block].instrs[pc.instr].callee = static_cast<u32>(idx);
        }
        for (const auto& pt : targets) {
            Function& f = prog.functions[pt.fn];
            int idx = -1;
            for (size_t i = 0; i < f.blocks.size(); i++)
                if (f.blocks[i].label == pt.label)
                    idx = static_cast<int>(i);
            if (idx < 0) {
                fail(pt.line, pt.col, "undefined block label '" + pt.label + "'");
                return;
            }
            Instruction& in = f.blocks[pt.block].instrs[pt.instr];
            (pt.second_target ? in.block_b : in.block_a) = static_cast<u32>(idx);
        }
        for (const auto& pp : pools) {
            int idx = -1;
            for (size_t i = 0; i < prog.pool.size(); i++)
                if (prog.pool[i].name == pp.name)
                    idx = static_cast<int>(i);
            if (idx < 0) {
                fail(pp.line, pp.col, "undefined literal '$" + pp.name + "'");
                return;
            }
            prog.functions[pp.fn].blocks[pp.block].instrs[pp.instr].imm = static_cast<u64>(idx);
        }
        std::string entry = entry_name.value_or("main");
        int eidx = prog.function_index(entry);
        if (eidx < 0) {
            fail(entry_line ? entry_line : 1, entry_col ? entry_col : 1,
                 "entry function '" + entry + "' is not defined");
            return;
        }
        if (prog.functions[static_cast<size_t>(eidx)].num_params != 0) {
            fail(entry_line ? entry_line : 1, entry_col ? entry_col : 1,
                 "entry function '" + entry + "' must take zero parameters");
            return;
        }
        prog.entry = static_cast<u32>(eidx);
    }
};

} // namespace

ParseResult parse_program(const std::string& source) {
    Parser p(source);
    p.run();
    if (p.err)
        return *p.err;
    if (p.lex.err)
        return *p.lex.err;
    return std::move(p.prog);
}

std::string escape_bytes(const std::vector<u8>& bytes) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    for (u8 b : bytes) {
        if (b == '"' || b == '\\') {
            out.push_back('\\');
            out.push_back(static_cast<char>(b));
        } else if (b >= 0x20 && b < 0x7f) {
            out.push_back(static_cast<char>(b));
        } else {
            out += "\\x";
            out.push_back(digits[b >> 4]);
            out.push_back(digits[b & 0xf]);
        }
    }
    return out;
}

std::string print_instruction(const GuestProgram& p, const Function& f, const Instruction& in) {
    auto reg = [](u32 r) { return "r" + std::to_string(r); };
    auto args_from = [&](size_t first) {
        std::string s = "(";
        for (size_t i = first; i < in.regs.size(); i++) {
            if (i > first)
                s += ", ";
            s += reg(in.regs[i]);
        }
        return s + ")";
    };
    std::string s = op_name(in.op);
    switch (in.op) {
    case Op::Const:
        s += " " + reg(in.regs[0]);
        if (in.imm_is_pool)
            s += " $" + p.pool[in.imm].name;
        else
            s += " " + std::to_string(static_cast<i64>(in.imm));
        break;
    case Op::Mov:
    case Op::Alloc:
        s += " " + reg(in.regs[0]) + " " + reg(in.regs[1]);
        break;
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Divu:
    case Op::CmpEq:
    case Op::CmpLt:
    case Op::Memcpy:
        s += " " + reg(in.regs[0]) + " " + reg(in.regs[1]) + " " + reg(in.regs[2]);
        break;
    case Op::Jmp:
        s += " " + f.blocks[in.block_a].label;
        break;
    case Op::Br:
        s += " " + reg(in.regs[0]) + " " + f.blocks[in.block_a].label + " " + f.blocks[in.block_b].label;
        break;
    case Op::Call:
        s += " " + reg(in.regs[0]) + " " + p.functions[in.callee].name + args_from(1);
        break;
    case Op::Spawn:
        s += " " + p.functions[in.callee].name + args_from(0);
        break;
    case Op::Ret:
    case Op::Assume:
    case Op::Assert:
        s += " " + reg(in.regs[0]);
        break;
    case Op::Load:
    case Op::Store:
        s += " " + reg(in.regs[0]) + " " + reg(in.regs[1]) + " " + std::to_string(in.imm);
        break;
    case Op::Yield:
        break;
    case Op::Choose:
        s += " " + reg(in.regs[0]) + " " + std::to_string(in.imm);
        break;
    case Op::Syscall:
        s += " " + reg(in.regs[0]) + " " + std::to_string(in.imm) + args_from(1);
        break;
    case Op::Exit:
        if (in.exit_val.is_reg)
            s += " " + reg(static_cast<u32>(in.exit_val.value));
        else
            s += " " + std::to_string(static_cast<i64>(in.exit_val.value));
        break;
    }
    return s;
}

std::string print_program(const GuestProgram& p) {
    std::string out;
    for (const auto& e : p.pool)
        out += "str " + e.name + " \"" + escape_bytes(e.bytes) + "\"\n";
    if (p.functions[p.entry].name != "main")
        out += "entry " + p.functions[p.entry].name + "\n";
    for (size_t fi = 0; fi < p.functions.size(); fi++) {
        const Function& f = p.functions[fi];
        if (fi > 0 || !p.pool.empty())
            out += "\n";
        out += "fn " + f.name + "/" + std::to_string(f.num_params) + " regs " + std::to_string(f.num_regs) + " {\n";
        for (const auto& b : f.blocks) {
            out += b.label + ":\n";
            for (const auto& in : b.instrs)
                out += "  " + print_instruction(p, f, in) + "\n";
        }
        out += "}\n";
    }
    return out;
}

} // namespace mcrv
