#pragma once

// Litmus IR: a small assembly-like language with symbolic locations,
// uninterpreted arithmetic, a single conditional branch form and fences.
//
//   alias (X, Y)                 ; X and Y may name the same address
//   extern memcmp/2              ; undefined callee with 2 pointer operands
//   func main(r0):
//     r1 = load size             ; direct
//     r2 = load A[r0]            ; indexed (base + register)
//     r3 = load [r2]             ; indirect, location "*r2"
//     r4 = load [r2:sec]         ; indirect with an explicit points-to hint
//     r5 = lt r2, r1             ; any other opcode is an uninterpreted ALU op
//     beqz r5, out
//     store tmp, r4
//     call leak(r4)
//   out:
//     skip
//
// `thread NAME:` starts a thread body; multi-thread files have one entry per
// thread, single-thread files use `entry NAME`, `main`, or the first function.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "lcm/error.hpp"

namespace lcm::ir {

struct Reg {
    int id = -1;
    bool valid() const { return id >= 0; }
    auto operator<=>(const Reg&) const = default;
};

inline std::string to_string(Reg r) { return "r" + std::to_string(r.id); }

enum class AddrMode { direct, indexed, indirect };

struct AddressExpr {
    AddrMode mode = AddrMode::direct;
    /// Resolved symbolic location. For indirect mode without a hint this is
    /// "*rN" named after the pointer register at parse time.
    std::string location;
    Reg reg;                              // index (indexed) or pointer (indirect)
    std::optional<std::int64_t> offset;   // constant index written as A[3]
    bool hinted = false;                  // indirect with explicit ":loc"

    bool operator==(const AddressExpr&) const = default;
};

struct Operand {
    std::variant<Reg, std::int64_t> value;

    bool is_reg() const { return std::holds_alternative<Reg>(value); }
    Reg reg() const { return std::get<Reg>(value); }
    bool operator==(const Operand&) const = default;
};

/// Call arguments are either plain operands (for defined callees) or address
/// expressions (pointer operands of extern callees).
using CallArg = std::variant<Operand, AddressExpr>;

enum class Op { load, store, alu, beqz, jmp, fence, protect, call, skip };
enum class FenceKind { full, lfence };

struct Instruction {
    Op op = Op::skip;
    Reg dst;                          // load, alu
    AddressExpr addr;                 // load, store
    std::string alu_op;               // alu
    std::vector<Operand> operands;    // alu operands; store value is operands[0]
    Reg cond;                         // beqz, protect
    std::string target;               // beqz/jmp label, call callee
    std::vector<CallArg> args;        // call
    FenceKind fence = FenceKind::full;
    std::vector<std::string> labels;
    SourcePos pos;

    bool is_memory() const { return op == Op::load || op == Op::store; }
};

struct Function {
    std::string name;
    std::vector<Reg> params;
    std::vector<Instruction> body;
    bool is_thread = false;
    SourcePos pos;
    /// Label -> instruction index; a label may point one past the end (exit).
    std::map<std::string, std::size_t> label_index;

    std::size_t resolve(const std::string& label) const { return label_index.at(label); }
};

struct Program {
    std::vector<Function> functions;
    std::vector<std::string> entries;                    // thread entries, or the single entry
    std::optional<std::string> explicit_entry;
    std::set<std::pair<std::string, std::string>> aliases;  // ordered pairs (a < b)
    std::map<std::string, int> externs;                  // name -> pointer operand count

    const Function* find(std::string_view name) const {
        for (const auto& f : functions)
            if (f.name == name) return &f;
        return nullptr;
    }
    const Function& function(std::string_view name) const {
        const Function* f = find(name);
        if (!f) throw Error("unknown function '" + std::string(name) + "'");
        return *f;
    }
    bool multi_threaded() const { return entries.size() > 1; }

    std::set<std::string> locations() const;
};

// ---------------------------------------------------------------------------
// Instruction register reads/writes

inline std::vector<Reg> address_regs(const AddressExpr& a) {
    if (a.mode == AddrMode::direct || !a.reg.valid()) return {};
    return {a.reg};
}

inline std::vector<Reg> reads(const Instruction& in) {
    std::vector<Reg> out;
    auto add_operand = [&](const Operand& o) {
        if (o.is_reg()) out.push_back(o.reg());
    };
    switch (in.op) {
        case Op::load: out = address_regs(in.addr); break;
        case Op::store:
            out = address_regs(in.addr);
            for (const auto& o : in.operands) add_operand(o);
            break;
        case Op::alu:
            for (const auto& o : in.operands) add_operand(o);
            break;
        case Op::beqz:
        case Op::protect: out.push_back(in.cond); break;
        case Op::call:
            for (const auto& a : in.args) {
                if (const auto* o = std::get_if<Operand>(&a)) add_operand(*o);
                else for (Reg r : address_regs(std::get<AddressExpr>(a))) out.push_back(r);
            }
            break;
        default: break;
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

inline std::optional<Reg> writes(const Instruction& in) {
    if (in.op == Op::load || in.op == Op::alu) return in.dst;
    return std::nullopt;
}

/// Intra-function successors as instruction indices; `body.size()` denotes
/// the function exit.
inline std::vector<std::size_t> successors(const Function& f, std::size_t i) {
    const Instruction& in = f.body[i];
    switch (in.op) {
        case Op::jmp: return {f.resolve(in.target)};
        case Op::beqz: {
            std::size_t t = f.resolve(in.target);
            if (t == i + 1) return {i + 1};
            return {t, i + 1};
        }
        default: return {i + 1};
    }
}

inline std::set<std::string> Program::locations() const {
    std::set<std::string> out;
    for (const auto& f : functions)
        for (const auto& in : f.body) {
            if (in.is_memory()) out.insert(in.addr.location);
            if (in.op == Op::call)
                for (const auto& a : in.args)
                    if (const auto* e = std::get_if<AddressExpr>(&a)) out.insert(e->location);
        }
    return out;
}

// ---------------------------------------------------------------------------
// Pretty printing

inline std::string to_string(const Operand& o) {
    if (o.is_reg()) return to_string(o.reg());
    return std::to_string(std::get<std::int64_t>(o.value));
}

inline std::string to_string(const AddressExpr& a) {
    switch (a.mode) {
        case AddrMode::direct:
            return a.offset ? a.location + "[" + std::to_string(*a.offset) + "]" : a.location;
        case AddrMode::indexed: return a.location + "[" + to_string(a.reg) + "]";
        case AddrMode::indirect:
            return a.hinted ? "[" + to_string(a.reg) + ":" + a.location + "]"
                            : "[" + to_string(a.reg) + "]";
    }
    return {};
}

inline std::string to_string(const Instruction& in) {
    std::string out;
    auto join_operands = [](const std::vector<Operand>& ops) {
        std::string s;
        for (std::size_t i = 0; i < ops.size(); ++i) s += (i ? ", " : "") + to_string(ops[i]);
        return s;
    };
    switch (in.op) {
        case Op::load: out = to_string(in.dst) + " = load " + to_string(in.addr); break;
        case Op::store: out = "store " + to_string(in.addr) + ", " + to_string(in.operands.at(0)); break;
        case Op::alu: out = to_string(in.dst) + " = " + in.alu_op + " " + join_operands(in.operands); break;
        case Op::beqz: out = "beqz " + to_string(in.cond) + ", " + in.target; break;
        case Op::jmp: out = "jmp " + in.target; break;
        case Op::fence: out = in.fence == FenceKind::lfence ? "lfence" : "fence"; break;
        case Op::protect: out = "protect " + to_string(in.cond); break;
        case Op::skip: out = "skip"; break;
        case Op::call: {
            out = "call " + in.target + "(";
            for (std::size_t i = 0; i < in.args.size(); ++i) {
                if (i) out += ", ";
                if (const auto* o = std::get_if<Operand>(&in.args[i])) out += to_string(*o);
                else out += to_string(std::get<AddressExpr>(in.args[i]));
            }
            out += ")";
            break;
        }
    }
    return out;
}

inline std::string print(const Program& p) {
    std::ostringstream os;
    for (const auto& [a, b] : p.aliases) os << "alias (" << a << ", " << b << ")\n";
    for (const auto& [name, arity] : p.externs) os << "extern " << name << "/" << arity << "\n";
    if (p.explicit_entry) os << "entry " << *p.explicit_entry << "\n";
    for (const auto& f : p.functions) {
        if (f.is_thread) {
            os << "thread " << f.name << ":\n";
        } else {
            os << "func " << f.name << "(";
            for (std::size_t i = 0; i < f.params.size(); ++i) os << (i ? ", " : "") << to_string(f.params[i]);
            os << "):\n";
        }
        std::multimap<std::size_t, std::string> trailing;
        for (const auto& [label, idx] : f.label_index)
            if (idx == f.body.size()) trailing.emplace(idx, label);
        for (const auto& in : f.body) {
            for (const auto& l : in.labels) os << l << ":\n";
            os << "  " << to_string(in) << "\n";
        }
        for (const auto& [idx, label] : trailing) os << label << ":\n";
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

enum class Tok { ident, integer, punct, end };

struct Token {
    Tok kind = Tok::end;
    std::string text;
    int column = 0;
};

inline bool is_register_name(std::string_view s) {
    if (s.size() < 2 || s[0] != 'r') return false;
    return std::all_of(s.begin() + 1, s.end(), [](unsigned char c) { return std::isdigit(c); });
}

inline std::vector<Token> tokenize(std::string_view line, int line_no) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < line.size()) {
        unsigned char c = static_cast<unsigned char>(line[i]);
        int col = static_cast<int>(i) + 1;
        if (c == ';' || c == '#') break;
        if (std::isspace(c)) { ++i; continue; }
        if (std::isalpha(c) || c == '_') {
            std::size_t j = i;
            while (j < line.size() && (std::isalnum(static_cast<unsigned char>(line[j])) || line[j] == '_' || line[j] == '.')) ++j;
            out.push_back({Tok::ident, std::string(line.substr(i, j - i)), col});
            i = j;
        } else if (std::isdigit(c) || (c == '-' && i + 1 < line.size() && std::isdigit(static_cast<unsigned char>(line[i + 1])))) {
            std::size_t j = i + 1;
            while (j < line.size() && std::isdigit(static_cast<unsigned char>(line[j]))) ++j;
            out.push_back({Tok::integer, std::string(line.substr(i, j - i)), col});
            i = j;
        } else if (std::string_view("()[],:=/").find(static_cast<char>(c)) != std::string_view::npos) {
            out.push_back({Tok::punct, std::string(1, static_cast<char>(c)), col});
            ++i;
        } else {
            throw ParseError({line_no, col}, std::string("unexpected character '") + static_cast<char>(c) + "'");
        }
    }
    out.push_back({Tok::end, "", static_cast<int>(line.size()) + 1});
    return out;
}

class LineParser {
public:
    LineParser(std::vector<Token> toks, int line) : toks_(std::move(toks)), line_(line) {}

    const Token& peek(std::size_t ahead = 0) const { return toks_[std::min(pos_ + ahead, toks_.size() - 1)]; }
    bool at_end() const { return peek().kind == Tok::end; }
    SourcePos here() const { return {line_, peek().column}; }

    bool accept(std::string_view punct) {
        if (peek().kind == Tok::punct && peek().text == punct) { ++pos_; return true; }
        return false;
    }
    void expect(std::string_view punct) {
        if (!accept(punct)) fail({"'" + std::string(punct) + "'"});
    }
    std::string ident(const char* what = "identifier") {
        if (peek().kind != Tok::ident) fail({what});
        return toks_[pos_++].text;
    }
    Reg reg() {
        if (peek().kind != Tok::ident || !is_register_name(peek().text)) fail({"register"});
        return Reg{std::stoi(toks_[pos_++].text.substr(1))};
    }
    std::int64_t integer() {
        if (peek().kind != Tok::integer) fail({"integer"});
        return std::stoll(toks_[pos_++].text);
    }
    Operand operand() {
        if (peek().kind == Tok::integer) return Operand{integer()};
        if (peek().kind == Tok::ident && is_register_name(peek().text)) return Operand{reg()};
        fail({"register", "integer"});
    }
    AddressExpr address() {
        AddressExpr a;
        if (accept("[")) {
            a.mode = AddrMode::indirect;
            a.reg = reg();
            if (accept(":")) {
                a.location = ident("location");
                a.hinted = true;
            } else {
                a.location = "*" + to_string(a.reg);
            }
            expect("]");
            return a;
        }
        if (peek().kind != Tok::ident || is_register_name(peek().text)) fail({"location", "'['"});
        a.location = ident();
        if (accept("[")) {
            if (peek().kind == Tok::integer) {
                a.offset = integer();
            } else {
                a.mode = AddrMode::indexed;
                a.reg = reg();
            }
            expect("]");
        }
        return a;
    }
    CallArg call_arg() {
        if (peek().kind == Tok::integer || (peek().kind == Tok::ident && is_register_name(peek().text)))
            return operand();
        return address();
    }
    void finish() {
        if (!at_end()) fail({"end of line"});
    }
    [[noreturn]] void fail(std::vector<std::string> expected) const {
        std::string found = at_end() ? "end of line" : "'" + peek().text + "'";
        throw ParseError(here(), "syntax error at " + found, std::move(expected));
    }

private:
    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    int line_;
};

inline Instruction parse_instruction(LineParser& p, SourcePos pos) {
    Instruction in;
    in.pos = pos;
    const Token& head = p.peek();
    if (head.kind == Tok::ident && is_register_name(head.text) && p.peek(1).text == "=") {
        in.dst = p.reg();
        p.expect("=");
        std::string op = p.ident("opcode");
        if (op == "load") {
            in.op = Op::load;
            in.addr = p.address();
        } else if (op == "store" || op == "beqz" || op == "jmp" || op == "call" || op == "fence" ||
                   op == "lfence" || op == "skip" || op == "protect") {
            throw ParseError(pos, "opcode '" + op + "' does not produce a value");
        } else {
            in.op = Op::alu;
            in.alu_op = op;
            in.operands.push_back(p.operand());
            while (p.accept(",")) in.operands.push_back(p.operand());
        }
        p.finish();
        return in;
    }
    std::string op = p.ident("instruction");
    if (op == "store") {
        in.op = Op::store;
        in.addr = p.address();
        p.expect(",");
        in.operands.push_back(p.operand());
    } else if (op == "beqz") {
        in.op = Op::beqz;
        in.cond = p.reg();
        p.expect(",");
        in.target = p.ident("label");
    } else if (op == "jmp") {
        in.op = Op::jmp;
        in.target = p.ident("label");
    } else if (op == "fence" || op == "mfence") {
        in.op = Op::fence;
        in.fence = FenceKind::full;
    } else if (op == "lfence") {
        in.op = Op::fence;
        in.fence = FenceKind::lfence;
    } else if (op == "protect") {
        in.op = Op::protect;
        in.cond = p.reg();
    } else if (op == "skip") {
        in.op = Op::skip;
    } else if (op == "call") {
        in.op = Op::call;
        in.target = p.ident("function name");
        p.expect("(");
        if (!p.accept(")")) {
            in.args.push_back(p.call_arg());
            while (p.accept(",")) in.args.push_back(p.call_arg());
            p.expect(")");
        }
    } else {
        throw ParseError(pos, "unknown opcode '" + op + "'");
    }
    p.finish();
    return in;
}

/// Must-defined register analysis; throws on the first use-before-def.
inline void check_definitions(const Function& f) {
    const std::size_t n = f.body.size();
    std::set<int> all;
    for (Reg r : f.params) all.insert(r.id);
    for (const auto& in : f.body) {
        if (auto w = writes(in)) all.insert(w->id);
        for (Reg r : reads(in)) all.insert(r.id);
    }
    std::vector<std::set<int>> in_sets(n + 1, all);
    std::vector<bool> reached(n + 1, false);
    std::set<int> entry;
    for (Reg r : f.params) entry.insert(r.id);
    if (n == 0) return;
    in_sets[0] = entry;
    reached[0] = true;
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            if (!reached[i]) continue;
            std::set<int> out = in_sets[i];
            if (auto w = writes(f.body[i])) out.insert(w->id);
            for (std::size_t s : successors(f, i)) {
                std::set<int> merged;
                if (!reached[s]) {
                    merged = out;
                    reached[s] = true;
                } else {
                    std::set_intersection(in_sets[s].begin(), in_sets[s].end(), out.begin(), out.end(),
                                          std::inserter(merged, merged.begin()));
                }
                if (merged != in_sets[s] || !reached[s]) {
                    in_sets[s] = std::move(merged);
                    changed = true;
                }
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!reached[i]) continue;
        for (Reg r : reads(f.body[i]))
            if (!in_sets[i].count(r.id))
                throw ParseError(f.body[i].pos, "register " + to_string(r) + " used before definition in '" + f.name + "'");
    }
}

inline void validate(Program& p) {
    std::set<std::string> names;
    for (const auto& f : p.functions) {
        if (!names.insert(f.name).second) throw ParseError(f.pos, "duplicate function '" + f.name + "'");
        if (p.externs.count(f.name)) throw ParseError(f.pos, "function '" + f.name + "' is also declared extern");
    }
    for (auto& f : p.functions) {
        for (std::size_t i = 0; i < f.body.size(); ++i) {
            auto& in = f.body[i];
            if ((in.op == Op::beqz || in.op == Op::jmp) && !f.label_index.count(in.target))
                throw ParseError(in.pos, "undefined label '" + in.target + "'");
            if (in.op != Op::call) continue;
            if (auto it = p.externs.find(in.target); it != p.externs.end()) {
                if (static_cast<int>(in.args.size()) != it->second)
                    throw ParseError(in.pos, "extern '" + in.target + "' takes " + std::to_string(it->second) + " pointer operands");
                for (auto& a : in.args) {
                    if (auto* o = std::get_if<Operand>(&a)) {
                        if (!o->is_reg()) throw ParseError(in.pos, "extern pointer operand must be a register or location");
                        AddressExpr e;
                        e.mode = AddrMode::indirect;
                        e.reg = o->reg();
                        e.location = "*" + to_string(e.reg);
                        a = e;
                    }
                }
            } else if (const Function* callee = p.find(in.target)) {
                if (callee->is_thread) throw ParseError(in.pos, "cannot call thread '" + in.target + "'");
                if (in.args.size() != callee->params.size())
                    throw ParseError(in.pos, "function '" + in.target + "' takes " + std::to_string(callee->params.size()) + " arguments");
                for (const auto& a : in.args)
                    if (!std::holds_alternative<Operand>(a))
                        throw ParseError(in.pos, "arguments of defined functions must be registers or integers");
            } else {
                throw ParseError(in.pos, "call to undefined function '" + in.target + "'");
            }
        }
        check_definitions(f);
    }
    for (const auto& [a, b] : p.aliases)
        if (a == b) throw Error("alias declaration relates '" + a + "' to itself");

    p.entries.clear();
    for (const auto& f : p.functions)
        if (f.is_thread) p.entries.push_back(f.name);
    if (!p.entries.empty()) {
        if (p.explicit_entry) throw Error("'entry' cannot be combined with thread blocks");
        return;
    }
    if (p.functions.empty()) throw ParseError({1, 1}, "program defines no function");
    if (p.explicit_entry) {
        if (!p.find(*p.explicit_entry)) throw Error("entry function '" + *p.explicit_entry + "' is not defined");
        p.entries.push_back(*p.explicit_entry);
    } else if (p.find("main")) {
        p.entries.push_back("main");
    } else {
        p.entries.push_back(p.functions.front().name);
    }
}

}  // namespace detail

inline Program parse(std::string_view text) {
    using namespace detail;
    Program prog;
    Function* current = nullptr;
    std::vector<std::string> pending_labels;
    std::vector<SourcePos> pending_pos;

    auto close_function = [&]() {
        if (!current) return;
        for (const auto& l : pending_labels) current->label_index[l] = current->body.size();
        pending_labels.clear();
        pending_pos.clear();
    };

    int line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        ++line_no;
        start = end + 1;

        auto toks = tokenize(line, line_no);
        LineParser p(std::move(toks), line_no);
        if (p.at_end()) {
            if (end == text.size()) break;
            continue;
        }
        const Token& head = p.peek();
        SourcePos pos{line_no, head.column};

        if (head.kind == Tok::ident && head.text == "alias" && p.peek(1).text == "(") {
            p.ident();
            p.expect("(");
            std::string a = p.ident("location");
            p.expect(",");
            std::string b = p.ident("location");
            p.expect(")");
            p.finish();
            if (a > b) std::swap(a, b);
            prog.aliases.emplace(a, b);
        } else if (head.kind == Tok::ident && head.text == "extern" && p.peek(1).kind == Tok::ident) {
            p.ident();
            std::string name = p.ident("function name");
            p.expect("/");
            auto arity = p.integer();
            p.finish();
            if (arity < 0) throw ParseError(pos, "negative extern arity");
            prog.externs[name] = static_cast<int>(arity);
        } else if (head.kind == Tok::ident && head.text == "entry" && p.peek(1).kind == Tok::ident &&
                   p.peek(2).kind == Tok::end) {
            p.ident();
            prog.explicit_entry = p.ident("function name");
        } else if (head.kind == Tok::ident && (head.text == "func" || head.text == "thread") &&
                   p.peek(1).kind == Tok::ident && p.peek(2).text != "=") {
            close_function();
            bool thread = p.ident() == "thread";
            Function f;
            f.name = p.ident("function name");
            f.is_thread = thread;
            f.pos = pos;
            if (!thread && p.accept("(")) {
                if (!p.accept(")")) {
                    f.params.push_back(p.reg());
                    while (p.accept(",")) f.params.push_back(p.reg());
                    p.expect(")");
                }
            }
            p.expect(":");
            p.finish();
            prog.functions.push_back(std::move(f));
            current = &prog.functions.back();
        } else {
            if (!current) throw ParseError(pos, "instruction outside of a function", {"'func'", "'thread'"});
            // leading labels
            while (p.peek().kind == Tok::ident && !is_register_name(p.peek().text) && p.peek(1).text == ":") {
                SourcePos lpos = p.here();
                std::string label = p.ident();
                p.expect(":");
                if (current->label_index.count(label) ||
                    std::find(pending_labels.begin(), pending_labels.end(), label) != pending_labels.end())
                    throw ParseError(lpos, "duplicate label '" + label + "'");
                pending_labels.push_back(label);
                pending_pos.push_back(lpos);
            }
            if (!p.at_end()) {
                Instruction in = parse_instruction(p, p.here());
                in.labels = pending_labels;
                for (const auto& l : pending_labels) current->label_index[l] = current->body.size();
                pending_labels.clear();
                pending_pos.clear();
                current->body.push_back(std::move(in));
            }
        }
        if (end == text.size()) break;
    }
    close_function();
    detail::validate(prog);
    return prog;
}

// ---------------------------------------------------------------------------
// Def-use

struct InstrRef {
    std::size_t function = 0;
    std::size_t index = 0;
    auto operator<=>(const InstrRef&) const = default;
};

/// Register def-use information per function, with reaching definitions so
/// that value-flow questions ("which loads feed this operand?") can be asked
/// without re-running the dataflow.
class DefUse {
public:
    struct Entry {
        std::vector<Reg> reads;
        std::optional<Reg> writes;
    };

    explicit DefUse(const Program& p) : prog_(&p) {
        for (const auto& f : p.functions) {
            std::vector<Entry> entries;
            for (const auto& in : f.body) entries.push_back({ir::reads(in), ir::writes(in)});
            entries_.push_back(std::move(entries));
            reaching_.push_back(compute_reaching(f));
        }
    }

    const Entry& at(InstrRef r) const { return entries_.at(r.function).at(r.index); }

    /// Instruction indices whose definition of `reg` may reach instruction
    /// `index` (-1 stands for the function parameter).
    std::set<long> reaching(std::size_t fn, std::size_t index, Reg reg) const {
        std::set<long> out;
        for (const auto& [r, def] : reaching_.at(fn).at(index))
            if (r == reg.id) out.insert(def);
        return out;
    }

    /// Loads whose returned value flows through register dataflow (ALU ops
    /// only, no memory round trip) into `reg` as read at `index`.
    std::set<std::size_t> value_sources(std::size_t fn, std::size_t index, Reg reg) const {
        std::set<std::size_t> out;
        std::set<std::pair<std::size_t, int>> seen;
        std::vector<std::pair<std::size_t, Reg>> work{{index, reg}};
        const Function& f = prog_->functions.at(fn);
        while (!work.empty()) {
            auto [at, r] = work.back();
            work.pop_back();
            if (!seen.insert({at, r.id}).second) continue;
            for (long def : reaching(fn, at, r)) {
                if (def < 0) continue;
                const Instruction& d = f.body[static_cast<std::size_t>(def)];
                if (d.op == Op::load) out.insert(static_cast<std::size_t>(def));
                else if (d.op == Op::alu)
                    for (const auto& o : d.operands)
                        if (o.is_reg()) work.emplace_back(static_cast<std::size_t>(def), o.reg());
            }
        }
        return out;
    }

    /// Union of value_sources over every register read by the instruction.
    std::set<std::size_t> depends_on(std::size_t fn, std::size_t index) const {
        std::set<std::size_t> out;
        for (Reg r : at({fn, index}).reads) {
            auto s = value_sources(fn, index, r);
            out.insert(s.begin(), s.end());
        }
        return out;
    }

private:
    using DefSet = std::set<std::pair<int, long>>;  // (register id, defining index or -1)

    static std::vector<DefSet> compute_reaching(const Function& f) {
        const std::size_t n = f.body.size();
        std::vector<DefSet> in(n + 1);
        for (Reg r : f.params) in[0].insert({r.id, -1});
        bool changed = true;
        while (changed) {
            changed = false;
            for (std::size_t i = 0; i < n; ++i) {
                DefSet out = in[i];
                if (auto w = writes(f.body[i])) {
                    for (auto it = out.begin(); it != out.end();) it = it->first == w->id ? out.erase(it) : std::next(it);
                    out.insert({w->id, static_cast<long>(i)});
                }
                for (std::size_t s : successors(f, i)) {
                    std::size_t before = in[s].size();
                    in[s].insert(out.begin(), out.end());
                    if (in[s].size() != before) changed = true;
                }
            }
        }
        return in;
    }

    const Program* prog_;
    std::vector<std::vector<Entry>> entries_;
    std::vector<std::vector<DefSet>> reaching_;
};

inline DefUse defuse(const Program& p) { return DefUse(p); }

}  // namespace lcm::ir
