#pragma once

// Text assembler for the overlay ISA.
//
//   # comment
//   label:
//   mnemonic [operands]
//
// Operands are separated by commas or whitespace. Numbers are decimal or
// 0x-hex. Besides positional operands an instruction accepts key=value pairs
// (setp w=8 wacc=22 radix=4 slice=4) and bare flags (add 768, 896, inplace acc).
// The raw keys fn=, a1=, a2= override an encoded field directly.

#include <cctype>
#include <charconv>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "imagine/isa.hpp"
#include "imagine/params.hpp"

namespace imagine::isa {

namespace detail {

struct Operand {
    std::string key;   // empty for positional / bare flag
    std::string text;  // value text, or the flag word
    bool numeric = false;
    std::uint64_t value = 0;
};

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

inline bool parse_number(std::string_view s, std::uint64_t& out) {
    int base = 10;
    if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
        s.remove_prefix(2);
        base = 16;
    }
    if (s.empty()) return false;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out, base);
    return ec == std::errc{} && p == s.data() + s.size();
}

inline bool is_identifier(std::string_view s) {
    if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_' || s[0] == '.'))
        return false;
    for (char c : s)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.')) return false;
    return true;
}

inline std::vector<Operand> split_operands(std::string_view s, int line) {
    std::vector<Operand> ops;
    std::string tok;
    auto flush = [&] {
        if (tok.empty()) return;
        Operand op;
        std::string_view t = tok;
        if (auto eq = t.find('='); eq != std::string_view::npos) {
            op.key = std::string(trim(t.substr(0, eq)));
            t = trim(t.substr(eq + 1));
            if (op.key.empty() || t.empty()) throw assemble_error(line, "malformed operand '" + tok + "'");
        }
        op.text = std::string(t);
        op.numeric = parse_number(t, op.value);
        if (!op.numeric && !is_identifier(t)) throw assemble_error(line, "malformed operand '" + tok + "'");
        ops.push_back(std::move(op));
        tok.clear();
    };
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (c == ',' || std::isspace(static_cast<unsigned char>(c))) {
            flush();
        } else {
            tok.push_back(c);
        }
    }
    flush();
    return ops;
}

inline Word field(const Operand& op, Word limit, const char* name, int line) {
    if (!op.numeric) throw assemble_error(line, std::string("expected number for ") + name + ", got '" + op.text + "'");
    if (op.value >= limit)
        throw assemble_error(line, std::string("operand out of range: ") + name + " = " + op.text);
    return static_cast<Word>(op.value);
}

inline Instruction assemble_line(std::string_view mn, const std::vector<Operand>& ops, int line) {
    const auto opc = opcode_from_mnemonic(mn);
    if (!opc) throw assemble_error(line, "unknown mnemonic '" + std::string(mn) + "'");
    Instruction in{*opc, 0, 0, 0};

    std::vector<const Operand*> pos, keyed, flags;
    for (const auto& op : ops) {
        if (!op.key.empty()) keyed.push_back(&op);
        else if (op.numeric) pos.push_back(&op);
        else flags.push_back(&op);
    }
    auto want_positional = [&](std::size_t n) {
        if (pos.size() != n)
            throw assemble_error(line, std::string(mn) + " expects " + std::to_string(n) + " operand(s), got " +
                                           std::to_string(pos.size()));
    };

    switch (in.op) {
    case Opcode::Nop:
    case Opcode::Halt:
    case Opcode::ShiftOut:
        want_positional(0);
        break;
    case Opcode::SetPtr:
    case Opcode::ReadOut:
        want_positional(1);
        in.addr1 = field(*pos[0], kAddrLimit, "addr1", line);
        break;
    case Opcode::Copy:
    case Opcode::Mult:
    case Opcode::Add:
    case Opcode::Sub:
        want_positional(2);
        in.addr1 = field(*pos[0], kAddrLimit, "addr1", line);
        in.addr2 = field(*pos[1], kAddrLimit, "addr2", line);
        break;
    case Opcode::AccBlk:
    case Opcode::AccHop:
        want_positional(3);
        in.fn = field(*pos[0], kFnLimit, in.op == Opcode::AccBlk ? "stage" : "level", line);
        in.addr1 = field(*pos[1], kAddrLimit, "addr1", line);
        in.addr2 = field(*pos[2], kAddrLimit, "addr2", line);
        break;
    case Opcode::SelBlock: {
        want_positional(2);
        const auto id = field(*pos[0], 8192, "block id", line);
        const auto mask = field(*pos[1], 8192, "block mask", line);
        in = sel_block(id, mask);
        break;
    }
    case Opcode::SetParams: {
        want_positional(0);
        OpParams p;
        bool have_w = false, have_wacc = false;
        for (const auto* k : keyed) {
            if (k->key == "w") {
                p.width = field(*k, 17, "w", line);
                if (!valid_width(p.width)) throw assemble_error(line, "operand out of range: w = " + k->text);
                have_w = true;
            } else if (k->key == "wacc") {
                p.acc_width = field(*k, kMaxAccWidth + 1, "wacc", line);
                if (p.acc_width == 0) throw assemble_error(line, "operand out of range: wacc = 0");
                have_wacc = true;
            } else if (k->key == "radix") {
                p.radix = field(*k, 5, "radix", line);
                if (p.radix != 2 && p.radix != 4) throw assemble_error(line, "radix must be 2 or 4");
            } else if (k->key == "slice") {
                p.slice = field(*k, 5, "slice", line);
                if (p.slice != 1 && p.slice != 4) throw assemble_error(line, "slice must be 1 or 4");
            }
        }
        for (const auto* f : flags) {
            if (f->text == "unsigned") p.is_signed = false;
            else if (f->text == "signed") p.is_signed = true;
            else throw assemble_error(line, "unknown setp flag '" + f->text + "'");
        }
        if (!have_w) throw assemble_error(line, "setp requires w=");
        if (!have_wacc) p.acc_width = 2 * p.width;
        in = set_params(p);
        if (!have_wacc) in.addr1 = 0;
        flags.clear();
        break;
    }
    }

    if (in.op == Opcode::Add || in.op == Opcode::Sub) {
        for (const auto* f : flags) {
            if (f->text == "inplace") in.fn |= addfn::kDestA;
            else if (f->text == "acc") in.fn |= addfn::kAccumulate;
            else if (f->text == "zero") in.fn |= addfn::kZeroA;
            else throw assemble_error(line, "unknown flag '" + f->text + "'");
        }
    } else if (!flags.empty()) {
        throw assemble_error(line, "unexpected operand '" + flags.front()->text + "'");
    }

    for (const auto* k : keyed) {
        if (k->key == "fn") in.fn = field(*k, kFnLimit, "fn", line);
        else if (k->key == "a1") in.addr1 = field(*k, kAddrLimit, "addr1", line);
        else if (k->key == "a2") in.addr2 = field(*k, kAddrLimit, "addr2", line);
        else if (in.op != Opcode::SetParams)
            throw assemble_error(line, "unknown key '" + k->key + "'");
        else if (k->key != "w" && k->key != "wacc" && k->key != "radix" && k->key != "slice")
            throw assemble_error(line, "unknown setp key '" + k->key + "'");
    }
    return in;
}

} // namespace detail

inline Program assemble(std::string_view source) {
    Program prog;
    int line_no = 0;
    std::size_t start = 0;
    while (start <= source.size()) {
        auto end = source.find('\n', start);
        if (end == std::string_view::npos) end = source.size();
        std::string_view line = source.substr(start, end - start);
        start = end + 1;
        ++line_no;

        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (auto colon = line.find(':'); colon != std::string_view::npos) {
            const auto label = detail::trim(line.substr(0, colon));
            if (!detail::is_identifier(label)) throw assemble_error(line_no, "bad label '" + std::string(label) + "'");
            if (!prog.labels.emplace(std::string(label), prog.code.size()).second)
                throw assemble_error(line_no, "duplicate label '" + std::string(label) + "'");
            line = detail::trim(line.substr(colon + 1));
        }
        if (line.empty()) continue;

        std::size_t sp = 0;
        while (sp < line.size() && !std::isspace(static_cast<unsigned char>(line[sp]))) ++sp;
        std::string mn(line.substr(0, sp));
        for (auto& c : mn) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        const auto ops = detail::split_operands(line.substr(sp), line_no);
        prog.code.push_back(detail::assemble_line(mn, ops, line_no));
    }
    return prog;
}

namespace detail {
inline std::string hex(Word v) {
    std::ostringstream os;
    os << "0x" << std::hex << v;
    return os.str();
}
} // namespace detail

// Canonical text form; assemble(disassemble(i)) reproduces i exactly.
inline std::string disassemble(const Instruction& in) {
    std::ostringstream os;
    os << mnemonic(in.op);
    switch (in.op) {
    case Opcode::Nop:
    case Opcode::Halt:
    case Opcode::ShiftOut:
        break;
    case Opcode::SetPtr:
    case Opcode::ReadOut:
        os << ' ' << detail::hex(in.addr1);
        break;
    case Opcode::Copy:
    case Opcode::Mult:
    case Opcode::Add:
    case Opcode::Sub:
        os << ' ' << detail::hex(in.addr1) << ", " << detail::hex(in.addr2);
        if (in.op == Opcode::Add || in.op == Opcode::Sub) {
            if (in.fn & addfn::kDestA) os << ", inplace";
            if (in.fn & addfn::kAccumulate) os << ", acc";
            if (in.fn & addfn::kZeroA) os << ", zero";
        }
        break;
    case Opcode::AccBlk:
    case Opcode::AccHop:
        os << ' ' << in.fn << ", " << detail::hex(in.addr1) << ", " << detail::hex(in.addr2);
        break;
    case Opcode::SelBlock:
        os << ' ' << sel_block_id(in) << ", " << detail::hex(sel_block_mask(in));
        break;
    case Opcode::SetParams: {
        const auto p = params_from(in);
        os << " w=" << p.width;
        if (in.addr1 != 0 && in.addr1 <= kMaxAccWidth) os << " wacc=" << in.addr1;
        if (p.radix != 2) os << " radix=" << p.radix;
        if (p.slice != 1) os << " slice=" << p.slice;
        if (!p.is_signed) os << " unsigned";
        break;
    }
    }
    // Fields the canonical form does not carry.
    const std::string text = os.str();
    const auto sp = text.find(' ');
    const auto back = detail::assemble_line(text.substr(0, sp),
                                            detail::split_operands(sp == std::string::npos ? "" : text.substr(sp), 0), 0);
    if (back.fn != in.fn) os << " fn=" << in.fn;
    if (back.addr1 != in.addr1) os << " a1=" << detail::hex(in.addr1);
    if (back.addr2 != in.addr2) os << " a2=" << detail::hex(in.addr2);
    return os.str();
}

inline std::string disassemble(const Program& p) {
    std::string out;
    for (const auto& in : p.code) out += disassemble(in) + '\n';
    return out;
}

} // namespace imagine::isa
