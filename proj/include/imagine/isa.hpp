#pragma once

// Overlay instruction set: 30-bit words laid out as
//
//   29..26  opcode
//   25..20  fn     (opcode-dependent modifier)
//   19..10  addr1  (register-file row)
//    9..0   addr2  (register-file row)
//
// The third address of a three-operand op comes from the block's pointer
// register (SET_PTR).

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "imagine/errors.hpp"

namespace imagine::isa {

using Word = std::uint32_t;

inline constexpr unsigned kOpcodeShift = 26;
inline constexpr unsigned kFnShift = 20;
inline constexpr unsigned kAddr1Shift = 10;
inline constexpr Word kFnLimit = 64;
inline constexpr Word kAddrLimit = 1024;
inline constexpr Word kWordMask = (Word{1} << 30) - 1;

enum class Opcode : std::uint8_t {
    Nop = 0,
    SetParams = 1,
    SetPtr = 2,
    SelBlock = 3,
    Copy = 4,
    Add = 5,
    Sub = 6,
    Mult = 7,
    AccBlk = 8,
    AccHop = 9,
    ReadOut = 10,
    ShiftOut = 11,
    Halt = 12,
    // 13..15 reserved
};

inline constexpr unsigned kOpcodeCount = 13;

// ADD / SUB modifier bits.
namespace addfn {
inline constexpr Word kDestA = 1;      // destination is addr1 instead of ptr
inline constexpr Word kAccumulate = 2; // width Wacc, B is a sign-extended 2W product
inline constexpr Word kZeroA = 4;      // A operand from the ZERO source
} // namespace addfn

// SET_PARAMS modifier bits; W code in bits 1..0.
namespace paramfn {
inline constexpr Word kWidthMask = 3;
inline constexpr Word kRadix4 = 4;
inline constexpr Word kSlice4 = 8;
inline constexpr Word kUnsigned = 16;
} // namespace paramfn

struct Instruction {
    Opcode op = Opcode::Nop;
    Word fn = 0;
    Word addr1 = 0;
    Word addr2 = 0;

    friend bool operator==(const Instruction&, const Instruction&) = default;
};

struct OpcodeInfo {
    Opcode op;
    std::string_view mnemonic;
    bool single_cycle;
};

inline constexpr std::array<OpcodeInfo, kOpcodeCount> kOpcodeTable{{
    {Opcode::Nop, "nop", true},
    {Opcode::SetParams, "setp", true},
    {Opcode::SetPtr, "setptr", true},
    {Opcode::SelBlock, "selblk", true},
    {Opcode::Copy, "copy", false},
    {Opcode::Add, "add", false},
    {Opcode::Sub, "sub", false},
    {Opcode::Mult, "mult", false},
    {Opcode::AccBlk, "accblk", false},
    {Opcode::AccHop, "acchop", false},
    {Opcode::ReadOut, "readout", false},
    {Opcode::ShiftOut, "shiftout", true},
    {Opcode::Halt, "halt", true},
}};

constexpr const OpcodeInfo& info(Opcode op) { return kOpcodeTable[static_cast<unsigned>(op)]; }
constexpr std::string_view mnemonic(Opcode op) { return info(op).mnemonic; }
constexpr bool is_single_cycle(Opcode op) { return info(op).single_cycle; }
constexpr bool is_multicycle(Opcode op) { return !is_single_cycle(op); }

inline std::optional<Opcode> opcode_from_mnemonic(std::string_view m) {
    for (const auto& e : kOpcodeTable)
        if (e.mnemonic == m) return e.op;
    return std::nullopt;
}

inline Word encode(const Instruction& in) {
    const auto code = static_cast<unsigned>(in.op);
    if (code >= kOpcodeCount) throw encode_error("opcode", code);
    if (in.fn >= kFnLimit) throw encode_error("fn", in.fn);
    if (in.addr1 >= kAddrLimit) throw encode_error("addr1", in.addr1);
    if (in.addr2 >= kAddrLimit) throw encode_error("addr2", in.addr2);
    return (Word{code} << kOpcodeShift) | (in.fn << kFnShift) | (in.addr1 << kAddr1Shift) | in.addr2;
}

inline Instruction decode(Word w) {
    if (w & ~kWordMask) throw format_error("decode: bits above 29 are set");
    const unsigned code = w >> kOpcodeShift;
    if (code >= kOpcodeCount) throw illegal_instruction(code);
    return Instruction{static_cast<Opcode>(code), (w >> kFnShift) & (kFnLimit - 1),
                       (w >> kAddr1Shift) & (kAddrLimit - 1), w & (kAddrLimit - 1)};
}

// Convenience constructors used by the kernel generator and tests.
inline Instruction nop() { return {Opcode::Nop, 0, 0, 0}; }
inline Instruction halt() { return {Opcode::Halt, 0, 0, 0}; }
inline Instruction set_ptr(Word row) { return {Opcode::SetPtr, 0, row, 0}; }
inline Instruction add(Word a, Word b, Word fn = 0) { return {Opcode::Add, fn, a, b}; }
inline Instruction sub(Word a, Word b, Word fn = 0) { return {Opcode::Sub, fn, a, b}; }
inline Instruction mult(Word a, Word b) { return {Opcode::Mult, 0, a, b}; }
inline Instruction copy(Word src, Word dst) { return {Opcode::Copy, 0, src, dst}; }
inline Instruction acc_blk(Word stage, Word src, Word dst) { return {Opcode::AccBlk, stage, src, dst}; }
inline Instruction acc_hop(Word level, Word src, Word dst) { return {Opcode::AccHop, level, src, dst}; }
inline Instruction read_out(Word src) { return {Opcode::ReadOut, 0, src, 0}; }
inline Instruction shift_out() { return {Opcode::ShiftOut, 0, 0, 0}; }

// Block ids and masks are 13 bits: fn carries the high three bits of each.
inline Instruction sel_block(unsigned id, unsigned mask) {
    if (id >= 8192) throw encode_error("block id", id);
    if (mask >= 8192) throw encode_error("block mask", mask);
    const Word fn = ((id >> 10) & 7) | (((mask >> 10) & 7) << 3);
    return {Opcode::SelBlock, fn, id & 1023, mask & 1023};
}
inline unsigned sel_block_id(const Instruction& in) { return ((in.fn & 7) << 10) | in.addr1; }
inline unsigned sel_block_mask(const Instruction& in) { return (((in.fn >> 3) & 7) << 10) | in.addr2; }

struct Program {
    std::vector<Instruction> code;
    std::map<std::string, std::size_t> labels; // assembler-level only

    std::size_t size() const noexcept { return code.size(); }
    friend bool operator==(const Program& a, const Program& b) { return a.code == b.code; }
};

// Checks the program-level invariants: ends with HALT and SET_PARAMS comes
// before the first multicycle instruction.
inline void validate(const Program& p) {
    if (p.code.empty() || p.code.back().op != Opcode::Halt)
        throw format_error("program must end with halt");
    for (const auto& in : p.code) {
        if (in.op == Opcode::SetParams) break;
        if (is_multicycle(in.op))
            throw format_error("multicycle '" + std::string(mnemonic(in.op)) + "' before setp");
    }
}

// Binary container: "IMG1", u32 LE word count, u32 LE words.
inline constexpr std::array<char, 4> kMagic{'I', 'M', 'G', '1'};

inline std::vector<std::uint8_t> to_binary(const Program& p) {
    std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
    auto put = [&out](Word w) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(w >> (8 * i)));
    };
    put(static_cast<Word>(p.code.size()));
    for (const auto& in : p.code) put(encode(in));
    return out;
}

inline Program from_binary(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 8 || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin()))
        throw format_error("binary: bad magic");
    auto get = [&bytes](std::size_t off) {
        Word w = 0;
        for (int i = 0; i < 4; ++i) w |= Word{bytes[off + i]} << (8 * i);
        return w;
    };
    const Word count = get(4);
    if (bytes.size() != 8 + std::size_t{count} * 4)
        throw format_error("binary: size does not match word count " + std::to_string(count));
    Program p;
    p.code.reserve(count);
    for (Word i = 0; i < count; ++i) p.code.push_back(decode(get(8 + 4 * std::size_t{i})));
    return p;
}

} // namespace imagine::isa
