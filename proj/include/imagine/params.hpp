#pragma once

#include <string>

#include "imagine/isa.hpp"

namespace imagine {

// Op-Params: the controller-side parameter store read by every multicycle
// instruction.
struct OpParams {
    unsigned width = 8;      // operand bit-width W
    unsigned acc_width = 16; // accumulator width Wacc
    bool is_signed = true;
    unsigned radix = 2;
    unsigned slice = 1;

    friend bool operator==(const OpParams&, const OpParams&) = default;
};

inline constexpr unsigned kMaxAccWidth = 64;

inline bool valid_width(unsigned w) { return w == 2 || w == 4 || w == 8 || w == 16; }

inline unsigned width_code(unsigned w) {
    switch (w) {
    case 2: return 0;
    case 4: return 1;
    case 8: return 2;
    case 16: return 3;
    default: throw encode_error("W", w);
    }
}

inline isa::Instruction set_params(const OpParams& p) {
    using namespace isa::paramfn;
    if (p.radix != 2 && p.radix != 4) throw encode_error("radix", p.radix);
    if (p.slice != 1 && p.slice != 4) throw encode_error("slice", p.slice);
    if (p.acc_width == 0 || p.acc_width > kMaxAccWidth) throw encode_error("wacc", p.acc_width);
    isa::Word fn = width_code(p.width);
    if (p.radix == 4) fn |= kRadix4;
    if (p.slice == 4) fn |= kSlice4;
    if (!p.is_signed) fn |= kUnsigned;
    return {isa::Opcode::SetParams, fn, p.acc_width, 0};
}

// addr1 == 0 selects the default accumulator width 2W.
inline OpParams params_from(const isa::Instruction& in) {
    using namespace isa::paramfn;
    OpParams p;
    p.width = 2u << (in.fn & kWidthMask);
    p.acc_width = in.addr1 == 0 ? 2 * p.width : in.addr1;
    p.radix = (in.fn & kRadix4) ? 4 : 2;
    p.slice = (in.fn & kSlice4) ? 4 : 1;
    p.is_signed = !(in.fn & kUnsigned);
    return p;
}

} // namespace imagine
