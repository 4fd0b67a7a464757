#pragma once

// Bit-accurate model of one PIM block: 16 bit-serial PEs sharing a
// 1024 x 16 register file. Bit p of a row word belongs to PE p. Every
// multicycle instruction is executed one micro-cycle at a time by step();
// the tile controller drives the micro-cycle index.

#include <algorithm>
#include <array>
#include <cstdint>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "imagine/errors.hpp"
#include "imagine/isa.hpp"
#include "imagine/params.hpp"

namespace imagine::pim {

inline constexpr unsigned kPes = 16;
inline constexpr unsigned kRows = 1024;
inline constexpr unsigned kMaxSlice = 4;
inline constexpr unsigned kReadPorts = 2;
inline constexpr unsigned kWritePorts = 1;
inline constexpr unsigned kMaxMultWidth = 16;

using RowBits = std::uint16_t;
inline constexpr RowBits kAllPes = 0xFFFF;

class RegisterFile {
public:
    // Starts a new cycle of the port budget.
    void begin_cycle() noexcept {
        reads_ = 0;
        writes_ = 0;
    }

    RowBits read(unsigned row) {
        use_read();
        return bits_.at(row);
    }

    void write(unsigned row, RowBits v) {
        use_write();
        bits_.at(row) = v;
    }

    // A slice of up to kMaxSlice consecutive rows through the wide port:
    // one access.
    std::array<RowBits, kMaxSlice> read_slice(unsigned row, unsigned count) {
        use_read();
        std::array<RowBits, kMaxSlice> out{};
        for (unsigned i = 0; i < count; ++i) out[i] = bits_.at(row + i);
        return out;
    }

    void write_slice(unsigned row, unsigned count, const std::array<RowBits, kMaxSlice>& v) {
        use_write();
        for (unsigned i = 0; i < count; ++i) bits_.at(row + i) = v[i];
    }

    // Backdoor access, outside the port budget.
    RowBits peek(unsigned row) const { return bits_.at(row); }
    void poke(unsigned row, RowBits v) { bits_.at(row) = v; }

    unsigned reads_this_cycle() const noexcept { return reads_; }
    unsigned writes_this_cycle() const noexcept { return writes_; }
    unsigned max_reads_seen() const noexcept { return max_reads_; }
    unsigned max_writes_seen() const noexcept { return max_writes_; }

    friend bool operator==(const RegisterFile& a, const RegisterFile& b) { return a.bits_ == b.bits_; }

private:
    void use_read() {
        if (++reads_ > kReadPorts) throw std::logic_error("register file: read port budget exceeded");
        if (reads_ > max_reads_) max_reads_ = reads_;
    }
    void use_write() {
        if (++writes_ > kWritePorts) throw std::logic_error("register file: write port budget exceeded");
        if (writes_ > max_writes_) max_writes_ = writes_;
    }

    std::array<RowBits, kRows> bits_{};
    unsigned reads_ = 0;
    unsigned writes_ = 0;
    unsigned max_reads_ = 0;
    unsigned max_writes_ = 0;
};

// Stores value (LSB at row) into one PE column; backdoor.
inline void store_value(RegisterFile& rf, unsigned row, unsigned width, unsigned pe, std::int64_t value) {
    const auto bit = static_cast<RowBits>(1u << pe);
    for (unsigned i = 0; i < width; ++i) {
        RowBits r = rf.peek(row + i);
        r = ((static_cast<std::uint64_t>(value) >> i) & 1) ? (r | bit) : (r & ~bit);
        rf.poke(row + i, static_cast<RowBits>(r));
    }
}

inline std::int64_t load_value(const RegisterFile& rf, unsigned row, unsigned width, unsigned pe,
                               bool is_signed = true) {
    std::uint64_t v = 0;
    for (unsigned i = 0; i < width; ++i) v |= std::uint64_t{(rf.peek(row + i) >> pe) & 1u} << i;
    if (is_signed && width < 64 && (v >> (width - 1)) & 1) v |= ~std::uint64_t{0} << width;
    return static_cast<std::int64_t>(v);
}

// Rows of hex digits, row 0 first.
inline std::string dump(const RegisterFile& rf, unsigned first = 0, unsigned count = kRows) {
    std::ostringstream os;
    os << std::hex << std::setfill('0');
    for (unsigned r = first; r < first + count && r < kRows; ++r) os << std::setw(4) << rf.peek(r) << '\n';
    return os.str();
}

enum class AluMode { Add, Sub, BoothPass };

struct AluResult {
    RowBits sum;
    RowBits carry;
};

// One full-adder step on all 16 PEs. Sub expects b already inverted and the
// carry seeded with 1 at bit 0; BoothPass expects b already recoded.
constexpr AluResult alu_step(RowBits a, RowBits b, RowBits carry, AluMode = AluMode::Add) noexcept {
    return {static_cast<RowBits>(a ^ b ^ carry), static_cast<RowBits>((a & b) | (a & carry) | (b & carry))};
}

enum class OperandSource { OwnRow, EastStream, Zero };

// Per-PE Booth recode state, one bit-plane per field.
struct BoothState {
    RowBits prev = 0; // multiplier bit below the current window
    RowBits neg = 0;
    RowBits one = 0;
    RowBits two = 0;

    friend bool operator==(const BoothState&, const BoothState&) = default;
};

struct StreamLatch {
    std::array<RowBits, kMaxSlice> rows{};
    unsigned count = 0;
    bool valid = false;

    friend bool operator==(const StreamLatch&, const StreamLatch&) = default;
};

// One micro-cycle of an instruction as delivered by the controller.
struct MicroOp {
    isa::Instruction in;
    OpParams params;
    unsigned t = 0; // micro-cycle index, 0 = parameter fetch
};

inline unsigned ceil_div(unsigned a, unsigned b) { return (a + b - 1) / b; }

inline unsigned mult_passes(unsigned width, unsigned radix) { return radix == 4 ? ceil_div(width, 2) : width; }

inline unsigned add_width(const isa::Instruction& in, const OpParams& p) {
    return (in.fn & isa::addfn::kAccumulate) ? p.acc_width : p.width;
}

// Cycle cost of an instruction under the microcode contract.
inline unsigned op_cycles(const isa::Instruction& in, const OpParams& p, unsigned d_alu) {
    using isa::Opcode;
    switch (in.op) {
    case Opcode::Halt: return 0;
    case Opcode::Nop:
    case Opcode::SetParams:
    case Opcode::SetPtr:
    case Opcode::SelBlock:
    case Opcode::ShiftOut: return 1;
    case Opcode::Copy: return 1 + p.width + d_alu;
    case Opcode::Add:
    case Opcode::Sub: return 1 + add_width(in, p) + d_alu;
    case Opcode::Mult: return 1 + mult_passes(p.width, p.radix) * (p.width + 2) + d_alu;
    case Opcode::AccBlk: return 1 + p.acc_width + d_alu;
    case Opcode::AccHop:
    case Opcode::ReadOut: return 1 + ceil_div(p.acc_width, p.slice) + d_alu;
    }
    return 0;
}

namespace detail {

struct Range {
    unsigned row;
    unsigned len;
};

inline void check_range(const Range& r, const char* what) {
    if (r.row + r.len > kRows)
        throw layout_error(std::string(what) + " rows [" + std::to_string(r.row) + ", " +
                           std::to_string(r.row + r.len) + ") exceed the register file");
}

// Equal or disjoint.
inline void check_overlap(const Range& a, const Range& b, const char* what) {
    const bool disjoint = a.row + a.len <= b.row || b.row + b.len <= a.row;
    const bool equal = a.row == b.row && a.len == b.len;
    if (!disjoint && !equal) throw layout_error(std::string("partially overlapping ranges: ") + what);
}

inline void check_disjoint(const Range& a, const Range& b, const char* what) {
    if (!(a.row + a.len <= b.row || b.row + b.len <= a.row))
        throw layout_error(std::string("overlapping ranges: ") + what);
}

} // namespace detail

class PimBlock {
public:
    PimBlock() = default;
    PimBlock(unsigned id, unsigned grid_row, unsigned grid_col) : block_id(id), row(grid_row), column(grid_col) {}

    RegisterFile regfile;
    unsigned block_id = 0;
    unsigned row = 0;    // block row in the system grid (output lane)
    unsigned column = 0; // block column in the system grid, 0 = westmost
    isa::Word ptr = 0;
    RowBits carry = 0;
    BoothState booth;
    RowBits sign_latch = 0; // MSB of the running partial sum
    RowBits prev_a = 0;     // previous multiplicand bit (supplies 2A)
    bool selected = true;
    StreamLatch west_out;
    StreamLatch east_in;

    void set_block_select(unsigned id, unsigned mask) noexcept { selected = ((block_id ^ id) & mask) == 0; }

    // Architectural state covered by predication.
    bool same_state(const PimBlock& o) const {
        return regfile == o.regfile && ptr == o.ptr && carry == o.carry && booth == o.booth;
    }

    // Executes micro-cycle op.t of op.in. The caller opens the port-budget
    // cycle (regfile.begin_cycle()).
    void step(const MicroOp& op) {
        using isa::Opcode;
        const auto& in = op.in;
        if (in.op == Opcode::SelBlock) {
            set_block_select(isa::sel_block_id(in), isa::sel_block_mask(in));
            return;
        }
        if (!selected) return;
        switch (in.op) {
        case Opcode::SetPtr: ptr = in.addr1; break;
        case Opcode::Copy: step_copy(op); break;
        case Opcode::Add:
        case Opcode::Sub: step_add(op); break;
        case Opcode::Mult: step_mult(op); break;
        case Opcode::AccBlk: step_acc_block(op); break;
        case Opcode::AccHop: step_acc_hop(op); break;
        case Opcode::ReadOut: step_read_out(op); break;
        default: break;
        }
    }

private:
    void launch(unsigned base, unsigned width, unsigned slice, unsigned beat) {
        const unsigned first = beat * slice;
        const unsigned count = std::min(slice, width - first);
        west_out.rows = regfile.read_slice(base + first, count);
        west_out.count = count;
        west_out.valid = true;
    }

    void step_copy(const MicroOp& op) {
        const unsigned w = op.params.width;
        const detail::Range src{op.in.addr1, w}, dst{op.in.addr2, w};
        if (op.t == 0) {
            detail::check_range(src, "copy source");
            detail::check_range(dst, "copy destination");
            detail::check_overlap(src, dst, "copy");
            return;
        }
        if (op.t > w) return;
        const unsigned i = op.t - 1;
        regfile.write(dst.row + i, regfile.read(src.row + i));
    }

    void step_add(const MicroOp& op) {
        using namespace isa::addfn;
        const auto& in = op.in;
        const bool sub = in.op == isa::Opcode::Sub;
        const bool accumulate = in.fn & kAccumulate;
        const bool zero_a = in.fn & kZeroA;
        const unsigned n = add_width(in, op.params);
        const unsigned nb = accumulate ? 2 * op.params.width : n;
        const detail::Range a{in.addr1, n}, b{in.addr2, nb}, d{(in.fn & kDestA) ? in.addr1 : ptr, n};
        if (op.t == 0) {
            if (!zero_a) detail::check_range(a, "operand A");
            detail::check_range(b, "operand B");
            detail::check_range(d, "destination");
            if (!zero_a) detail::check_overlap(a, d, "A/D");
            if (!zero_a) detail::check_overlap(a, b, "A/B");
            detail::check_overlap(b, d, "B/D");
            carry = sub ? kAllPes : 0;
            return;
        }
        if (op.t > n) return;
        const unsigned i = op.t - 1;
        const RowBits av = zero_a ? 0 : regfile.read(a.row + i);
        RowBits bv;
        if (i < nb) {
            bv = regfile.read(b.row + i);
            if (i == nb - 1) sign_latch = bv;
        } else {
            bv = sign_latch;
        }
        if (sub) bv = static_cast<RowBits>(~bv);
        const auto r = alu_step(av, bv, carry, sub ? AluMode::Sub : AluMode::Add);
        carry = r.carry;
        regfile.write(d.row + i, r.sum);
    }

    void recode_radix2(RowBits bit) {
        booth.neg = static_cast<RowBits>(bit & ~booth.prev);
        booth.one = static_cast<RowBits>(bit ^ booth.prev);
        booth.two = 0;
        booth.prev = bit;
        carry = booth.neg;
    }

    void recode_radix4(RowBits hi, RowBits mid) {
        const RowBits lo = booth.prev;
        booth.one = static_cast<RowBits>(mid ^ lo);
        booth.two = static_cast<RowBits>((hi & ~mid & ~lo) | (~hi & mid & lo));
        booth.neg = static_cast<RowBits>(hi & ~(mid & lo));
        booth.prev = hi;
        carry = booth.neg;
    }

    // Partial products accumulate in place at ptr. Pass j adds digit_j * A
    // at bit offset j (radix-2) or 2j (radix-4); bits of the running sum
    // above its stored height come from the sign latch.
    void step_mult(const MicroOp& op) {
        const auto& in = op.in;
        const unsigned w = op.params.width;
        const unsigned radix = op.params.radix;
        const detail::Range a{in.addr1, w}, b{in.addr2, w}, d{ptr, 2 * w};
        if (op.t == 0) {
            if (w > kMaxMultWidth) throw unsupported_error("mult: unsupported width " + std::to_string(w));
            if (!op.params.is_signed) throw unsupported_error("mult: unsigned operands are not supported");
            detail::check_range(a, "multiplicand");
            detail::check_range(b, "multiplier");
            detail::check_range(d, "product");
            detail::check_disjoint(a, d, "multiplicand/product");
            detail::check_disjoint(b, d, "multiplier/product");
            booth = BoothState{};
            sign_latch = 0;
            prev_a = 0;
            carry = 0;
            if (radix == 4) recode_radix4(regfile.read(b.row + 1), regfile.read(b.row));
            return;
        }
        const unsigned per_pass = w + 2;
        const unsigned passes = mult_passes(w, radix);
        if (op.t > passes * per_pass) return;
        const unsigned j = (op.t - 1) / per_pass;
        const unsigned u = (op.t - 1) % per_pass;

        if (radix == 2) {
            if (u == 0) {
                recode_radix2(regfile.read(b.row + j));
                return;
            }
            const unsigned k = u - 1; // 0..w
            const unsigned row = d.row + j + k;
            const RowBits av = j == 0 ? 0 : (k < w ? regfile.read(row) : sign_latch);
            const RowBits cur = k < w ? regfile.read(a.row + k) : prev_a;
            prev_a = cur;
            const RowBits bv = static_cast<RowBits>((cur & booth.one) ^ booth.neg);
            const auto r = alu_step(av, bv, carry, AluMode::BoothPass);
            carry = r.carry;
            regfile.write(row, r.sum);
            if (k == w) sign_latch = r.sum;
            return;
        }

        const unsigned k = u; // 0..w+1
        const unsigned row = d.row + 2 * j + k;
        const RowBits av = j == 0 ? 0 : (k < w ? regfile.read(row) : sign_latch);
        const RowBits cur = k < w ? regfile.read(a.row + k) : prev_a;
        const RowBits twice = k == 0 ? 0 : prev_a;
        prev_a = cur;
        const RowBits m = static_cast<RowBits>((cur & booth.one) | (twice & booth.two));
        const auto r = alu_step(av, static_cast<RowBits>(m ^ booth.neg), carry, AluMode::BoothPass);
        carry = r.carry;
        regfile.write(row, r.sum);
        if (k == w + 1) {
            sign_latch = r.sum;
            if (j + 1 < passes)
                recode_radix4(regfile.read(b.row + 2 * j + 3), regfile.read(b.row + 2 * j + 2));
        }
    }

    void step_acc_block(const MicroOp& op) {
        const auto& in = op.in;
        const unsigned stage = in.fn;
        const unsigned n = op.params.acc_width;
        const detail::Range s{in.addr1, n}, d{in.addr2, n};
        if (stage >= 4) throw range_error("accblk: invalid stage " + std::to_string(stage));
        const unsigned dist = 1u << stage;
        RowBits rx = 0;
        for (unsigned p = 0; p < kPes; p += 2 * dist) rx |= static_cast<RowBits>(1u << p);
        if (op.t == 0) {
            detail::check_range(s, "reduction source");
            detail::check_range(d, "reduction destination");
            detail::check_overlap(s, d, "reduction");
            carry = 0;
            return;
        }
        if (op.t > n) return;
        const unsigned i = op.t - 1;
        const RowBits src = regfile.read(s.row + i);
        const RowBits own = s.row == d.row ? src : regfile.read(d.row + i);
        const RowBits neighbour = static_cast<RowBits>((src >> dist) & rx); // OpMux, same row
        const auto r = alu_step(static_cast<RowBits>(own & rx), neighbour, carry);
        carry = static_cast<RowBits>(r.carry & rx);
        regfile.write(d.row + i, static_cast<RowBits>((own & ~rx) | (r.sum & rx)));
    }

    void step_acc_hop(const MicroOp& op) {
        const auto& in = op.in;
        const unsigned n = op.params.acc_width;
        const unsigned slice = op.params.slice;
        const unsigned beats = ceil_div(n, slice);
        if (in.fn >= 16) throw range_error("acchop: invalid level " + std::to_string(in.fn));
        const unsigned dist = 1u << in.fn;
        const bool sender = column % (2 * dist) == dist;
        const bool receiver = column % (2 * dist) == 0;
        const detail::Range s{in.addr1, n}, d{in.addr2, n};
        if (op.t == 0) {
            detail::check_range(s, "hop source");
            detail::check_range(d, "hop destination");
            carry = 0;
        }
        if (receiver && op.t >= 1 && op.t <= beats && east_in.valid) {
            const unsigned first = (op.t - 1) * slice;
            auto own = regfile.read_slice(d.row + first, east_in.count);
            for (unsigned i = 0; i < east_in.count; ++i) {
                const auto r = alu_step(own[i], east_in.rows[i], carry);
                own[i] = r.sum;
                carry = r.carry;
            }
            regfile.write_slice(d.row + first, east_in.count, own);
        }
        if (sender && op.t < beats) launch(s.row, n, slice, op.t);
    }

    void step_read_out(const MicroOp& op) {
        const unsigned n = op.params.acc_width;
        const detail::Range s{op.in.addr1, n};
        if (op.t == 0) detail::check_range(s, "readout source");
        if (column == 0 && op.t < ceil_div(n, op.params.slice)) launch(s.row, n, op.params.slice, op.t);
    }
};

// ---------------------------------------------------------------------------
// Standalone drivers: run one instruction on a single block to completion.
// ---------------------------------------------------------------------------

inline unsigned run_standalone(PimBlock& blk, const isa::Instruction& in, const OpParams& p, unsigned d_alu = 2) {
    const unsigned cycles = op_cycles(in, p, d_alu);
    for (unsigned t = 0; t < cycles; ++t) {
        blk.regfile.begin_cycle();
        blk.step(MicroOp{in, p, t});
        blk.east_in = {};
        blk.west_out = {};
    }
    return cycles;
}

inline unsigned exec_add(PimBlock& blk, unsigned row_a, unsigned row_b, unsigned row_d, unsigned width,
                         unsigned d_alu = 2) {
    OpParams p;
    p.width = width;
    blk.ptr = row_d;
    return run_standalone(blk, isa::add(row_a, row_b), p, d_alu);
}

inline unsigned exec_sub(PimBlock& blk, unsigned row_a, unsigned row_b, unsigned row_d, unsigned width,
                         unsigned d_alu = 2) {
    OpParams p;
    p.width = width;
    blk.ptr = row_d;
    return run_standalone(blk, isa::sub(row_a, row_b), p, d_alu);
}

inline unsigned exec_mult_booth(PimBlock& blk, unsigned row_a, unsigned row_b, unsigned row_d, unsigned width,
                                unsigned radix, unsigned d_alu = 2) {
    if (width > kMaxMultWidth) throw unsupported_error("mult: unsupported width " + std::to_string(width));
    OpParams p;
    p.width = width;
    p.radix = radix;
    blk.ptr = row_d;
    return run_standalone(blk, isa::mult(row_a, row_b), p, d_alu);
}

inline unsigned acc_block_stage(PimBlock& blk, unsigned stage, unsigned row_s, unsigned row_d, unsigned acc_width,
                                unsigned d_alu = 2) {
    if (stage >= 4) throw range_error("accblk: invalid stage " + std::to_string(stage));
    OpParams p;
    p.acc_width = acc_width;
    blk.ptr = row_d;
    return run_standalone(blk, isa::acc_blk(stage, row_s, row_d), p, d_alu);
}

struct StreamTrace {
    unsigned beats = 0;
    std::vector<StreamLatch> emitted;
};

// Streams an accumulator out of the west port, LSB first.
inline StreamTrace stream_west(PimBlock& blk, unsigned row_s, unsigned acc_width, unsigned slice) {
    StreamTrace tr;
    tr.beats = ceil_div(acc_width, slice);
    for (unsigned beat = 0; beat < tr.beats; ++beat) {
        blk.regfile.begin_cycle();
        const unsigned first = beat * slice;
        const unsigned count = std::min(slice, acc_width - first);
        blk.west_out = {blk.regfile.read_slice(row_s + first, count), count, true};
        tr.emitted.push_back(blk.west_out);
    }
    blk.west_out = {};
    return tr;
}

// Reassembles one PE's value from a west stream.
inline std::int64_t reassemble(const std::vector<StreamLatch>& beats, unsigned pe, unsigned width,
                               bool is_signed = true) {
    std::uint64_t v = 0;
    unsigned bit = 0;
    for (const auto& b : beats)
        for (unsigned i = 0; i < b.count; ++i, ++bit) v |= std::uint64_t{(b.rows[i] >> pe) & 1u} << bit;
    if (is_signed && width < 64 && (v >> (width - 1)) & 1) v |= ~std::uint64_t{0} << width;
    return static_cast<std::int64_t>(v);
}

inline void set_block_select(PimBlock& blk, unsigned id, unsigned mask) noexcept { blk.set_block_select(id, mask); }

} // namespace imagine::pim
